//! A shortened learning experiment: stand-alone fits, one platoon and three
//! federated platoons, compared by RMSE against a baseline map.

use fedrem::harness::{build_baseline, run_experiment, Mode, RunSpec};
use fedrem::scenario::ScenarioConfig;

fn main() -> fedrem::error::Result<()> {
    let scenario = ScenarioConfig::default();
    let baseline = build_baseline(&scenario, 20_000, 1)?;
    let spec = |mode, platoons| RunSpec { mode, platoons, n_s: 512, k: 5, laps: 5 };
    let sweep = [spec(Mode::Saim, 1), spec(Mode::Global, 1), spec(Mode::Global, 3)];

    let report = run_experiment(&scenario, &baseline, &sweep, &[0, 1])?;
    for cfg in &report.configs {
        let curve: Vec<String> = cfg.rmse_mean.iter().map(|x| format!("{x:.2e}")).collect();
        println!("{:>6} U={}: {}", cfg.spec.mode.to_string(), cfg.spec.platoons, curve.join(" "));
    }
    let dir = std::env::temp_dir().join("fedrem_example_report");
    report.save(&dir)?;
    println!("report written to {}", dir.display());
    Ok(())
}
