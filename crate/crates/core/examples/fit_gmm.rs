//! Fit interference mixtures to chi samples and pick the component count
//! from the AIC curve.

use fedrem::gmm::{select_j, EmOptions, DEFAULT_AIC_PLATEAU};
use fedrem::harness::capture_chi;
use fedrem::scenario::ScenarioConfig;

fn main() -> fedrem::error::Result<()> {
    let scenario = ScenarioConfig::default();
    let chi = capture_chi(&scenario, 12, 1, 20_000, 3)?;

    let sel = select_j(&chi.samples, 9, DEFAULT_AIC_PLATEAU, &EmOptions::default())?;
    for (j, aic) in sel.aic.iter().enumerate() {
        let mark = if j + 1 == sel.j { " <- chosen" } else { "" };
        println!("J = {}: AIC {aic:.1}{mark}", j + 1);
    }

    let m = &sel.models[sel.j - 1];
    println!("sigma {:.3}", m.sigma());
    for (mu, w) in m.means().iter().zip(m.weights()) {
        println!("  mean {mu:7.3}  weight {w:.4}");
    }
    Ok(())
}
