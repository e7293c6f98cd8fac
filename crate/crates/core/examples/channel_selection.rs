//! Rank the channels at a few locations by modelled outage probability,
//! using a small baseline map.

use fedrem::cqa::channel_outages;
use fedrem::harness::{build_baseline, links};
use fedrem::scenario::ScenarioConfig;

fn main() -> fedrem::error::Result<()> {
    let scenario = ScenarioConfig::default();
    let map = build_baseline(&scenario, 20_000, 1)?;
    let links = links(&scenario)?;

    for l in (0..scenario.n_locations()).step_by(3) {
        let p = channel_outages(&map, l, &links)?;
        let best = fedrem::cqa::argmin_outage(&p).unwrap();
        let shown: Vec<String> = p.iter().map(|x| format!("{x:.2e}")).collect();
        println!("location {l:2}: outage [{}] -> channel {best}", shown.join(", "));
    }
    Ok(())
}
