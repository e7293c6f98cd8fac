//! Two platoons refine their local maps at one location; the server merges
//! them and the global map is saved and reloaded.

use fedrem::fl::{fed_avg_merge, local_update, n_th};
use fedrem::gmm::fit_em;
use fedrem::harness::capture_chi;
use fedrem::rem::{RemEntry, RemStore};
use fedrem::rng::derive_seed;
use fedrem::scenario::ScenarioConfig;

fn main() -> fedrem::error::Result<()> {
    let scenario = ScenarioConfig::default().with_n_s(1024);
    let learning = scenario.learning();
    let (location, channel) = (5, 2);
    let mut locals = [RemStore::local(0), RemStore::local(1)];

    for lap in 0..4u64 {
        for (u, local) in locals.iter_mut().enumerate() {
            let seed = derive_seed(11, &[lap, u as u64]);
            let chi = capture_chi(&scenario, location, channel, learning.n_s as usize, seed)?;
            let fit = fit_em(&chi.samples, scenario.gmm.components, &scenario.gmm.em.with_seed(seed))?;
            let updated = local_update(local.get(location, channel), &fit, &learning)?;
            local.put(location, channel, updated)?;
        }
    }

    let parts: Vec<_> = locals
        .iter()
        .map(|l| {
            let e = l.require(location, channel)?;
            Ok((e.model.clone(), n_th(e.n_r, learning.k, learning.n_s)))
        })
        .collect::<fedrem::error::Result<_>>()?;
    let merged = fed_avg_merge(&parts)?;
    println!("merged sigma {:.3}, means {:.2?}", merged.sigma(), merged.means());

    let mut global = RemStore::global();
    global.put(location, channel, RemEntry { model: merged, n_r: 2 * 4 * learning.n_s })?;
    let path = std::env::temp_dir().join("fedrem_example_global.json");
    global.save(&path)?;
    assert_eq!(RemStore::load(&path)?, global);
    println!("saved and reloaded {}", path.display());
    Ok(())
}
