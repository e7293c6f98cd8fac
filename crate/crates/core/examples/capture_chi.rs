//! Synthesise one IQ capture at a location, split it into per-sub-channel
//! powers and aggregate each segment into a chi sample.

use fedrem::scenario::ScenarioConfig;
use fedrem::spectral::{aggregate_chi, segment_power_grid};
use fedrem::synth::synthesize_iq_batch;

fn main() -> fedrem::error::Result<()> {
    let scenario = ScenarioConfig::default();
    let (location, channel) = (3, 0);
    let cfg = &scenario.channels[channel];

    let iq = synthesize_iq_batch(&scenario, location, channel, 4096 * cfg.n_subchannels, 7)?;
    let grid = segment_power_grid(&iq, cfg.n_subchannels)?;
    let chi = aggregate_chi(&grid, &cfg.usable_subchannels)?;

    let mut sorted = chi.samples.clone();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted[((sorted.len() - 1) as f64 * p) as usize];
    println!("location {location}, channel {channel}: {} chi samples", chi.len());
    println!("  min {:.2}  1% {:.2}  median {:.2}  max {:.2}", q(0.0), q(0.01), q(0.5), q(1.0));

    let threshold = fedrem::harness::thresholds(&scenario)?[channel];
    let below = chi.samples.iter().filter(|&&x| x < threshold).count();
    println!("  outage threshold {threshold:.2}: {below} samples below");
    Ok(())
}
