#![allow(dead_code)]

use fedrem::scenario::{ChannelConfig, ScenarioConfig};
use fedrem::synth::{dbm_to_watts, AccessPoint, TrafficModel};

/// Bursty traffic that is busy about a third of the time.
pub fn busy_traffic() -> TrafficModel {
    TrafficModel {
        idle_rate_per_ms: 0.5,
        busy_duration_ms: 1.0,
    }
}

pub fn ap(x: f64, y: f64, channel: usize, dbm: f64) -> AccessPoint {
    AccessPoint {
        position: [x, y],
        channel,
        traffic: busy_traffic(),
        tx_power_w: dbm_to_watts(dbm),
    }
}

/// Three locations, three channels, a strong nearby AP on channels 0 and 1
/// and nothing on channel 2. Small enough for whole experiments in a test.
pub fn tiny_scenario() -> ScenarioConfig {
    let mut s = ScenarioConfig {
        locations: vec![[0.0, 0.0], [20.0, 0.0], [40.0, 0.0]],
        access_points: vec![ap(5.0, 4.0, 0, 30.0), ap(35.0, -4.0, 1, 30.0)],
        channels: [2.412e9, 2.437e9, 2.462e9]
            .into_iter()
            .map(ChannelConfig::ieee80211p)
            .collect(),
        capture_m: 256 * 64,
        laps: 3,
        seeds: vec![0, 1],
        ..ScenarioConfig::default()
    };
    s.gmm.components = 3;
    s.baseline.n_samples = 4000;
    s.radio.segment_interval_ms = Some(5.0);
    s.validate().unwrap();
    s
}
