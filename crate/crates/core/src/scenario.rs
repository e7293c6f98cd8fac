//! Scenario description: route, access points, channels and every physical
//! or algorithmic knob the simulation reads. Loaded from and saved to JSON;
//! every key except `locations`, `access_points` and `channels` can be
//! omitted and falls back to the default.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cqa::LinkBudget;
use crate::error::{Error, Result};
use crate::fl::LearningConfig;
use crate::gmm::{EmOptions, DEFAULT_AIC_PLATEAU};
use crate::rng::rng_from_seed;
use crate::synth::{
    dbm_to_watts, exponential_pdp, free_space_gain, AccessPoint, PathLossModel, TrafficModel,
};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// One secondary channel and its OFDM sub-channel grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub center_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub n_subchannels: usize,
    pub usable_subchannels: Vec<usize>,
    pub subcarrier_spacing_hz: f64,
}

impl ChannelConfig {
    /// 10 MHz channel, 64-point grid, 48 usable bins: the 24 on each side of
    /// DC, DC itself excluded.
    pub fn ieee80211p(center_freq_hz: f64) -> Self {
        let n = 64;
        let usable = (1..=24).chain(n - 24..n).collect();
        ChannelConfig {
            center_freq_hz,
            bandwidth_hz: 10e6,
            n_subchannels: n,
            usable_subchannels: usable,
            subcarrier_spacing_hz: 156_250.0,
        }
    }

    pub fn subchannel_bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz / self.n_subchannels as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center_freq_hz > 0.0 && self.bandwidth_hz > 0.0) {
            return Err(Error::invalid("channel frequency and bandwidth must be positive"));
        }
        if self.n_subchannels == 0 {
            return Err(Error::invalid("channel needs at least one sub-channel"));
        }
        let mut seen = vec![false; self.n_subchannels];
        for &f in &self.usable_subchannels {
            if f >= self.n_subchannels || seen[f] {
                return Err(Error::invalid(format!(
                    "usable sub-channel {f} is out of range or repeated"
                )));
            }
            seen[f] = true;
        }
        if self.usable_subchannels.is_empty() {
            return Err(Error::invalid("no usable sub-channels"));
        }
        let implied = self.n_subchannels as f64 * self.subcarrier_spacing_hz;
        if ((implied - self.bandwidth_hz) / self.bandwidth_hz).abs() > 1e-2 {
            return Err(Error::invalid(format!(
                "bandwidth {} Hz disagrees with {} x {} Hz",
                self.bandwidth_hz, self.n_subchannels, self.subcarrier_spacing_hz
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConfig {
    pub temperature_k: f64,
    pub path_loss: PathLossModel,
    /// Tap powers of the small-scale channel, one sample apart, summing to 1.
    pub pdp: Vec<f64>,
    /// Time between the starts of consecutive captured segments. `null`
    /// means back-to-back segments.
    pub segment_interval_ms: Option<f64>,
    /// Captures start at a uniform offset in `[0, trace_warmup_ms)` into the
    /// traffic traces.
    pub trace_warmup_ms: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            temperature_k: 293.15,
            path_loss: PathLossModel::default(),
            pdp: exponential_pdp(4, 3.0),
            segment_interval_ms: Some(250.0),
            trace_warmup_ms: 2000.0,
        }
    }
}

/// Intra-platoon link between the leader and the last vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkConfig {
    /// Includes antenna gains.
    pub p_tx_per_subcarrier_dbm: f64,
    pub leader_tail_distance_m: f64,
    /// Extra antenna gain on top of free-space loss, dB.
    pub antenna_gain_db: f64,
    pub c_th_bps: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            p_tx_per_subcarrier_dbm: 3.19,
            leader_tail_distance_m: 50.0,
            antenna_gain_db: 0.0,
            c_th_bps: 3e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmConfig {
    /// `J`, shared by every model in a run.
    pub components: usize,
    pub em: EmOptions,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            components: 7,
            em: EmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// Chi samples per (location, channel).
    pub n_samples: usize,
    pub seed: u64,
    /// When set, the component count is picked per batch by AIC over
    /// `1..=select_j_max`; otherwise `gmm.components` is used.
    pub select_j_max: Option<usize>,
    pub aic_plateau: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            n_samples: 100_000,
            seed: 0xBA5E,
            select_j_max: None,
            aic_plateau: DEFAULT_AIC_PLATEAU,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    /// Platoon positions along the route, metres.
    pub locations: Vec<[f64; 2]>,
    pub access_points: Vec<AccessPoint>,
    pub channels: Vec<ChannelConfig>,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default)]
    pub gmm: GmmConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    /// IQ samples per capture, `N_s * N_f`.
    #[serde(default = "default_capture_m")]
    pub capture_m: usize,
    #[serde(default = "default_platoons")]
    pub platoons: usize,
    #[serde(default = "default_laps")]
    pub laps: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_learning_k")]
    pub learning_k: u64,
}

fn schema_version() -> u32 {
    SCENARIO_SCHEMA_VERSION
}
fn default_capture_m() -> usize {
    4096 * 64
}
fn default_platoons() -> usize {
    1
}
fn default_laps() -> usize {
    15
}
fn default_seeds() -> Vec<u64> {
    (0..20).collect()
}
fn default_learning_k() -> u64 {
    5
}

/// Seed of the access-point scatter in [`ScenarioConfig::default`].
pub const LAYOUT_SEED: u64 = 2022;

impl Default for ScenarioConfig {
    /// 1 km straight route sampled at 30 segment centres, three channels at
    /// 2.412/2.437/2.462 GHz, and 11 access points (4/4/3 per channel)
    /// scattered uniformly within 100 m of the road at 20 dBm.
    fn default() -> Self {
        let route_m = 1000.0;
        let n_loc = 30;
        let locations = (0..n_loc)
            .map(|l| [(l as f64 + 0.5) * route_m / n_loc as f64, 0.0])
            .collect();
        let mut rng = rng_from_seed(LAYOUT_SEED);
        let access_points = [0usize, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2]
            .into_iter()
            .map(|channel| {
                let x = rng.random::<f64>() * route_m;
                let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let y = side * (5.0 + 95.0 * rng.random::<f64>());
                AccessPoint {
                    position: [x, y],
                    channel,
                    traffic: TrafficModel::default(),
                    tx_power_w: dbm_to_watts(20.0),
                }
            })
            .collect();
        ScenarioConfig {
            schema_version: SCENARIO_SCHEMA_VERSION,
            locations,
            access_points,
            channels: [2.412e9, 2.437e9, 2.462e9]
                .into_iter()
                .map(ChannelConfig::ieee80211p)
                .collect(),
            radio: RadioConfig::default(),
            link: LinkConfig::default(),
            gmm: GmmConfig::default(),
            baseline: BaselineConfig::default(),
            capture_m: default_capture_m(),
            platoons: default_platoons(),
            laps: default_laps(),
            seeds: default_seeds(),
            learning_k: default_learning_k(),
        }
    }
}

impl ScenarioConfig {
    pub fn n_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// `N_f`; all channels share one grid size.
    pub fn n_subchannels(&self) -> usize {
        self.channels[0].n_subchannels
    }

    /// `N_s = M / N_f`.
    pub fn n_s(&self) -> usize {
        self.capture_m / self.n_subchannels()
    }

    /// Same scenario with `N_s` chi samples per capture.
    pub fn with_n_s(&self, n_s: usize) -> Self {
        ScenarioConfig {
            capture_m: n_s * self.n_subchannels(),
            ..self.clone()
        }
    }

    pub fn learning(&self) -> LearningConfig {
        LearningConfig {
            k: self.learning_k,
            n_s: self.n_s() as u64,
        }
    }

    /// Leader-to-tail link budget on `channel`: free-space gain over the
    /// platoon length at the channel centre, no fading.
    pub fn link_budget(&self, channel: usize) -> Result<LinkBudget> {
        let cfg = self
            .channels
            .get(channel)
            .ok_or_else(|| Error::NotFound(format!("channel {channel}")))?;
        let gain = free_space_gain(self.link.leader_tail_distance_m, cfg.center_freq_hz)
            * 10f64.powf(self.link.antenna_gain_db / 10.0);
        LinkBudget::new(
            dbm_to_watts(self.link.p_tx_per_subcarrier_dbm),
            gain,
            self.link.c_th_bps,
            cfg.bandwidth_hz,
            cfg.n_subchannels,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(Error::Version {
                what: "scenario",
                found: self.schema_version,
                expected: SCENARIO_SCHEMA_VERSION,
            });
        }
        if self.locations.is_empty() || self.channels.is_empty() {
            return Err(Error::invalid("scenario needs locations and channels"));
        }
        if self.locations.len() > 2 {
            let step = |i: usize| {
                let (a, b) = (self.locations[i], self.locations[i + 1]);
                ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
            };
            let first = step(0);
            if (0..self.locations.len() - 1).any(|i| (step(i) - first).abs() > 1e-6 * first) {
                return Err(Error::invalid("locations must be equally spaced"));
            }
        }
        for c in &self.channels {
            c.validate()?;
        }
        let n_f = self.n_subchannels();
        if self.channels.iter().any(|c| c.n_subchannels != n_f) {
            return Err(Error::invalid("all channels must share N_f"));
        }
        for (i, a) in self.channels.iter().enumerate() {
            if self.channels[i + 1..]
                .iter()
                .any(|b| b.center_freq_hz == a.center_freq_hz)
            {
                return Err(Error::invalid("channel centre frequencies must be distinct"));
            }
        }
        for (i, ap) in self.access_points.iter().enumerate() {
            if ap.channel >= self.channels.len() {
                return Err(Error::invalid(format!(
                    "access point {i} uses unknown channel {}",
                    ap.channel
                )));
            }
            if !(ap.tx_power_w.is_finite() && ap.tx_power_w > 0.0) {
                return Err(Error::invalid(format!("access point {i} needs tx power > 0")));
            }
            ap.traffic.validate()?;
            for (l, &p) in self.locations.iter().enumerate() {
                if ap.distance_to(p) <= 0.0 {
                    return Err(Error::invalid(format!(
                        "access point {i} sits exactly on location {l}"
                    )));
                }
            }
        }
        if self.capture_m == 0 || !self.capture_m.is_multiple_of(n_f) {
            return Err(Error::invalid(format!(
                "capture_m = {} is not a positive multiple of N_f = {n_f}",
                self.capture_m
            )));
        }
        if self.platoons == 0 {
            return Err(Error::invalid("need at least one platoon"));
        }
        if self.learning_k == 0 {
            return Err(Error::invalid("learning k must be at least 1"));
        }
        if self.gmm.components == 0 || self.n_s() < 2 * self.gmm.components {
            return Err(Error::invalid(format!(
                "N_s = {} is too small for J = {}",
                self.n_s(),
                self.gmm.components
            )));
        }
        if self.baseline.n_samples < 2 * self.gmm.components {
            return Err(Error::invalid("baseline batch is too small"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "scenario".into(),
            source: e,
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}
