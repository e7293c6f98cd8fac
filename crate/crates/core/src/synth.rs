//! Synthetic interference at a platoon location.
//!
//! Each access point alternates exponentially distributed idle gaps with
//! fixed-length busy bursts. While busy it radiates a unit-power complex
//! Gaussian waveform across the whole channel, attenuated by a two-slope
//! path loss and a Rayleigh tapped-delay-line channel that is redrawn for
//! every captured segment. Thermal noise is added on top.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Exp, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::scenario::ScenarioConfig;
use crate::spectral::PowerGrid;

pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Two-state on/off traffic of one access point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficModel {
    /// Rate of the exponential idle duration, per millisecond.
    pub idle_rate_per_ms: f64,
    /// Length of every busy burst, milliseconds.
    pub busy_duration_ms: f64,
}

impl Default for TrafficModel {
    fn default() -> Self {
        TrafficModel {
            idle_rate_per_ms: 0.0054,
            busy_duration_ms: 0.81,
        }
    }
}

impl TrafficModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.idle_rate_per_ms.is_finite() && self.idle_rate_per_ms > 0.0) {
            return Err(Error::invalid("idle rate must be positive"));
        }
        if !(self.busy_duration_ms.is_finite() && self.busy_duration_ms > 0.0) {
            return Err(Error::invalid("busy duration must be positive"));
        }
        Ok(())
    }

    pub fn mean_idle_ms(&self) -> f64 {
        1.0 / self.idle_rate_per_ms
    }

    /// Long-run fraction of time spent busy (renewal-reward).
    pub fn busy_fraction(&self) -> f64 {
        self.busy_duration_ms / (self.busy_duration_ms + self.mean_idle_ms())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusyInterval {
    pub start_ms: f64,
    pub end_ms: f64,
}

/// Sorted, non-overlapping busy intervals over `[0, duration_ms)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyTrace {
    pub duration_ms: f64,
    pub busy: Vec<BusyInterval>,
}

impl OccupancyTrace {
    pub fn is_busy(&self, t_ms: f64) -> bool {
        let idx = self.busy.partition_point(|iv| iv.end_ms <= t_ms);
        self.busy
            .get(idx)
            .is_some_and(|iv| iv.start_ms <= t_ms && t_ms < iv.end_ms)
    }

    pub fn busy_time_ms(&self) -> f64 {
        self.busy.iter().map(|iv| iv.end_ms - iv.start_ms).sum()
    }
}

/// Idle/busy renewal process starting in the idle state at time zero. The
/// last burst is clipped to the trace duration.
pub fn generate_occupancy_trace(
    traffic: &TrafficModel,
    duration_ms: f64,
    seed: u64,
) -> Result<OccupancyTrace> {
    let mut rng = rng_from_seed(seed);
    occupancy_trace_with(traffic, duration_ms, &mut rng)
}

pub fn occupancy_trace_with<R: Rng + ?Sized>(
    traffic: &TrafficModel,
    duration_ms: f64,
    rng: &mut R,
) -> Result<OccupancyTrace> {
    if !(duration_ms.is_finite() && duration_ms > 0.0) {
        return Err(Error::invalid(format!(
            "trace duration must be positive, got {duration_ms}"
        )));
    }
    traffic.validate()?;
    let idle = Exp::new(traffic.idle_rate_per_ms).expect("validated rate");
    let mut busy = Vec::new();
    let mut t = 0.0;
    loop {
        t += rng.sample(idle);
        if t >= duration_ms {
            break;
        }
        let end = (t + traffic.busy_duration_ms).min(duration_ms);
        busy.push(BusyInterval {
            start_ms: t,
            end_ms: end,
        });
        t = end;
    }
    Ok(OccupancyTrace { duration_ms, busy })
}

/// Two-slope large-scale path loss: free-space-like up to the breakpoint
/// `4 h_tx h_rx f / c`, steeper beyond it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathLossModel {
    pub near_exponent: f64,
    pub far_exponent: f64,
    pub tx_height_m: f64,
    pub rx_height_m: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel {
            near_exponent: 2.0,
            far_exponent: 4.0,
            tx_height_m: 1.5,
            rx_height_m: 1.5,
        }
    }
}

impl PathLossModel {
    pub fn breakpoint_m(&self, center_freq_hz: f64) -> f64 {
        4.0 * self.tx_height_m * self.rx_height_m * center_freq_hz / SPEED_OF_LIGHT
    }

    /// Linear power gain at `distance_m`, capped at one.
    pub fn gain(&self, distance_m: f64, center_freq_hz: f64) -> Result<f64> {
        if !(distance_m.is_finite() && distance_m > 0.0) {
            return Err(Error::invalid(format!(
                "distance must be positive, got {distance_m}"
            )));
        }
        if !(center_freq_hz.is_finite() && center_freq_hz > 0.0) {
            return Err(Error::invalid("center frequency must be positive"));
        }
        let at_1m = free_space_gain(1.0, center_freq_hz);
        let bp = self.breakpoint_m(center_freq_hz);
        let g = if distance_m <= bp {
            at_1m * distance_m.powf(-self.near_exponent)
        } else {
            at_1m * bp.powf(-self.near_exponent) * (distance_m / bp).powf(-self.far_exponent)
        };
        Ok(g.min(1.0))
    }
}

/// Friis gain `(c / (4 pi f d))^2` with isotropic antennas.
pub fn free_space_gain(distance_m: f64, center_freq_hz: f64) -> f64 {
    (SPEED_OF_LIGHT / (4.0 * PI * center_freq_hz * distance_m)).powi(2)
}

/// Two-slope path loss with the default model parameters.
pub fn path_loss_gain(distance_m: f64, center_freq_hz: f64) -> Result<f64> {
    PathLossModel::default().gain(distance_m, center_freq_hz)
}

/// `k_B * T * bandwidth`, watts.
pub fn thermal_noise_power(temperature_k: f64, bandwidth_hz: f64) -> Result<f64> {
    if !(temperature_k.is_finite() && temperature_k > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
        return Err(Error::invalid("bandwidth must be positive"));
    }
    Ok(BOLTZMANN * temperature_k * bandwidth_hz)
}

/// Exponentially decaying tap powers, normalised to unit sum.
pub fn exponential_pdp(n_taps: usize, decay_db_per_tap: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n_taps)
        .map(|k| 10f64.powf(-decay_db_per_tap * k as f64 / 10.0))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

fn validate_pdp(pdp: &[f64]) -> Result<()> {
    if pdp.is_empty() {
        return Err(Error::invalid("power-delay profile is empty"));
    }
    if pdp.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid("tap powers must be non-negative"));
    }
    let total: f64 = pdp.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("tap powers sum to {total}, not 1")));
    }
    Ok(())
}

/// Rayleigh block-fading frequency response over `n_subcarriers`. Taps are
/// one sample apart.
#[derive(Debug, Clone)]
pub struct FadingChannel {
    pdp_sqrt_half: Vec<f64>,
    /// `twiddle[f * n_taps + k] = exp(-2 pi i f k / N)`
    twiddle: Vec<Complex64>,
    n_subcarriers: usize,
}

impl FadingChannel {
    pub fn new(pdp: &[f64], n_subcarriers: usize) -> Result<Self> {
        validate_pdp(pdp)?;
        if n_subcarriers == 0 {
            return Err(Error::invalid("need at least one subcarrier"));
        }
        let n_taps = pdp.len();
        let mut twiddle = Vec::with_capacity(n_taps * n_subcarriers);
        for f in 0..n_subcarriers {
            for k in 0..n_taps {
                let phase = -2.0 * PI * ((f * k) % n_subcarriers) as f64 / n_subcarriers as f64;
                twiddle.push(Complex64::from_polar(1.0, phase));
            }
        }
        Ok(FadingChannel {
            pdp_sqrt_half: pdp.iter().map(|p| (p / 2.0).sqrt()).collect(),
            twiddle,
            n_subcarriers,
        })
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    /// Draws fresh taps and writes the per-subcarrier gains into `out`.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, taps: &mut Vec<Complex64>, out: &mut [Complex64]) {
        taps.clear();
        for &s in &self.pdp_sqrt_half {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            taps.push(Complex64::new(s * re, s * im));
        }
        let n_taps = taps.len();
        for (f, o) in out.iter_mut().enumerate().take(self.n_subcarriers) {
            let tw = &self.twiddle[f * n_taps..(f + 1) * n_taps];
            *o = taps.iter().zip(tw).map(|(h, w)| h * w).sum();
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_subcarriers];
        let mut taps = Vec::new();
        self.draw_into(rng, &mut taps, &mut out);
        out
    }
}

/// One realisation of the per-subcarrier channel: complex Gaussian taps with
/// variances `pdp`, transformed by an `n_subcarriers`-point DFT.
pub fn small_scale_gain(pdp: &[f64], n_subcarriers: usize, seed: u64) -> Result<Vec<Complex64>> {
    let ch = FadingChannel::new(pdp, n_subcarriers)?;
    Ok(ch.draw(&mut rng_from_seed(seed)))
}

/// A primary transmitter interfering with one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub position: [f64; 2],
    pub channel: usize,
    #[serde(default)]
    pub traffic: TrafficModel,
    /// Total transmit power in watts, spread evenly over the channel.
    pub tx_power_w: f64,
}

impl AccessPoint {
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        ((self.position[0] - p[0]).powi(2) + (self.position[1] - p[1]).powi(2)).sqrt()
    }
}

/// Raw IQ capture of one channel at one location.
#[derive(Debug, Clone, PartialEq)]
pub struct IqBatch {
    pub samples: Vec<Complex64>,
    pub location: usize,
    pub channel: usize,
}

/// How an access point looks from one capture point.
struct Emitter {
    /// Mean received power per subcarrier before fading, watts.
    per_bin_power: f64,
    trace: OccupancyTrace,
}

/// Draws the DFT-domain content of consecutive captured segments.
///
/// Segment `r` starts at `t0 + r * interval`, where `interval` is
/// `radio.segment_interval_ms` (or back-to-back segments when unset) and `t0`
/// is a random offset into the traffic traces. An access point counts as busy
/// for a whole segment when it is busy at the segment's midpoint.
///
/// Within a segment every active emitter's waveform, passed through its
/// faded channel, is a circularly symmetric Gaussian per DFT bin, so each bin
/// is drawn directly with the summed variance.
struct SegmentSource {
    emitters: Vec<Emitter>,
    fading: FadingChannel,
    noise_per_bin: f64,
    t0: f64,
    interval_ms: f64,
    segment_ms: f64,
    variances: Vec<f64>,
    gains: Vec<Complex64>,
    taps: Vec<Complex64>,
    frng: SimRng,
    wrng: SimRng,
}

impl SegmentSource {
    fn new(
        scenario: &ScenarioConfig,
        location: usize,
        channel: usize,
        n_segments: usize,
        seed: u64,
    ) -> Result<Self> {
        let point = *scenario
            .locations
            .get(location)
            .ok_or_else(|| Error::NotFound(format!("location {location}")))?;
        let cfg = scenario
            .channels
            .get(channel)
            .ok_or_else(|| Error::NotFound(format!("channel {channel}")))?;
        let n_f = cfg.n_subchannels;
        let radio = &scenario.radio;
        let noise_per_bin =
            thermal_noise_power(radio.temperature_k, cfg.bandwidth_hz)? / n_f as f64;
        let segment_ms = n_f as f64 / cfg.bandwidth_hz * 1e3;
        let interval_ms = radio.segment_interval_ms.unwrap_or(segment_ms);
        if !(interval_ms.is_finite() && interval_ms > 0.0) {
            return Err(Error::invalid("segment interval must be positive"));
        }

        let mut rng = rng_from_seed(derive_seed(seed, &[0]));
        let t0 = rng.random::<f64>() * radio.trace_warmup_ms;
        let span_ms = t0 + n_segments as f64 * interval_ms + segment_ms;

        let mut emitters = Vec::new();
        for (idx, ap) in scenario.access_points.iter().enumerate() {
            if ap.channel != channel {
                continue;
            }
            let gain = radio
                .path_loss
                .gain(ap.distance_to(point), cfg.center_freq_hz)?;
            let mut trng = rng_from_seed(derive_seed(seed, &[1, idx as u64]));
            emitters.push(Emitter {
                per_bin_power: ap.tx_power_w * gain / n_f as f64,
                trace: occupancy_trace_with(&ap.traffic, span_ms, &mut trng)?,
            });
        }

        Ok(SegmentSource {
            emitters,
            fading: FadingChannel::new(&radio.pdp, n_f)?,
            noise_per_bin,
            t0,
            interval_ms,
            segment_ms,
            variances: vec![0.0; n_f],
            gains: vec![Complex64::new(0.0, 0.0); n_f],
            taps: Vec::with_capacity(radio.pdp.len()),
            frng: rng_from_seed(derive_seed(seed, &[2])),
            wrng: rng_from_seed(derive_seed(seed, &[3])),
        })
    }

    /// Bin amplitudes of segment `r`; `|out[f]|^2` is the power of bin `f`.
    fn fill(&mut self, r: usize, out: &mut [Complex64]) {
        let mid = self.t0 + r as f64 * self.interval_ms + 0.5 * self.segment_ms;
        self.variances.fill(self.noise_per_bin);
        for e in &self.emitters {
            if e.trace.is_busy(mid) {
                self.fading
                    .draw_into(&mut self.frng, &mut self.taps, &mut self.gains);
                for (v, g) in self.variances.iter_mut().zip(&self.gains) {
                    *v += e.per_bin_power * g.norm_sqr();
                }
            }
        }
        for (o, &v) in out.iter_mut().zip(&self.variances) {
            *o = complex_gaussian(&mut self.wrng, v);
        }
    }
}

fn check_capture_len(m: usize, n_f: usize) -> Result<usize> {
    if m == 0 || !m.is_multiple_of(n_f) {
        return Err(Error::invalid(format!(
            "capture length {m} is not a positive multiple of N_f = {n_f}"
        )));
    }
    Ok(m / n_f)
}

fn channel_n_f(scenario: &ScenarioConfig, channel: usize) -> Result<usize> {
    scenario
        .channels
        .get(channel)
        .map(|c| c.n_subchannels)
        .ok_or_else(|| Error::NotFound(format!("channel {channel}")))
}

/// Synthesises `m` IQ samples on `channel` at `location`: `m / N_f`
/// segments, each the inverse DFT of independently drawn bin amplitudes.
/// Bin powers follow the convention of
/// [`crate::spectral::segment_power_grid`]: they add up to the mean sample
/// power.
pub fn synthesize_iq_batch(
    scenario: &ScenarioConfig,
    location: usize,
    channel: usize,
    m: usize,
    seed: u64,
) -> Result<IqBatch> {
    let n_f = channel_n_f(scenario, channel)?;
    let n_segments = check_capture_len(m, n_f)?;
    let mut src = SegmentSource::new(scenario, location, channel, n_segments, seed)?;
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n_f);
    let mut samples = vec![Complex64::new(0.0, 0.0); m];
    for (r, seg) in samples.chunks_exact_mut(n_f).enumerate() {
        src.fill(r, seg);
        // x[n] = sum_f A_f exp(+2 pi i f n / N) puts |A_f|^2 into bin f.
        ifft.process(seg);
    }
    Ok(IqBatch {
        samples,
        location,
        channel,
    })
}

/// Same capture as [`synthesize_iq_batch`] with the same seed, but returns
/// the per-segment bin powers directly instead of round-tripping through the
/// time domain. Agrees with `segment_power_grid(synthesize_iq_batch(..))` up
/// to FFT rounding.
pub fn synthesize_power_grid(
    scenario: &ScenarioConfig,
    location: usize,
    channel: usize,
    m: usize,
    seed: u64,
) -> Result<PowerGrid> {
    let n_f = channel_n_f(scenario, channel)?;
    let n_segments = check_capture_len(m, n_f)?;
    let mut src = SegmentSource::new(scenario, location, channel, n_segments, seed)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); n_f];
    let mut powers = Vec::with_capacity(m);
    for r in 0..n_segments {
        src.fill(r, &mut amps);
        powers.extend(amps.iter().map(|a| a.norm_sqr()));
    }
    Ok(PowerGrid {
        n_segments,
        n_bins: n_f,
        powers,
        location,
        channel,
    })
}

#[inline]
fn complex_gaussian(rng: &mut SimRng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}
