//! Channel-quality assessment: Shannon capacity of the platoon link, the
//! outage threshold on chi, and lowest-outage channel selection.
//!
//! At low SINR, `log2(1 + s) ~ s / ln 2`, so capacity below `C_th` becomes
//! `sum 1/(noise + I_f) < ln2 C_th N_f / (B P_tx H)`, i.e. `chi < t` with
//! `chi` the log of the summed reciprocal interference-plus-noise powers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::GmmParams;
use crate::rem::RemStore;

/// Leader-to-tail link on one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub p_tx_per_subcarrier_w: f64,
    /// Linear power gain, antenna gains included.
    pub channel_gain: f64,
    pub c_th_bps: f64,
    pub bandwidth_hz: f64,
    pub n_subchannels: usize,
}

impl LinkBudget {
    pub fn new(
        p_tx_per_subcarrier_w: f64,
        channel_gain: f64,
        c_th_bps: f64,
        bandwidth_hz: f64,
        n_subchannels: usize,
    ) -> Result<Self> {
        let all_pos = [p_tx_per_subcarrier_w, channel_gain, c_th_bps, bandwidth_hz]
            .iter()
            .all(|x| x.is_finite() && *x > 0.0);
        if !all_pos || n_subchannels == 0 {
            return Err(Error::invalid("link budget terms must all be positive"));
        }
        Ok(LinkBudget {
            p_tx_per_subcarrier_w,
            channel_gain,
            c_th_bps,
            bandwidth_hz,
            n_subchannels,
        })
    }

    /// Received signal power per sub-channel, `P_tx H`.
    pub fn rx_power_w(&self) -> f64 {
        self.p_tx_per_subcarrier_w * self.channel_gain
    }

    pub fn subchannel_bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz / self.n_subchannels as f64
    }
}

/// Noise power over one sub-channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_n_sq: f64,
}

impl NoiseModel {
    pub fn new(sigma_n_sq: f64) -> Result<Self> {
        if !(sigma_n_sq.is_finite() && sigma_n_sq > 0.0) {
            return Err(Error::invalid("noise power must be positive"));
        }
        Ok(NoiseModel { sigma_n_sq })
    }
}

/// Capacity in bit/s with `interference[f]` watts on each usable sub-channel.
pub fn capacity(link: &LinkBudget, noise: &NoiseModel, interference: &[f64]) -> Result<f64> {
    if let Some(i) = interference.iter().find(|i| !(**i >= 0.0)) {
        return Err(Error::invalid(format!("interference power {i} is negative")));
    }
    let s = link.rx_power_w();
    let bits: f64 = interference
        .iter()
        .map(|i| (s / (noise.sigma_n_sq + i)).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2;
    Ok(link.subchannel_bandwidth_hz() * bits)
}

/// Chi below which the link is in outage.
pub fn outage_threshold(link: &LinkBudget) -> f64 {
    (std::f64::consts::LN_2 * link.c_th_bps * link.n_subchannels as f64
        / (link.bandwidth_hz * link.rx_power_w()))
    .ln()
}

/// `P(chi < t)` under `model`.
pub fn outage_probability(model: &GmmParams, t: f64) -> f64 {
    model.cdf(t)
}

/// Fraction of samples strictly below `t`.
pub fn empirical_outage(samples: &[f64], t: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("empty chi batch"));
    }
    Ok(samples.iter().filter(|&&x| x < t).count() as f64 / samples.len() as f64)
}

/// Index of the smallest value; ties go to the lowest index.
pub fn argmin_outage(outages: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &p) in outages.iter().enumerate() {
        match best {
            Some((_, b)) if p >= b => {}
            _ => best = Some((i, p)),
        }
    }
    best.map(|(i, _)| i)
}

/// Outage probability of every channel at `location`, one link per channel.
pub fn channel_outages(rem: &RemStore, location: usize, links: &[LinkBudget]) -> Result<Vec<f64>> {
    links
        .iter()
        .enumerate()
        .map(|(c, link)| {
            let entry = rem.require(location, c)?;
            Ok(outage_probability(&entry.model, outage_threshold(link)))
        })
        .collect()
}

/// Channel with the lowest outage probability at `location`.
pub fn select_channel(rem: &RemStore, location: usize, links: &[LinkBudget]) -> Result<usize> {
    let outages = channel_outages(rem, location, links)?;
    argmin_outage(&outages).ok_or_else(|| Error::invalid("no channels to choose from"))
}
