//! From IQ samples to samples of the aggregated interference statistic.
//!
//! A capture of `M` samples is cut into `N_s = M / N_f` back-to-back
//! segments. Each segment goes through an `N_f`-point DFT (rectangular
//! window) and bin `f` of segment `r` is assigned the power
//!
//! ```text
//! P[r][f] = |DFT(segment r)[f]|^2 / N_f^2
//! ```
//!
//! so the bins of a segment add up to its mean sample power. With white noise
//! of per-sample power `k_B T B` every bin then averages `k_B T B / N_f`, the
//! noise power of one sub-channel. The statistic itself is
//! `chi = ln(sum over usable f of 1 / P[r][f])`; measured bin power already
//! contains the noise, so nothing is added to it.

use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scenario::ChannelConfig;
use crate::synth::IqBatch;

/// Per-segment, per-bin powers, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerGrid {
    pub n_segments: usize,
    pub n_bins: usize,
    pub powers: Vec<f64>,
    pub location: usize,
    pub channel: usize,
}

impl PowerGrid {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.powers[r * self.n_bins..(r + 1) * self.n_bins]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.powers.chunks_exact(self.n_bins)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["segment".to_string()];
        header.extend((0..self.n_bins).map(|f| format!("bin_{f}")));
        out.write_record(&header)?;
        for (r, row) in self.rows().enumerate() {
            let mut rec = vec![r.to_string()];
            rec.extend(row.iter().map(|p| format!("{p:e}")));
            out.write_record(&rec)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Samples of the aggregated interference statistic at one location and
/// channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiBatch {
    pub samples: Vec<f64>,
    pub location: usize,
    pub channel: usize,
}

impl ChiBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["segment", "location", "channel", "chi"])?;
        for (r, x) in self.samples.iter().enumerate() {
            out.write_record([
                r.to_string(),
                self.location.to_string(),
                self.channel.to_string(),
                format!("{x:?}"),
            ])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

pub fn segment_power_grid(iq: &IqBatch, n_subchannels: usize) -> Result<PowerGrid> {
    let n_f = n_subchannels;
    let m = iq.samples.len();
    if n_f == 0 || m == 0 || !m.is_multiple_of(n_f) {
        return Err(Error::invalid(format!(
            "{m} IQ samples cannot be split into segments of {n_f}"
        )));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_f);
    let mut buf: Vec<Complex64> = iq.samples.clone();
    fft.process(&mut buf);
    let scale = 1.0 / (n_f * n_f) as f64;
    Ok(PowerGrid {
        n_segments: m / n_f,
        n_bins: n_f,
        powers: buf.iter().map(|x| x.norm_sqr() * scale).collect(),
        location: iq.location,
        channel: iq.channel,
    })
}

/// `ln(sum over usable bins of 1 / P)` for every segment.
pub fn aggregate_chi(grid: &PowerGrid, usable: &[usize]) -> Result<ChiBatch> {
    if usable.is_empty() {
        return Err(Error::invalid("usable sub-channel set is empty"));
    }
    if let Some(&f) = usable.iter().find(|&&f| f >= grid.n_bins) {
        return Err(Error::invalid(format!(
            "usable sub-channel {f} outside {} bins",
            grid.n_bins
        )));
    }
    let mut samples = Vec::with_capacity(grid.n_segments);
    for (r, row) in grid.rows().enumerate() {
        let mut acc = 0.0;
        for &f in usable {
            let p = row[f];
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::invalid(format!(
                    "segment {r}, sub-channel {f}: power {p} is not positive"
                )));
            }
            acc += 1.0 / p;
        }
        samples.push(acc.ln());
    }
    Ok(ChiBatch {
        samples,
        location: grid.location,
        channel: grid.channel,
    })
}

/// Segmentation, DFT and aggregation in one go.
pub fn chi_from_iq(iq: &IqBatch, cfg: &ChannelConfig) -> Result<ChiBatch> {
    let grid = segment_power_grid(iq, cfg.n_subchannels)?;
    aggregate_chi(&grid, &cfg.usable_subchannels)
}
