//! The two learning rules: the incremental local update with a capped
//! sample weight, and the weighted federated merge of local models.
//!
//! Components correspond by rank (models are kept sorted by mean). The shared
//! sigma is averaged as a standard deviation. Outputs are re-sorted, though
//! averaging rank-aligned sorted means cannot reorder them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{sort_components, GmmParams, RawMixture};
use crate::rem::RemEntry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearningConfig {
    /// Cap multiplier: old models never weigh more than `k` captures.
    pub k: u64,
    /// Chi samples per capture.
    pub n_s: u64,
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n_s == 0 {
            return Err(Error::invalid("learning needs k >= 1 and N_s >= 1"));
        }
        Ok(())
    }
}

/// Effective weight of the stored model, `min(n_r, k * n_s)`.
pub fn n_th(n_r: u64, k: u64, n_s: u64) -> u64 {
    n_r.min(k.saturating_mul(n_s))
}

/// Folds a freshly fitted `temporal` model into `old`. With no previous entry
/// the temporal model is taken as is.
pub fn local_update(
    old: Option<&RemEntry>,
    temporal: &GmmParams,
    cfg: &LearningConfig,
) -> Result<RemEntry> {
    cfg.validate()?;
    let Some(old) = old else {
        return Ok(RemEntry {
            model: temporal.clone(),
            n_r: cfg.n_s,
        });
    };
    let w_old = n_th(old.n_r, cfg.k, cfg.n_s);
    let model = weighted_average(&[(&old.model, w_old), (temporal, cfg.n_s)])?;
    Ok(RemEntry {
        model,
        n_r: old.n_r + cfg.n_s,
    })
}

/// FedAvg of local models weighted by their `N_th`.
pub fn fed_avg_merge(locals: &[(GmmParams, u64)]) -> Result<GmmParams> {
    let refs: Vec<(&GmmParams, u64)> = locals.iter().map(|(m, w)| (m, *w)).collect();
    weighted_average(&refs)
}

fn weighted_average(items: &[(&GmmParams, u64)]) -> Result<GmmParams> {
    let (first, _) = items
        .first()
        .ok_or_else(|| Error::invalid("nothing to average"))?;
    let j = first.n_components();
    if let Some((m, _)) = items.iter().find(|(m, _)| m.n_components() != j) {
        return Err(Error::invalid(format!(
            "component count mismatch: {} vs {j}",
            m.n_components()
        )));
    }
    let total: u128 = items.iter().map(|&(_, w)| w as u128).sum();
    if total == 0 {
        return Err(Error::invalid("all averaging weights are zero"));
    }
    let total = total as f64;
    let coef: Vec<f64> = items.iter().map(|&(_, w)| w as f64 / total).collect();

    let avg = |get: &dyn Fn(&GmmParams) -> f64| {
        let vals: Vec<f64> = items.iter().map(|(m, _)| get(m)).collect();
        let (lo, hi) = vals
            .iter()
            .zip(&coef)
            .filter(|&(_, &c)| c > 0.0)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| {
                (lo.min(v), hi.max(v))
            });
        let s = neumaier_sum(vals.iter().zip(&coef).map(|(v, c)| v * c));
        s.clamp(lo, hi)
    };

    let means = (0..j).map(|i| avg(&|m| m.means()[i])).collect();
    let weights = (0..j).map(|i| avg(&|m| m.weights()[i])).collect();
    let sigma = avg(&|m| m.sigma());
    sort_components(RawMixture {
        means,
        weights,
        sigma,
    })
}

/// Compensated summation, insensitive to term order up to the final rounding.
fn neumaier_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}
