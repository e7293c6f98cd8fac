//! One-dimensional Gaussian mixtures whose components share a single standard
//! deviation.
//!
//! A [`GmmParams`] always holds its components ordered by ascending mean, so
//! two models with the same `J` can be combined component-by-component by
//! rank. Fitting is plain EM with k-means++ seeding and a few restarts; model
//! order can be picked with [`select_j`] from an AIC plateau.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Mixture parameters in arbitrary component order, as they come out of a
/// fitting routine or a hand-built test case.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMixture {
    pub means: Vec<f64>,
    pub weights: Vec<f64>,
    pub sigma: f64,
}

impl RawMixture {
    pub fn pdf(&self, x: f64) -> f64 {
        mixture_pdf(&self.means, &self.weights, self.sigma, x)
    }
}

fn mixture_pdf(means: &[f64], weights: &[f64], sigma: f64, x: f64) -> f64 {
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    means
        .iter()
        .zip(weights)
        .map(|(&m, &w)| {
            let z = (x - m) / sigma;
            w * norm * (-0.5 * z * z).exp()
        })
        .sum()
}

fn validate(means: &[f64], weights: &[f64], sigma: f64) -> Result<()> {
    if means.is_empty() {
        return Err(Error::invalid("mixture needs at least one component"));
    }
    if means.len() != weights.len() {
        return Err(Error::invalid(format!(
            "{} means but {} weights",
            means.len(),
            weights.len()
        )));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("shared sigma must be positive, got {sigma}")));
    }
    if let Some(m) = means.iter().find(|m| !m.is_finite()) {
        return Err(Error::invalid(format!("non-finite component mean {m}")));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::invalid(format!("invalid component weight {w}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::invalid(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// A validated shared-sigma mixture with components sorted by mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GmmParamsRepr", into = "GmmParamsRepr")]
pub struct GmmParams {
    means: Vec<f64>,
    weights: Vec<f64>,
    sigma: f64,
}

/// Wire form: `{"J": .., "sigma": .., "means": [..], "weights": [..]}`.
#[derive(Serialize, Deserialize)]
struct GmmParamsRepr {
    #[serde(rename = "J")]
    j: usize,
    sigma: f64,
    means: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<GmmParamsRepr> for GmmParams {
    type Error = Error;

    fn try_from(r: GmmParamsRepr) -> Result<Self> {
        if r.j != r.means.len() {
            return Err(Error::invalid(format!(
                "J = {} but {} means given",
                r.j,
                r.means.len()
            )));
        }
        GmmParams::new(r.means, r.weights, r.sigma)
    }
}

impl From<GmmParams> for GmmParamsRepr {
    fn from(p: GmmParams) -> Self {
        GmmParamsRepr {
            j: p.means.len(),
            sigma: p.sigma,
            means: p.means,
            weights: p.weights,
        }
    }
}

/// Orders components by ascending mean. Ties keep their original relative
/// order.
pub fn sort_components(raw: RawMixture) -> Result<GmmParams> {
    validate(&raw.means, &raw.weights, raw.sigma)?;
    let mut order: Vec<usize> = (0..raw.means.len()).collect();
    order.sort_by(|&a, &b| raw.means[a].total_cmp(&raw.means[b]));
    Ok(GmmParams {
        means: order.iter().map(|&i| raw.means[i]).collect(),
        weights: order.iter().map(|&i| raw.weights[i]).collect(),
        sigma: raw.sigma,
    })
}

impl GmmParams {
    /// Validates and sorts.
    pub fn new(means: Vec<f64>, weights: Vec<f64>, sigma: f64) -> Result<Self> {
        sort_components(RawMixture {
            means,
            weights,
            sigma,
        })
    }

    /// Re-checks the invariants. Always `Ok` for values built through the
    /// public constructors.
    pub fn validate(&self) -> Result<()> {
        validate(&self.means, &self.weights, self.sigma)?;
        if self.means.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("component means are not sorted"));
        }
        Ok(())
    }

    pub fn n_components(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn pdf(&self, x: f64) -> f64 {
        mixture_pdf(&self.means, &self.weights, self.sigma, x)
    }

    /// `P(X <= t)`; equal to `P(X < t)` since the mixture is continuous.
    pub fn cdf(&self, t: f64) -> f64 {
        let c: f64 = self
            .means
            .iter()
            .zip(&self.weights)
            .map(|(&m, &w)| w * std_normal_cdf((t - m) / self.sigma))
            .sum();
        c.clamp(0.0, 1.0)
    }

    /// Log-density at `x`, evaluated with log-sum-exp.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let inv = 1.0 / self.sigma;
        let lognorm = -self.sigma.ln() - LN_SQRT_2PI;
        let mut best = f64::NEG_INFINITY;
        for (&m, &w) in self.means.iter().zip(&self.weights) {
            let z = (x - m) * inv;
            best = best.max(w.ln() - 0.5 * z * z);
        }
        if best == f64::NEG_INFINITY {
            return best;
        }
        let s: f64 = self
            .means
            .iter()
            .zip(&self.weights)
            .map(|(&m, &w)| {
                let z = (x - m) * inv;
                (w.ln() - 0.5 * z * z - best).exp()
            })
            .sum();
        best + s.ln() + lognorm
    }

    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        samples.iter().map(|&x| self.ln_pdf(x)).sum()
    }

    /// Number of free parameters: `J` means, `J - 1` weights and one shared
    /// variance.
    pub fn n_free_params(&self) -> usize {
        2 * self.n_components()
    }

    pub fn aic(&self, samples: &[f64]) -> f64 {
        aic_from(self.log_likelihood(samples), self.n_components())
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        self.sample_with(&mut rng, n)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        let mut cumulative = Vec::with_capacity(self.weights.len());
        let mut acc = 0.0;
        for &w in &self.weights {
            acc += w;
            cumulative.push(acc);
        }
        (0..n)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * acc;
                let j = cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(self.weights.len() - 1);
                let z: f64 = rng.sample(StandardNormal);
                self.means[j] + self.sigma * z
            })
            .collect()
    }
}

/// `2p - 2 ln L` with `p = 2J`.
pub fn aic_from(log_likelihood: f64, n_components: usize) -> f64 {
    2.0 * (2 * n_components) as f64 - 2.0 * log_likelihood
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmOptions {
    pub max_iter: usize,
    /// Stop once the relative log-likelihood change drops below this.
    pub tol: f64,
    pub restarts: usize,
    /// Iterations every restart runs before all but the best are dropped.
    pub burn_in: usize,
    /// Lower bound on the shared sigma, as a fraction of the data range.
    pub sigma_floor_rel: f64,
    pub seed: u64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iter: 200,
            tol: 1e-6,
            restarts: 3,
            burn_in: 10,
            sigma_floor_rel: 1e-6,
            seed: 0,
        }
    }
}

impl EmOptions {
    pub fn with_seed(&self, seed: u64) -> Self {
        EmOptions {
            seed,
            ..self.clone()
        }
    }
}

/// Result of one EM run, kept for inspection and tests.
#[derive(Debug, Clone)]
pub struct EmTrace {
    pub params: GmmParams,
    pub log_likelihood: f64,
    /// Log-likelihood of every parameter set visited, in order.
    pub history: Vec<f64>,
    pub converged: bool,
    /// Which restart produced `params`.
    pub restart: usize,
}

const DEAD_WEIGHT: f64 = 1e-6;

/// Working state on centered data.
struct EmState {
    means: Vec<f64>,
    weights: Vec<f64>,
    sigma: f64,
}

struct EStep {
    ll: f64,
    n: Vec<f64>,
    s: Vec<f64>,
    q: Vec<f64>,
    worst_sample: usize,
}

const BLOCK: usize = 256;

/// `exp(x)` for `x <= 0`, branch-free so the block loops vectorise.
/// Relative error stays around 1e-15; arguments below -708 flush to zero.
#[inline(always)]
fn exp_nonpos(x: f64) -> f64 {
    const LOG2E: f64 = std::f64::consts::LOG2_E;
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const ROUND: f64 = 6_755_399_441_055_744.0;
    let x = x.max(-708.0);
    let shifted = x * LOG2E + ROUND;
    let n = shifted - ROUND;
    let r = x - n * LN2_HI - n * LN2_LO;
    let mut p = 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    // The low mantissa bits of `shifted` hold `n` as an integer.
    let scale = f64::from_bits(shifted.to_bits().wrapping_add(1023) << 52);
    p * scale
}

/// `ln(x)` for finite `x >= 1`, branch-free.
#[inline(always)]
fn ln_ge1(x: f64) -> f64 {
    const LN2: f64 = std::f64::consts::LN_2;
    let bits = x.to_bits();
    let e = ((bits >> 52) & 0x7ff) as i64 - 1023;
    let m = f64::from_bits((bits & 0x000f_ffff_ffff_ffff) | 0x3ff0_0000_0000_0000);
    let high = if m > std::f64::consts::SQRT_2 { 1.0 } else { 0.0 };
    let m = m * (1.0 - 0.5 * high);
    let e = e as f64 + high;
    let s = (m - 1.0) / (m + 1.0);
    let s2 = s * s;
    let mut p = 1.0 / 19.0;
    p = p * s2 + 1.0 / 17.0;
    p = p * s2 + 1.0 / 15.0;
    p = p * s2 + 1.0 / 13.0;
    p = p * s2 + 1.0 / 11.0;
    p = p * s2 + 1.0 / 9.0;
    p = p * s2 + 1.0 / 7.0;
    p = p * s2 + 1.0 / 5.0;
    p = p * s2 + 1.0 / 3.0;
    p = p * s2 + 1.0;
    2.0 * s * p + e * LN2
}

/// Returns `(sum r, sum r*x, sum r*x^2)` with four interleaved accumulators.
#[inline(always)]
fn moments(r: &[f64], xs: &[f64]) -> (f64, f64, f64) {
    let mut n = [0.0; 4];
    let mut s = [0.0; 4];
    let mut q = [0.0; 4];
    let rc = r.chunks_exact(4);
    let xc = xs.chunks_exact(4);
    let (rr, xr) = (rc.remainder(), xc.remainder());
    for (rb, xb) in rc.zip(xc) {
        for l in 0..4 {
            let rx = rb[l] * xb[l];
            n[l] += rb[l];
            s[l] += rx;
            q[l] += rx * xb[l];
        }
    }
    for (&r, &x) in rr.iter().zip(xr) {
        n[0] += r;
        s[0] += r * x;
        q[0] += r * x * x;
    }
    let fold = |a: [f64; 4]| (a[0] + a[1]) + (a[2] + a[3]);
    (fold(n), fold(s), fold(q))
}

/// Scratch buffers for the blocked E-step.
struct Scratch {
    a: Vec<f64>,
    m: Vec<f64>,
    inv: Vec<f64>,
}

impl Scratch {
    fn new(j: usize) -> Self {
        Scratch {
            a: vec![0.0; j * BLOCK],
            m: vec![0.0; BLOCK],
            inv: vec![0.0; BLOCK],
        }
    }
}

fn e_step(y: &[f64], st: &EmState, scratch: &mut Scratch) -> EStep {
    let j = st.means.len();
    let c = 0.5 / (st.sigma * st.sigma);
    let lognorm = -st.sigma.ln() - LN_SQRT_2PI;
    let lw: Vec<f64> = st
        .weights
        .iter()
        .map(|&w| if w > 0.0 { w.ln() } else { -1e300 })
        .collect();
    let mut out = EStep {
        ll: 0.0,
        n: vec![0.0; j],
        s: vec![0.0; j],
        q: vec![0.0; j],
        worst_sample: 0,
    };
    let mut worst = f64::INFINITY;
    for (bi, xs) in y.chunks(BLOCK).enumerate() {
        let len = xs.len();
        let m = &mut scratch.m[..len];
        m.fill(f64::NEG_INFINITY);
        for k in 0..j {
            let (mu, l) = (st.means[k], lw[k]);
            let a = &mut scratch.a[k * BLOCK..k * BLOCK + len];
            for ((av, &x), mv) in a.iter_mut().zip(xs).zip(m.iter_mut()) {
                let d = x - mu;
                *av = l - d * d * c;
                *mv = mv.max(*av);
            }
        }
        let inv = &mut scratch.inv[..len];
        inv.fill(0.0);
        for k in 0..j {
            let a = &mut scratch.a[k * BLOCK..k * BLOCK + len];
            for ((av, &mv), t) in a.iter_mut().zip(m.iter()).zip(inv.iter_mut()) {
                *av = exp_nonpos(*av - mv);
                *t += *av;
            }
        }
        for (i, (t, &mv)) in inv.iter_mut().zip(m.iter()).enumerate() {
            let lp = mv + ln_ge1(*t);
            if lp < worst {
                worst = lp;
                out.worst_sample = bi * BLOCK + i;
            }
            out.ll += lp;
            *t = 1.0 / *t;
        }
        for k in 0..j {
            let a = &mut scratch.a[k * BLOCK..k * BLOCK + len];
            for (av, &iv) in a.iter_mut().zip(inv.iter()) {
                *av *= iv;
            }
            let (n, s, q) = moments(a, xs);
            out.n[k] += n;
            out.s[k] += s;
            out.q[k] += q;
        }
    }
    out.ll += lognorm * y.len() as f64;
    out
}

fn m_step(stats: &EStep, prev: &EmState, n_samples: usize, sigma_floor: f64) -> EmState {
    let nf = n_samples as f64;
    let mut means = prev.means.clone();
    let mut weights = Vec::with_capacity(means.len());
    let mut ss = 0.0;
    for k in 0..means.len() {
        let nk = stats.n[k];
        weights.push(nk / nf);
        if nk > 0.0 {
            means[k] = stats.s[k] / nk;
            ss += (stats.q[k] - stats.s[k] * stats.s[k] / nk).max(0.0);
        }
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let sigma = (ss / nf).sqrt().max(sigma_floor);
    EmState {
        means,
        weights,
        sigma,
    }
}

fn log_likelihood_of(y: &[f64], st: &EmState, scratch: &mut Scratch) -> f64 {
    e_step(y, st, scratch).ll
}

fn kmeans_pp_init<R: Rng>(y: &[f64], j: usize, rng: &mut R, sigma_floor: f64) -> EmState {
    let n = y.len();
    let mut centers = Vec::with_capacity(j);
    centers.push(y[rng.random_range(0..n)]);
    let mut d2: Vec<f64> = y.iter().map(|&x| (x - centers[0]).powi(2)).collect();
    while centers.len() < j {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    idx = i;
                    break;
                }
                u -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = y[pick];
        centers.push(c);
        for (d, &x) in d2.iter_mut().zip(y) {
            *d = d.min((x - c).powi(2));
        }
    }
    let pooled = d2.iter().sum::<f64>() / n as f64;
    EmState {
        means: centers,
        weights: vec![1.0 / j as f64; j],
        sigma: pooled.sqrt().max(sigma_floor),
    }
}

struct RunContext<'a> {
    y: &'a [f64],
    tol: f64,
    sigma_floor: f64,
}

struct EmRun {
    state: EmState,
    /// Log-likelihood of each visited state; the last entry belongs to
    /// `state` once `finish` has run.
    history: Vec<f64>,
    converged: bool,
    restart: usize,
}

impl EmRun {
    fn new(state: EmState, restart: usize) -> Self {
        EmRun {
            state,
            history: Vec::new(),
            converged: false,
            restart,
        }
    }

    fn current_ll(&self) -> f64 {
        self.history.last().copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// Runs EM until `total_iters` E-steps have been taken or the relative
    /// log-likelihood change drops below tolerance.
    fn advance(&mut self, ctx: &RunContext<'_>, total_iters: usize, scratch: &mut Scratch) {
        let n = ctx.y.len();
        while !self.converged && self.history.len() < total_iters {
            let stats = e_step(ctx.y, &self.state, scratch);
            let ll = stats.ll;
            if let Some(&prev) = self.history.last() {
                let prev: f64 = prev;
                if (ll - prev).abs() <= ctx.tol * prev.abs() {
                    self.history.push(ll);
                    self.converged = true;
                    return;
                }
            }
            self.history.push(ll);
            let mut next = m_step(&stats, &self.state, n, ctx.sigma_floor);
            if let Some(dead) = next.weights.iter().position(|&w| w < DEAD_WEIGHT) {
                // Move a starving component onto the worst-explained sample,
                // but only when that does not cost likelihood.
                let mut rescued = EmState {
                    means: next.means.clone(),
                    weights: next.weights.clone(),
                    sigma: next.sigma,
                };
                rescued.means[dead] = ctx.y[stats.worst_sample];
                if log_likelihood_of(ctx.y, &rescued, scratch)
                    >= log_likelihood_of(ctx.y, &next, scratch)
                {
                    next = rescued;
                }
            }
            self.state = next;
        }
    }

    /// Records the likelihood of the final state when the loop stopped on
    /// the iteration cap rather than on convergence.
    fn finish(&mut self, ctx: &RunContext<'_>, scratch: &mut Scratch) {
        if !self.converged {
            let ll = log_likelihood_of(ctx.y, &self.state, scratch);
            self.history.push(ll);
        }
    }
}

/// Fits a `J`-component shared-sigma mixture and returns the sorted model.
pub fn fit_em(samples: &[f64], j: usize, opts: &EmOptions) -> Result<GmmParams> {
    fit_em_traced(samples, j, opts).map(|t| t.params)
}

/// Like [`fit_em`] but also returns the log-likelihood trajectory of the
/// winning restart.
pub fn fit_em_traced(samples: &[f64], j: usize, opts: &EmOptions) -> Result<EmTrace> {
    if j == 0 {
        return Err(Error::invalid("J must be at least 1"));
    }
    if samples.len() < 2 * j {
        return Err(Error::invalid(format!(
            "{} samples are too few for J = {j} (need at least {})",
            samples.len(),
            2 * j
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }

    let n = samples.len();
    let shift = samples.iter().sum::<f64>() / n as f64;
    let y: Vec<f64> = samples.iter().map(|&x| x - shift).collect();
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let range = hi - lo;
    let sigma_floor = if range > 0.0 {
        opts.sigma_floor_rel * range
    } else {
        1e-9 * (1.0 + shift.abs())
    };

    let mut scratch = Scratch::new(j);
    let ctx = RunContext {
        y: &y,
        tol: opts.tol,
        sigma_floor,
    };
    let mut runs: Vec<EmRun> = (0..opts.restarts.max(1))
        .map(|restart| {
            let mut rng = rng_from_seed(derive_seed(opts.seed, &[restart as u64]));
            EmRun::new(kmeans_pp_init(&y, j, &mut rng, sigma_floor), restart)
        })
        .collect();
    // Every restart gets a short burn-in; only the most likely one is
    // iterated to convergence.
    let burn_in = opts.burn_in.min(opts.max_iter);
    for run in &mut runs {
        run.advance(&ctx, burn_in, &mut scratch);
    }
    let mut winner = runs
        .into_iter()
        .reduce(|a, b| if b.current_ll() > a.current_ll() { b } else { a })
        .expect("at least one restart runs");
    winner.advance(&ctx, opts.max_iter, &mut scratch);
    winner.finish(&ctx, &mut scratch);
    let EmRun {
        state: st,
        history,
        converged,
        restart,
    } = winner;

    let means = st.means.iter().map(|&m| m + shift).collect();
    let params = sort_components(RawMixture {
        means,
        weights: st.weights,
        sigma: st.sigma,
    })?;
    Ok(EmTrace {
        log_likelihood: *history.last().unwrap(),
        params,
        history,
        converged,
        restart,
    })
}

/// Outcome of AIC-based order selection.
#[derive(Debug, Clone)]
pub struct OrderSelection {
    pub j: usize,
    /// AIC for `J = 1..=aic.len()`.
    pub aic: Vec<f64>,
    pub models: Vec<GmmParams>,
}

/// Relative AIC improvement below which adding a component is not worth it.
pub const DEFAULT_AIC_PLATEAU: f64 = 0.005;

/// Fits `J = 1..=j_max` and returns the last `J` before the AIC curve
/// flattens: the smallest `J` for which going to `J + 1` improves AIC by less
/// than `plateau` relative to `|AIC(J)|`. Falls back to the AIC minimiser.
pub fn select_j(
    samples: &[f64],
    j_max: usize,
    plateau: f64,
    opts: &EmOptions,
) -> Result<OrderSelection> {
    if j_max == 0 {
        return Err(Error::invalid("j_max must be at least 1"));
    }
    let j_max = j_max.min(samples.len() / 2).max(1);
    let mut aic = Vec::with_capacity(j_max);
    let mut models = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        let p = fit_em(samples, j, opts)?;
        aic.push(p.aic(samples));
        models.push(p);
    }
    let plateau_at = (1..j_max).find(|&j| {
        let gain = aic[j - 1] - aic[j];
        gain < plateau * aic[j - 1].abs()
    });
    let j = plateau_at.unwrap_or_else(|| {
        aic.iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i + 1)
            .unwrap()
    });
    Ok(OrderSelection { j, aic, models })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_draws(n: usize, mean: f64, sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| mean + sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GmmParams::new(vec![], vec![], 1.0).is_err());
        assert!(GmmParams::new(vec![0.0], vec![1.0], 0.0).is_err());
        assert!(GmmParams::new(vec![0.0, 1.0], vec![0.5, 0.6], 1.0).is_err());
        assert!(GmmParams::new(vec![0.0, 1.0], vec![1.2, -0.2], 1.0).is_err());
        assert!(GmmParams::new(vec![0.0], vec![0.5, 0.5], 1.0).is_err());
    }

    #[test]
    fn standard_normal_log_density_at_mode() {
        let p = GmmParams::new(vec![0.0], vec![1.0], 1.0).unwrap();
        assert!((p.log_likelihood(&[0.0]) + 0.918_938_533_204_672_7).abs() < 1e-12);
        let l1 = p.log_likelihood(&[0.3]);
        assert!((p.log_likelihood(&[0.3, 0.3]) - 2.0 * l1).abs() < 1e-12);
    }

    #[test]
    fn aic_penalty() {
        assert_eq!(aic_from(0.0, 7), 28.0);
        for j in 1..10 {
            assert!(aic_from(-5.0, j + 1) > aic_from(-5.0, j));
        }
    }

    #[test]
    fn cdf_limits_and_known_values() {
        let p = GmmParams::new(vec![0.0], vec![1.0], 1.0).unwrap();
        assert!((p.cdf(1.96) - 0.975_002_104_851_780).abs() < 1e-9);
        assert_eq!(p.cdf(f64::INFINITY), 1.0);
        assert_eq!(p.cdf(f64::NEG_INFINITY), 0.0);
        let sym = GmmParams::new(vec![-2.5, 2.5], vec![0.5, 0.5], 0.7).unwrap();
        assert!((sym.cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sorting_ties_keep_original_order() {
        let raw = RawMixture {
            means: vec![1.0, 0.0, 1.0],
            weights: vec![0.2, 0.3, 0.5],
            sigma: 1.0,
        };
        let p = sort_components(raw).unwrap();
        assert_eq!(p.means(), &[0.0, 1.0, 1.0]);
        assert_eq!(p.weights(), &[0.3, 0.2, 0.5]);
    }

    #[test]
    fn em_rejects_too_few_samples() {
        let opts = EmOptions::default();
        assert!(fit_em(&[1.0, 2.0, 3.0], 2, &opts).is_err());
        assert!(fit_em(&[1.0, 2.0, 3.0], 0, &opts).is_err());
        assert!(fit_em(&[1.0, f64::NAN, 3.0, 4.0], 1, &opts).is_err());
    }

    #[test]
    fn em_survives_constant_data() {
        let p = fit_em(&[3.0; 20], 3, &EmOptions::default()).unwrap();
        assert!(p.sigma() > 0.0);
        assert!(p.means().iter().all(|m| (m - 3.0).abs() < 1e-9));
    }

    #[test]
    fn em_variance_floor_holds() {
        let mut data = vec![0.0; 50];
        data.extend(vec![1.0; 50]);
        let opts = EmOptions::default();
        let p = fit_em(&data, 2, &opts).unwrap();
        assert!(p.sigma() >= opts.sigma_floor_rel * 1.0 * (1.0 - 1e-12));
    }

    #[test]
    fn select_j_single_candidate() {
        let data = normal_draws(200, 0.0, 1.0, 3);
        let s = select_j(&data, 1, DEFAULT_AIC_PLATEAU, &EmOptions::default()).unwrap();
        assert_eq!(s.j, 1);
    }
}
