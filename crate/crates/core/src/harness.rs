//! Experiment orchestration: baseline maps, the federated learning cycle,
//! multi-lap runs in the three modelling modes, RMSE curves and channel
//! selection tables.
//!
//! Everything is single-threaded and driven by explicit seeds, so the same
//! scenario and seed list always produce byte-identical reports.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cqa::{outage_probability, outage_threshold, select_channel, LinkBudget};
use crate::error::{Error, Result};
use crate::fl::{fed_avg_merge, local_update, n_th, LearningConfig};
use crate::gmm::{fit_em, select_j, EmOptions, GmmParams};
use crate::rem::{RemEntry, RemStore};
use crate::rng::derive_seed;
use crate::scenario::ScenarioConfig;
use crate::spectral::{aggregate_chi, ChiBatch};
use crate::synth::synthesize_power_grid;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Where the evaluated model comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Stand-alone modelling: only the current capture, no memory.
    Saim,
    /// Each platoon's own map, updated incrementally.
    Local,
    /// The federated global map.
    Global,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Saim => "saim",
            Mode::Local => "local",
            Mode::Global => "global",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "saim" => Ok(Mode::Saim),
            "local" => Ok(Mode::Local),
            "global" => Ok(Mode::Global),
            _ => Err(Error::invalid(format!("unknown mode {s:?}"))),
        }
    }
}

/// N_s chi samples at one location and channel, computed from a synthetic
/// capture of `n_s * N_f` IQ samples.
pub fn capture_chi(
    scenario: &ScenarioConfig,
    location: usize,
    channel: usize,
    n_s: usize,
    seed: u64,
) -> Result<ChiBatch> {
    let cfg = scenario
        .channels
        .get(channel)
        .ok_or_else(|| Error::NotFound(format!("channel {channel}")))?;
    let grid = synthesize_power_grid(scenario, location, channel, n_s * cfg.n_subchannels, seed)?;
    aggregate_chi(&grid, &cfg.usable_subchannels)
}

/// Outage thresholds of every channel, in channel order.
pub fn thresholds(scenario: &ScenarioConfig) -> Result<Vec<f64>> {
    links(scenario)?.iter().map(|l| Ok(outage_threshold(l))).collect()
}

pub fn links(scenario: &ScenarioConfig) -> Result<Vec<LinkBudget>> {
    (0..scenario.n_channels())
        .map(|c| scenario.link_budget(c))
        .collect()
}

/// Reference maps fitted on one large batch per (location, channel).
///
/// Uses `select_j` when `scenario.baseline.select_j_max` is set and
/// `scenario.gmm.components` otherwise.
pub fn build_baseline(scenario: &ScenarioConfig, n_large: usize, seed: u64) -> Result<RemStore> {
    let mut store = RemStore::baseline();
    for l in 0..scenario.n_locations() {
        for c in 0..scenario.n_channels() {
            let chi = capture_chi(scenario, l, c, n_large, derive_seed(seed, &[l as u64, c as u64]))?;
            let em = scenario
                .gmm
                .em
                .with_seed(derive_seed(seed, &[l as u64, c as u64, 1]));
            let model = match scenario.baseline.select_j_max {
                Some(j_max) => {
                    let sel = select_j(&chi.samples, j_max, scenario.baseline.aic_plateau, &em)?;
                    sel.models[sel.j - 1].clone()
                }
                None => fit_em(&chi.samples, scenario.gmm.components, &em)?,
            };
            store.put(
                l,
                c,
                RemEntry {
                    model,
                    n_r: n_large as u64,
                },
            )?;
        }
    }
    Ok(store)
}

/// What one cycle at one location produced.
#[derive(Debug, Clone)]
pub struct CycleRecord {
    pub location: usize,
    /// `temporal[u][c]`: platoon `u`'s fresh fit on channel `c`.
    pub temporal: Vec<Vec<GmmParams>>,
    /// `weights[c][u]`: the `N_th` platoon `u` contributed to the merge.
    pub weights: Vec<Vec<u64>>,
}

/// Seeds and model settings a cycle needs besides the maps.
#[derive(Debug, Clone)]
pub struct CycleInputs<'a> {
    pub learning: LearningConfig,
    pub components: usize,
    pub em: &'a EmOptions,
    /// One capture seed per platoon; the fit seeds derive from it.
    pub platoon_seeds: &'a [u64],
}

/// One federated cycle at `location`: distribute the global models, let
/// every platoon capture, fit and update its local map, then merge the local
/// models into the global map weighted by their capped counts.
pub fn run_fl_cycle(
    global: &mut RemStore,
    locals: &mut [RemStore],
    scenario: &ScenarioConfig,
    location: usize,
    inputs: &CycleInputs<'_>,
) -> Result<CycleRecord> {
    let record = run_local_cycle(Some(global), locals, scenario, location, inputs)?;
    let learning = inputs.learning;
    let mut weights = Vec::with_capacity(scenario.n_channels());
    for c in 0..scenario.n_channels() {
        let mut parts = Vec::with_capacity(locals.len());
        let mut absorbed = 0;
        for local in locals.iter() {
            let e = local.require(location, c)?;
            parts.push((e.model.clone(), n_th(e.n_r, learning.k, learning.n_s)));
            absorbed += e.n_r;
        }
        weights.push(parts.iter().map(|p| p.1).collect());
        let model = fed_avg_merge(&parts)?;
        global.put(
            location,
            c,
            RemEntry {
                model,
                n_r: absorbed,
            },
        )?;
    }
    Ok(CycleRecord { weights, ..record })
}

/// The local half of a cycle. With `distribute` set, each local entry first
/// takes the global model (keeping its own count) where one exists.
fn run_local_cycle(
    distribute: Option<&RemStore>,
    locals: &mut [RemStore],
    scenario: &ScenarioConfig,
    location: usize,
    inputs: &CycleInputs<'_>,
) -> Result<CycleRecord> {
    if locals.len() != inputs.platoon_seeds.len() {
        return Err(Error::invalid(format!(
            "{} platoons but {} seeds",
            locals.len(),
            inputs.platoon_seeds.len()
        )));
    }
    let learning = inputs.learning;
    let n_s = learning.n_s as usize;
    let mut temporal = Vec::with_capacity(locals.len());
    for (local, &seed) in locals.iter_mut().zip(inputs.platoon_seeds) {
        let mut fits = Vec::with_capacity(scenario.n_channels());
        for c in 0..scenario.n_channels() {
            if let Some(g) = distribute.and_then(|g| g.get(location, c)) {
                let n_r = local.get(location, c).map_or(0, |e| e.n_r);
                local.put(
                    location,
                    c,
                    RemEntry {
                        model: g.model.clone(),
                        n_r,
                    },
                )?;
            }
            let chi = capture_chi(scenario, location, c, n_s, derive_seed(seed, &[c as u64]))?;
            let em = inputs.em.with_seed(derive_seed(seed, &[c as u64, 1]));
            let fit = fit_em(&chi.samples, inputs.components, &em)?;
            let updated = local_update(local.get(location, c), &fit, &learning)?;
            local.put(location, c, updated)?;
            fits.push(fit);
        }
        temporal.push(fits);
    }
    Ok(CycleRecord {
        location,
        temporal,
        weights: Vec::new(),
    })
}

/// Per-pair outage probabilities of `store` and `baseline` at the given
/// per-channel thresholds, in (location, channel) order.
pub fn outage_pairs(
    store: &RemStore,
    baseline: &RemStore,
    thresholds: &[f64],
    n_locations: usize,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(n_locations * thresholds.len());
    for l in 0..n_locations {
        for (c, &t) in thresholds.iter().enumerate() {
            let est = outage_probability(&store.require(l, c)?.model, t);
            let reference = outage_probability(&baseline.require(l, c)?.model, t);
            out.push((est, reference));
        }
    }
    Ok(out)
}

/// Root mean squared outage-probability error over all pairs.
pub fn rmse(pairs: &[(f64, f64)]) -> f64 {
    let sq: f64 = pairs.iter().map(|(a, b)| (a - b) * (a - b)).sum();
    (sq / pairs.len() as f64).sqrt()
}

/// One configuration of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub mode: Mode,
    pub platoons: usize,
    pub n_s: usize,
    pub k: u64,
    pub laps: usize,
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        if self.platoons == 0 || self.laps == 0 {
            return Err(Error::invalid("need at least one platoon and one lap"));
        }
        if self.mode == Mode::Local && self.platoons != 1 {
            // Several independent local maps are just repeated U = 1 runs.
            return Err(Error::invalid("local mode runs a single platoon"));
        }
        LearningConfig {
            k: self.k,
            n_s: self.n_s as u64,
        }
        .validate()
    }
}

/// Outcome of one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    /// RMSE of the evaluated model after each lap.
    pub rmse: Vec<f64>,
    /// RMSE of the stand-alone fits made in each lap (platoon 0).
    pub saim_rmse: Vec<f64>,
    /// The evaluated map after the last lap: platoon 0's local map, the
    /// global map, or the last lap's stand-alone fits.
    pub final_store: RemStore,
    /// Stand-alone fits of platoon 0 from the last lap.
    pub final_saim: RemStore,
}

/// Runs `spec.laps` laps over every location with one seed.
pub fn run_seed(
    scenario: &ScenarioConfig,
    baseline: &RemStore,
    spec: &RunSpec,
    seed: u64,
) -> Result<SeedRun> {
    spec.validate()?;
    let learning = LearningConfig {
        k: spec.k,
        n_s: spec.n_s as u64,
    };
    let thresholds = thresholds(scenario)?;
    let n_loc = scenario.n_locations();
    let mut global = RemStore::global();
    let mut locals: Vec<RemStore> = (0..spec.platoons).map(RemStore::local).collect();
    let mut rmse_curve = Vec::with_capacity(spec.laps);
    let mut saim_curve = Vec::with_capacity(spec.laps);
    let mut saim = RemStore::local(0);
    for lap in 0..spec.laps {
        saim = RemStore::local(0);
        for l in 0..n_loc {
            let seeds: Vec<u64> = (0..spec.platoons)
                .map(|u| derive_seed(seed, &[lap as u64, l as u64, u as u64]))
                .collect();
            let inputs = CycleInputs {
                learning,
                components: scenario.gmm.components,
                em: &scenario.gmm.em,
                platoon_seeds: &seeds,
            };
            let record = match spec.mode {
                Mode::Global => run_fl_cycle(&mut global, &mut locals, scenario, l, &inputs)?,
                Mode::Local | Mode::Saim => {
                    run_local_cycle(None, &mut locals, scenario, l, &inputs)?
                }
            };
            for (c, model) in record.temporal[0].iter().enumerate() {
                saim.put(
                    l,
                    c,
                    RemEntry {
                        model: model.clone(),
                        n_r: learning.n_s,
                    },
                )?;
            }
        }
        let saim_err = rmse(&outage_pairs(&saim, baseline, &thresholds, n_loc)?);
        saim_curve.push(saim_err);
        rmse_curve.push(match spec.mode {
            Mode::Saim => saim_err,
            Mode::Local => rmse(&outage_pairs(&locals[0], baseline, &thresholds, n_loc)?),
            Mode::Global => rmse(&outage_pairs(&global, baseline, &thresholds, n_loc)?),
        });
    }
    let final_store = match spec.mode {
        Mode::Saim => saim.clone(),
        Mode::Local => locals.swap_remove(0),
        Mode::Global => global,
    };
    Ok(SeedRun {
        rmse: rmse_curve,
        saim_rmse: saim_curve,
        final_store,
        final_saim: saim,
    })
}

/// Per-seed and seed-averaged curves of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    #[serde(flatten)]
    pub spec: RunSpec,
    pub seeds: Vec<u64>,
    /// `rmse_per_seed[s][r]`: seed `s` after lap `r + 1`.
    pub rmse_per_seed: Vec<Vec<f64>>,
    pub rmse_mean: Vec<f64>,
    /// Stand-alone fits made along the way, for comparison.
    pub saim_rmse_mean: Vec<f64>,
}

impl ConfigResult {
    /// Mean of the seed-averaged curve over its last `tail` rounds.
    pub fn stabilized(&self, tail: usize) -> f64 {
        tail_mean(&self.rmse_mean, tail)
    }
}

pub fn tail_mean(curve: &[f64], tail: usize) -> f64 {
    let tail = tail.clamp(1, curve.len().max(1));
    let part = &curve[curve.len().saturating_sub(tail)..];
    part.iter().sum::<f64>() / part.len() as f64
}

fn column_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let len = rows.first().map_or(0, Vec::len);
    (0..len)
        .map(|r| rows.iter().map(|row| row[r]).sum::<f64>() / rows.len() as f64)
        .collect()
}

/// Facts about the run that do not depend on wall-clock or host.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub crate_version: String,
    pub n_locations: usize,
    pub n_channels: usize,
    pub components: usize,
    pub thresholds: Vec<f64>,
    pub baseline_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub meta: ReportMeta,
    pub configs: Vec<ConfigResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionTable>,
}

/// Runs every configuration over every seed.
pub fn run_experiment(
    scenario: &ScenarioConfig,
    baseline: &RemStore,
    sweep: &[RunSpec],
    seeds: &[u64],
) -> Result<ExperimentReport> {
    run_experiment_with(scenario, baseline, sweep, seeds, |_, _, _| Ok(()))
}

/// [`run_experiment`], handing every finished seed to `on_seed` (for
/// example to keep its final maps).
pub fn run_experiment_with(
    scenario: &ScenarioConfig,
    baseline: &RemStore,
    sweep: &[RunSpec],
    seeds: &[u64],
    mut on_seed: impl FnMut(&RunSpec, u64, &SeedRun) -> Result<()>,
) -> Result<ExperimentReport> {
    if seeds.is_empty() {
        return Err(Error::invalid("no seeds given"));
    }
    let mut configs = Vec::with_capacity(sweep.len());
    for spec in sweep {
        let mut per_seed = Vec::with_capacity(seeds.len());
        let mut saim = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let run = run_seed(scenario, baseline, spec, seed)?;
            on_seed(spec, seed, &run)?;
            per_seed.push(run.rmse);
            saim.push(run.saim_rmse);
        }
        configs.push(ConfigResult {
            spec: spec.clone(),
            seeds: seeds.to_vec(),
            rmse_mean: column_mean(&per_seed),
            saim_rmse_mean: column_mean(&saim),
            rmse_per_seed: per_seed,
        });
    }
    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        meta: report_meta(scenario, baseline)?,
        configs,
        selection: None,
    })
}

fn report_meta(scenario: &ScenarioConfig, baseline: &RemStore) -> Result<ReportMeta> {
    Ok(ReportMeta {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        n_locations: scenario.n_locations(),
        n_channels: scenario.n_channels(),
        components: scenario.gmm.components,
        thresholds: thresholds(scenario)?,
        baseline_samples: baseline.iter().next().map_or(0, |(_, e)| e.n_r as usize),
    })
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// One row per configuration and round.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "mode",
            "platoons",
            "n_s",
            "k",
            "round",
            "rmse_mean",
            "rmse_std",
            "saim_rmse_mean",
            "n_seeds",
        ])?;
        for cfg in &self.configs {
            for (r, &mean) in cfg.rmse_mean.iter().enumerate() {
                let n = cfg.rmse_per_seed.len() as f64;
                let var = cfg
                    .rmse_per_seed
                    .iter()
                    .map(|s| (s[r] - mean).powi(2))
                    .sum::<f64>()
                    / (n - 1.0).max(1.0);
                out.write_record([
                    cfg.spec.mode.to_string(),
                    cfg.spec.platoons.to_string(),
                    cfg.spec.n_s.to_string(),
                    cfg.spec.k.to_string(),
                    (r + 1).to_string(),
                    format!("{mean:?}"),
                    format!("{:?}", var.sqrt()),
                    format!("{:?}", cfg.saim_rmse_mean[r]),
                    cfg.rmse_per_seed.len().to_string(),
                ])?;
            }
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Writes `report.json` and `report.csv` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join("report.json");
        std::fs::write(&json, self.to_json() + "\n").map_err(|e| Error::io(&json, e))?;
        let csv_path = dir.join("report.csv");
        let f = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub location: usize,
    pub baseline: usize,
    pub global: usize,
    pub saim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTable {
    pub rows: Vec<SelectionRow>,
    pub global_matches: usize,
    pub saim_matches: usize,
}

/// Lowest-outage channel at every location under the baseline, the global
/// map and stand-alone fits, with match counts against the baseline.
pub fn channel_selection_table(
    scenario: &ScenarioConfig,
    baseline: &RemStore,
    global: &RemStore,
    saim: &RemStore,
) -> Result<SelectionTable> {
    let links = links(scenario)?;
    let mut rows = Vec::with_capacity(scenario.n_locations());
    for l in 0..scenario.n_locations() {
        rows.push(SelectionRow {
            location: l,
            baseline: select_channel(baseline, l, &links)?,
            global: select_channel(global, l, &links)?,
            saim: select_channel(saim, l, &links)?,
        });
    }
    Ok(SelectionTable {
        global_matches: rows.iter().filter(|r| r.global == r.baseline).count(),
        saim_matches: rows.iter().filter(|r| r.saim == r.baseline).count(),
        rows,
    })
}

impl SelectionTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["location", "baseline", "global", "saim"])?;
        for r in &self.rows {
            out.write_record([
                r.location.to_string(),
                r.baseline.to_string(),
                r.global.to_string(),
                r.saim.to_string(),
            ])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
