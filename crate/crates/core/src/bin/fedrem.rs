use std::fs::File;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fedrem::error::{Error, Result};
use fedrem::harness::{
    build_baseline, capture_chi, channel_selection_table, run_experiment_with, Mode, RunSpec,
};
use fedrem::rem::RemStore;
use fedrem::scenario::ScenarioConfig;

#[derive(Parser)]
#[command(version, about = "Federated interference maps for platoon channel selection")]
struct Cli {
    /// Scenario JSON; the built-in default scenario when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "FEDREM_OUT", default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write chi sample batches as CSV, one file per (location, channel).
    Simulate {
        #[arg(long, default_value_t = 4096)]
        ns: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Only this location (default: all).
        #[arg(long)]
        location: Option<usize>,
        /// Only this channel (default: all).
        #[arg(long)]
        channel: Option<usize>,
    },
    /// Fit and save the baseline map.
    Baseline {
        /// Chi samples per (location, channel); scenario value by default.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a learning experiment and write report.json / report.csv.
    Run {
        #[arg(long, default_value = "global")]
        mode: Mode,
        #[arg(long, default_value_t = 1)]
        platoons: usize,
        #[arg(long, default_value_t = 4096)]
        ns: usize,
        #[arg(long, default_value_t = 5)]
        k: u64,
        #[arg(long, default_value_t = 15)]
        laps: usize,
        /// A count (`10` means seeds 0..=9) or a comma-separated list.
        #[arg(long, default_value = "20")]
        seeds: String,
        /// Saved baseline map; built (and saved) when omitted.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Also save every seed's final map and stand-alone fits.
        #[arg(long)]
        save_maps: bool,
    },
    /// Channel selection table from saved maps.
    Select {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        global: PathBuf,
        #[arg(long)]
        saim: PathBuf,
    },
    /// Dump a saved map as CSV to stdout.
    Inspect { map: PathBuf },
    /// Print the scenario (default or `--scenario`) as JSON.
    Scenario,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = |_| Error::InvalidArgument(format!("bad seed list {s:?}"));
    if s.contains(',') {
        s.split(',').map(|p| p.trim().parse().map_err(bad)).collect()
    } else {
        Ok((0..s.trim().parse::<u64>().map_err(bad)?).collect())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.into(),
            source: e,
        })?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    let scenario = match &cli.scenario {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    let out = cli.out;
    match cli.cmd {
        Cmd::Simulate {
            ns,
            seed,
            location,
            channel,
        } => {
            let locs: Vec<usize> = location.map_or((0..scenario.n_locations()).collect(), |l| vec![l]);
            let chans: Vec<usize> = channel.map_or((0..scenario.n_channels()).collect(), |c| vec![c]);
            for &l in &locs {
                for &c in &chans {
                    let s = fedrem::rng::derive_seed(seed, &[l as u64, c as u64]);
                    let chi = capture_chi(&scenario, l, c, ns, s)?;
                    chi.write_csv(create(&out.join(format!("chi/loc{l:02}_ch{c}.csv")))?)?;
                }
            }
            eprintln!("wrote {} batches to {}", locs.len() * chans.len(), out.join("chi").display());
        }
        Cmd::Baseline { samples, seed } => {
            let n = samples.unwrap_or(scenario.baseline.n_samples);
            let store = build_baseline(&scenario, n, seed.unwrap_or(scenario.baseline.seed))?;
            let path = out.join("baseline.json");
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            store.save(&path)?;
            eprintln!("wrote {}", path.display());
        }
        Cmd::Run {
            mode,
            platoons,
            ns,
            k,
            laps,
            seeds,
            baseline,
            save_maps,
        } => {
            let seeds = parse_seeds(&seeds)?;
            let spec = RunSpec {
                mode,
                platoons,
                n_s: ns,
                k,
                laps,
            };
            spec.validate()?;
            let base = match baseline {
                Some(p) => RemStore::load(p)?,
                None => {
                    let b = build_baseline(&scenario, scenario.baseline.n_samples, scenario.baseline.seed)?;
                    std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                        path: out.clone(),
                        source: e,
                    })?;
                    b.save(out.join("baseline.json"))?;
                    b
                }
            };
            let maps = out.join("maps");
            let report = run_experiment_with(&scenario, &base, &[spec], &seeds, |spec, seed, run| {
                if save_maps {
                    std::fs::create_dir_all(&maps).map_err(|e| Error::Io {
                        path: maps.clone(),
                        source: e,
                    })?;
                    run.final_store
                        .save(maps.join(format!("{}_seed{seed}.json", spec.mode)))?;
                    run.final_saim.save(maps.join(format!("saim_seed{seed}.json")))?;
                }
                eprintln!("seed {seed}: final rmse {:e}", run.rmse.last().unwrap_or(&f64::NAN));
                Ok(())
            })?;
            report.save(&out)?;
            eprintln!("wrote {}", out.join("report.json").display());
        }
        Cmd::Select {
            baseline,
            global,
            saim,
        } => {
            let table = channel_selection_table(
                &scenario,
                &RemStore::load(baseline)?,
                &RemStore::load(global)?,
                &RemStore::load(saim)?,
            )?;
            table.write_csv(create(&out.join("selection.csv"))?)?;
            table.write_csv(io::stdout().lock())?;
            eprintln!(
                "matches vs baseline: global {}/{n}, saim {}/{n}",
                table.global_matches,
                table.saim_matches,
                n = table.rows.len()
            );
        }
        Cmd::Inspect { map } => RemStore::load(map)?.write_csv(io::stdout().lock())?,
        Cmd::Scenario => println!("{}", scenario.to_json()),
    }
    Ok(())
}
