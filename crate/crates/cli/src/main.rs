use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use nslcc::assign::Method;
use nslcc::config::ExperimentConfig;
use nslcc::error::{Error, Result};
use nslcc::experiments::{cmd_demo, cmd_optimize, cmd_simulate, cmd_tables, entries_csv, optimize_csv, simulate_csv};
use nslcc::report::params_hash;
use nslcc::sim::TrialMode;
use nslcc::subsets::IndexSet;

#[derive(Parser, Debug)]
#[command(name = "nslcc", version, about = "Coded-computing assignment search and Byzantine-decoding experiments")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Mis,
    Loc,
    JointBf,
    JointGreedy,
}

impl From<Mode> for Method {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Mis => Method::BfMis,
            Mode::Loc => Method::BfLoc,
            Mode::JointBf => Method::BfJoint,
            Mode::JointGreedy => Method::Greedy,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SimMode {
    /// Decode, correct and reconstruct.
    Full,
    /// Localization only.
    Localize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search for index assignments; writes optimize.csv.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Methods to run (default: the config's list).
        #[arg(long, value_enum, value_delimiter = ',')]
        mode: Vec<Mode>,
        /// Weights of the leakage term (default: the config's list).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        w: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte-Carlo rounds for one assignment; writes simulate.csv and entries.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluation indices placed on the unreliable workers, e.g. "4 11 12 ...".
        #[arg(long = "q-set")]
        q_set: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "full")]
        mode: SimMode,
    },
    /// Reproduction tables table1..4.csv and fig2.csv.
    Tables {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Short end-to-end walk-through (built-in reference parameters by default).
    Demo {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(path: &Path, seed: Option<u64>, trials: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    if let Some(t) = trials {
        cfg.run.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| cfg.run.output_dir.clone())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Optimize {
            config,
            out,
            mode,
            w,
            seed,
        } => {
            let cfg = load(&config, seed, None)?;
            let methods: Vec<Method> = if mode.is_empty() {
                cfg.search.methods.clone()
            } else {
                mode.into_iter().map(Method::from).collect()
            };
            let ws = w.unwrap_or_else(|| cfg.search.w.clone());
            let rows = cmd_optimize(&cfg, &methods, &ws)?;
            let path = out_dir(&cfg, out).join("optimize.csv");
            optimize_csv(&rows).write(&path, &params_hash(&cfg))?;
            for r in &rows {
                if let Some(res) = &r.result {
                    println!(
                        "{:<8} w={:<5} sigma_p2={:<6e} set {{{}}}",
                        r.method.to_string(),
                        r.w.map_or("-".into(), |w| w.to_string()),
                        r.sigma_p2,
                        res.chosen_set
                    );
                }
            }
            println!("wrote {}", path.display());
        }
        Command::Simulate {
            config,
            out,
            q_set,
            trials,
            seed,
            mode,
        } => {
            let cfg = load(&config, seed, trials)?;
            let q: IndexSet = q_set.parse()?;
            let mode = match mode {
                SimMode::Full => TrialMode::Full,
                SimMode::Localize => TrialMode::LocalizeOnly,
            };
            let sims = cmd_simulate(&cfg, &q, cfg.run.trials, mode)?;
            let dir = out_dir(&cfg, out);
            let hash = params_hash(&cfg);
            simulate_csv(&sims).write(&dir.join("simulate.csv"), &hash)?;
            entries_csv(&sims).write(&dir.join("entries.csv"), &hash)?;
            for s in &sims {
                let sum = &s.summary;
                println!(
                    "sigma_p2={:e}: mislocalized {}/{} (rate {:.4} +- {:.4}), max relative error {}, undecodable {}",
                    s.sigma_p2,
                    sum.localization.failures,
                    sum.localization.trials,
                    sum.localization.rate(),
                    sum.localization.half_width(),
                    sum.max_rel_error.map_or("n/a".into(), |e| format!("{e:.3e}")),
                    sum.failed_trials
                );
            }
            println!("wrote {}", dir.display());
        }
        Command::Tables {
            config,
            out,
            trials,
            seed,
        } => {
            let cfg = load(&config, seed, trials)?;
            let tables = cmd_tables(&cfg, |stage| info!("{stage}"))?;
            for p in tables.write_all(&out_dir(&cfg, out), &params_hash(&cfg))? {
                println!("wrote {}", p.display());
            }
        }
        Command::Demo { config, trials, seed } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::table1(),
            };
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            print!("{}", cmd_demo(&cfg, trials)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
