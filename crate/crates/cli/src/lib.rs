//! Command-line front end: dataset generation, training, evaluation,
//! gradient verification, recursion ablation and cross-validation.

pub mod commands;
pub mod config;
pub mod rundir;

use std::fmt;
use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use rjcma::autodiff::Fault;
use rjcma::data::Split;
use rjcma::metrics::Target;

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "rjcma", version, about = "Recursive joint cross-modal attention for valence/arousal regression")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; unset keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for data generation, initialization and shuffling.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Parent directory for run directories.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Target to train. ablate and cv run both unless this is given.
    #[arg(long, global = true, value_name = "valence|arousal")]
    pub target: Option<Target>,
    /// Number of recursions l.
    #[arg(long, global = true, value_name = "N")]
    pub iterations: Option<usize>,
    /// Override any config key, e.g. `--set train.lr_init=1e-3`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset: MMF1 feature files and manifest.json.
    Gen,
    /// Train one model on the train split and score the val split.
    Train {
        /// Dataset manifest; defaults to in-memory synthetic data.
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
    },
    /// Score a checkpoint on one split of a dataset.
    Eval {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
        #[arg(long, default_value = "val")]
        split: Split,
    },
    /// Compare every parameter gradient against central differences.
    Gradcheck {
        /// Corrupt one backward rule (negative control).
        #[arg(long, hide = true, value_name = "tanh|relu|matmul")]
        inject_fault: Option<Fault>,
    },
    /// Train once per recursion depth on the same fold, seed and data.
    Ablate {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4", value_name = "L,L,...")]
        l_values: Vec<usize>,
        /// Fold to train on (default: cv.ablation_fold).
        #[arg(long)]
        fold: Option<usize>,
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
    },
    /// k-fold cross-validation; fold 0 is the dataset's own val split.
    Cv {
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
        /// Number of folds (default: cv.n_folds).
        #[arg(long)]
        folds: Option<usize>,
    },
}

/// Bad flags, config keys or values. Exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

/// Inconsistent or unreadable inputs. Exit code 2.
#[derive(Debug)]
pub struct DataError(pub String);

/// A numerical check failed or training diverged. Exit code 3.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

macro_rules! message_error {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
        impl std::error::Error for $t {}
    )*};
}
message_error!(UsageError, DataError, NumericalFailure);

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Maps an error chain onto the documented exit codes.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<NumericalFailure>() {
            return EXIT_NUMERICAL;
        }
        if cause.is::<DataError>() {
            return EXIT_DATA;
        }
        if let Some(e) = cause.downcast_ref::<rjcma::Error>() {
            return match e {
                rjcma::Error::Config(_) => EXIT_USAGE,
                rjcma::Error::NonFinite { .. } | rjcma::Error::Diverged { .. } => EXIT_NUMERICAL,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_DATA
}

/// Resolves the effective configuration from file, overrides and flags.
pub fn effective_config(g: &GlobalArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = config::load(g.config.as_deref(), &g.set)?;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
        cfg.train.seed = seed;
        cfg.gradcheck.seed = seed;
    }
    if let Some(out) = &g.out {
        cfg.paths.out_dir = out.clone();
    }
    if let Some(target) = g.target {
        cfg.train.target = target;
    }
    if let Some(l) = g.iterations {
        cfg.model.fusion.iterations = l;
        cfg.gradcheck.model.fusion.iterations = l;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one parsed invocation and returns its exit code.
pub fn run(cli: Cli) -> anyhow::Result<u8> {
    if let Some(n) = cli.global.threads {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cfg = effective_config(&cli.global)?;
    let targets = match cli.global.target {
        Some(t) => vec![t],
        None => Target::ALL.to_vec(),
    };
    match cli.command {
        Command::Gen => commands::gen(&cfg),
        Command::Train { manifest } => commands::train(&cfg, manifest.as_deref()),
        Command::Eval { checkpoint, manifest, split } => commands::eval(&cfg, &checkpoint, &manifest, split),
        Command::Gradcheck { inject_fault } => commands::gradcheck(&cfg, inject_fault),
        Command::Ablate { l_values, fold, manifest } => {
            commands::ablate(&cfg, &l_values, fold, manifest.as_deref(), &targets)
        }
        Command::Cv { manifest, folds } => commands::cv(&cfg, folds, manifest.as_deref(), &targets),
    }
}
