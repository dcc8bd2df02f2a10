//! `flipgnn`: analyze datasets, generate synthetic benchmarks, and train
//! plain or flip-augmented node classifiers.
//!
//! Exit codes: 0 success, 1 divergence, 2 input or usage error, 3 internal.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] flipgnn::Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use flipgnn::Error as E;
        match self {
            CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Output { .. } => 3,
            CliError::Core(e) => match e {
                E::Divergence { .. } | E::NonFiniteGradient => 1,
                E::Shape { .. } | E::StaleTape(_) | E::Json(_) => 3,
                _ => 2,
            },
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "flipgnn", version, about = "Flip-augmented node classification")]
struct Cli {
    /// Worker threads for commands that train several models.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every training command; each maps to a config key.
#[derive(Args, Debug, Default)]
pub struct TrainFlags {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = ["mlp", "gcn", "appnp"])]
    pub model: Option<String>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long, value_parser = ["direct", "chain_through_d"])]
    pub grad_mode: Option<String>,
    #[arg(long, value_parser = ["original", "flipped"])]
    pub eval_space: Option<String>,
    #[arg(long, value_parser = ["all", "first_layer"])]
    pub scale_scope: Option<String>,
    /// Feature scaling applied when loading the dataset.
    #[arg(long, value_parser = ["none", "minmax"])]
    pub scale: Option<String>,
}

impl TrainFlags {
    pub fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut push = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        push("model", self.model.clone());
        push("hidden", self.hidden.map(|v| v.to_string()));
        push("dropout", self.dropout.map(|v| v.to_string()));
        push("epochs", self.epochs.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("lr", self.lr.map(|v| v.to_string()));
        push("weight_decay", self.weight_decay.map(|v| v.to_string()));
        push("grad_mode", self.grad_mode.clone());
        push("eval_space", self.eval_space.clone());
        push("scale_scope", self.scale_scope.clone());
        push("scale", self.scale.clone());
        out
    }
}

/// Per-space gradient scales.
#[derive(Args, Debug, Default)]
pub struct ScaleFlags {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
}

impl ScaleFlags {
    pub fn overrides(&self) -> Vec<(&'static str, String)> {
        [("alpha", self.alpha), ("beta", self.beta)]
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k, v.to_string())))
            .collect()
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print z-values, homophily and sizes of a dataset as JSON.
    Analyze {
        dataset_dir: PathBuf,
        #[arg(long, value_parser = ["none", "minmax"], default_value = "none")]
        scale: String,
    },
    /// Train one model; writes metrics.csv, result.json and config.resolved.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = ["on", "off"])]
        flip: Option<String>,
        #[command(flatten)]
        scales: ScaleFlags,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Flip training over an (alpha, beta) grid.
    Grid {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated alpha values.
        #[arg(long)]
        alphas: Option<String>,
        /// Comma-separated beta values.
        #[arg(long)]
        betas: Option<String>,
        /// Comma-separated seeds.
        #[arg(long)]
        seeds: Option<String>,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: commands::SynthFlags,
    },
    /// Per-epoch first-layer gradient magnitudes by feature type.
    Gradstats {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        scales: ScaleFlags,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plain training on uniformly shifted features.
    ShiftStudy {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated shifts.
        #[arg(long = "s")]
        shifts: Option<String>,
        #[arg(long)]
        seeds: Option<String>,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spread of test predictions across seeds, plain against flip.
    Variance {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        seeds: Option<String>,
        #[command(flatten)]
        scales: ScaleFlags,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy of plain and flip training for several labels-per-class budgets.
    SweepLabels {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated labels per class.
        #[arg(long)]
        labels: Option<String>,
        #[arg(long)]
        seeds: Option<String>,
        #[command(flatten)]
        scales: ScaleFlags,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long)]
        out: PathBuf,
    },
}

fn list_overrides(items: &[(&'static str, &Option<String>)]) -> Vec<(&'static str, String)> {
    items
        .iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (*k, v.clone())))
        .collect()
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.jobs == 0 {
        return Err(CliError::Usage("--jobs must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", cli.jobs)))?;
    match cli.command {
        Command::Analyze { dataset_dir, scale } => commands::analyze(&dataset_dir, &scale),
        Command::Train {
            data,
            flip,
            scales,
            train,
            out,
        } => {
            let mut o = train.overrides();
            o.extend(scales.overrides());
            if let Some(f) = flip {
                o.push(("flip", f));
            }
            commands::train(&data, train.config.as_deref(), o, &out)
        }
        Command::Grid {
            data,
            alphas,
            betas,
            seeds,
            train,
            out,
        } => {
            let mut o = train.overrides();
            o.extend(list_overrides(&[
                ("alphas", &alphas),
                ("betas", &betas),
                ("seeds", &seeds),
            ]));
            commands::grid(&data, train.config.as_deref(), o, &out)
        }
        Command::Synth { out, flags } => commands::synth(&flags, &out),
        Command::Gradstats {
            data,
            scales,
            train,
            out,
        } => {
            let mut o = train.overrides();
            o.extend(scales.overrides());
            commands::gradstats(&data, train.config.as_deref(), o, &out)
        }
        Command::ShiftStudy {
            data,
            shifts,
            seeds,
            train,
            out,
        } => {
            let mut o = train.overrides();
            o.extend(list_overrides(&[("shifts", &shifts), ("seeds", &seeds)]));
            commands::shift_study(&data, train.config.as_deref(), o, &out)
        }
        Command::Variance {
            data,
            seeds,
            scales,
            train,
            out,
        } => {
            let mut o = train.overrides();
            o.extend(scales.overrides());
            o.extend(list_overrides(&[("seeds", &seeds)]));
            commands::variance(&data, train.config.as_deref(), o, &out)
        }
        Command::SweepLabels {
            data,
            labels,
            seeds,
            scales,
            train,
            out,
        } => {
            let mut o = train.overrides();
            o.extend(scales.overrides());
            o.extend(list_overrides(&[("labels_per_class", &labels), ("seeds", &seeds)]));
            commands::sweep_labels(&data, train.config.as_deref(), o, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flipgnn: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
