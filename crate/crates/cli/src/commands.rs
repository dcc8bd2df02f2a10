use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use flipgnn::analysis::analyze as analyze_dataset;
use flipgnn::dataset::{generate_synthetic, load_dataset, save_dataset, Dataset, Scale};
use flipgnn::trainer::{self, TrainConfig, TrainState};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Settings, RUN_KEYS, SYNTH_KEYS, TRAIN_KEYS};
use crate::CliError;

pub const RESOLVED_CONFIG: &str = "config.resolved";

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Output { path, source })
}

fn create_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
        path: dir.to_path_buf(),
        source,
    })
}

fn to_json(value: &impl Serialize) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(flipgnn::Error::from)?;
    s.push('\n');
    Ok(s)
}

/// First 16 hex digits of the SHA-256 of the resolved config text.
fn config_hash(text: &str) -> String {
    let digest = format!("{:x}", Sha256::digest(text.as_bytes()));
    digest[..16].to_string()
}

/// Settings from defaults, environment, config file and flag overrides.
fn settings(
    config: Option<&Path>,
    overrides: Vec<(&'static str, String)>,
) -> Result<Settings, CliError> {
    let mut s = Settings::resolve(config)?;
    s.apply(overrides)?;
    Ok(s)
}

fn load(data: &Path, s: &Settings) -> Result<Dataset, CliError> {
    Ok(load_dataset(data, s.scale()?)?)
}

/// Writes the resolved config for `keys` and returns its text.
fn emit_config(out: &Path, s: &Settings, keys: &[&[&str]]) -> Result<String, CliError> {
    let text: String = keys.iter().map(|k| s.render(k)).collect();
    write(out, RESOLVED_CONFIG, &text)?;
    Ok(text)
}

pub fn analyze(dir: &Path, scale: &str) -> Result<(), CliError> {
    let scale: Scale = scale.parse().map_err(|e: flipgnn::Error| CliError::Usage(e.to_string()))?;
    let report = analyze_dataset(&load_dataset(dir, scale)?)?;
    print!("{}", to_json(&report)?);
    Ok(())
}

fn metrics_csv(state: &TrainState) -> String {
    let mut out = String::from("epoch,half,loss,val_acc,test_acc\n");
    for m in &state.log {
        let _ = writeln!(out, "{},{},{},{},{}", m.epoch, m.half, m.loss, m.val_acc, m.test_acc);
    }
    out
}

#[derive(Serialize)]
struct RunResult {
    best_val: f64,
    test_at_best_val: f64,
    alpha: Option<f64>,
    beta: Option<f64>,
    seed: u64,
    config_hash: String,
}

pub fn train(
    data: &Path,
    config: Option<&Path>,
    overrides: Vec<(&'static str, String)>,
    out: &Path,
) -> Result<(), CliError> {
    let s = settings(config, overrides)?;
    let cfg = s.train_config()?;
    if !cfg.flip && (s.is_explicit("alpha") || s.is_explicit("beta")) {
        return Err(CliError::Usage(
            "alpha and beta only apply with flip on".into(),
        ));
    }
    let d = load(data, &s)?;
    create_out(out)?;
    let text = emit_config(out, &s, &[TRAIN_KEYS])?;
    let state = trainer::train(&cfg, &d)?;
    write(out, "metrics.csv", metrics_csv(&state))?;
    let result = RunResult {
        best_val: state.best_val,
        test_at_best_val: state.test_at_best_val,
        alpha: cfg.flip.then_some(cfg.alpha),
        beta: cfg.flip.then_some(cfg.beta),
        seed: cfg.seed,
        config_hash: config_hash(&text),
    };
    let json = to_json(&result)?;
    write(out, "result.json", &json)?;
    print!("{json}");
    Ok(())
}

pub fn grid(
    data: &Path,
    config: Option<&Path>,
    overrides: Vec<(&'static str, String)>,
    out: &Path,
) -> Result<(), CliError> {
    let mut s = settings(config, overrides)?;
    s.set("flip", "on").map_err(CliError::Usage)?;
    let cfg = s.train_config()?;
    let (alphas, betas, seeds) = (s.list("alphas")?, s.list("betas")?, s.list("seeds")?);
    let d = load(data, &s)?;
    create_out(out)?;
    emit_config(out, &s, &[TRAIN_KEYS, RUN_KEYS])?;
    let report = trainer::grid_search(&cfg, &d, &alphas, &betas, &seeds)?;
    let mut csv = String::from("alpha,beta,mean_val,mean_test,std_test,diverged\n");
    for c in &report.cells {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            c.alpha, c.beta, c.mean_val, c.mean_test, c.std_test, c.diverged
        );
    }
    write(out, "grid.csv", &csv)?;
    write(out, "grid.json", to_json(&report)?)?;
    print!("{csv}");
    match report.best_cell() {
        Some(b) => println!(
            "best: alpha={} beta={} mean_val={} mean_test={}",
            b.alpha, b.beta, b.mean_val, b.mean_test
        ),
        None => println!("best: none (every run diverged)"),
    }
    Ok(())
}

/// Synthetic-generator flags; each maps to a config key.
#[derive(Args, Debug, Default)]
pub struct SynthFlags {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub num_features: Option<usize>,
    #[arg(long)]
    pub signature_dims_per_class: Option<usize>,
    #[arg(long)]
    pub train_per_class: Option<usize>,
    #[arg(long)]
    pub intra_p: Option<f64>,
    #[arg(long)]
    pub inter_p: Option<f64>,
    #[arg(long)]
    pub train_dim_fraction: Option<f64>,
    #[arg(long)]
    pub activation_prob: Option<f64>,
    #[arg(long)]
    pub noise_prob: Option<f64>,
    #[arg(long)]
    pub eval_per_class: Option<usize>,
}

impl SynthFlags {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        [
            ("seed", self.seed.map(|v| v.to_string())),
            ("n", self.n.map(|v| v.to_string())),
            ("classes", self.classes.map(|v| v.to_string())),
            ("num_features", self.num_features.map(|v| v.to_string())),
            (
                "signature_dims_per_class",
                self.signature_dims_per_class.map(|v| v.to_string()),
            ),
            ("train_per_class", self.train_per_class.map(|v| v.to_string())),
            ("intra_p", self.intra_p.map(|v| v.to_string())),
            ("inter_p", self.inter_p.map(|v| v.to_string())),
            ("train_dim_fraction", self.train_dim_fraction.map(|v| v.to_string())),
            ("activation_prob", self.activation_prob.map(|v| v.to_string())),
            ("noise_prob", self.noise_prob.map(|v| v.to_string())),
            ("eval_per_class", self.eval_per_class.map(|v| v.to_string())),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }
}

pub fn synth(flags: &SynthFlags, out: &Path) -> Result<(), CliError> {
    let s = settings(flags.config.as_deref(), flags.overrides())?;
    let spec = s.synth_spec()?;
    let d = generate_synthetic(&spec)?;
    save_dataset(&d, out).map_err(|e| match e {
        flipgnn::Error::Io { path, source } => CliError::Output { path, source },
        other => other.into(),
    })?;
    emit_config(out, &s, &[SYNTH_KEYS])?;
    println!(
        "wrote {} ({} nodes, {} edges, {} features)",
        out.display(),
        d.n(),
        d.graph.m(),
        d.num_features()
    );
    Ok(())
}

pub fn gradstats(
    data: &Path,
    config: Option<&Path>,
    overrides: Vec<(&'static str, String)>,
    out: &Path,
) -> Result<(), CliError> {
    let mut s = settings(config, overrides)?;
    s.set("flip", "on").map_err(CliError::Usage)?;
    let cfg = s.train_config()?;
    let d = load(data, &s)?;
    create_out(out)?;
    emit_config(out, &s, &[TRAIN_KEYS])?;
    let (stats, _) = trainer::grad_stats(&cfg, &d)?;
    write(out, "gradstats.csv", stats.to_csv())?;
    let counts = stats.partition.counts();
    println!("feature types T1..T4: {counts:?}");
    Ok(())
}

/// True when no entry exceeds its predecessor.
fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

pub fn shift_study(
    data: &Path,
    config: Option<&Path>,
    overrides: Vec<(&'static str, String)>,
    out: &Path,
) -> Result<(), CliError> {
    let mut s = settings(config, overrides)?;
    s.set("flip", "off").map_err(CliError::Usage)?;
    let cfg: TrainConfig = s.train_config()?;
    let (shifts, seeds) = (s.list::<f64>("shifts")?, s.list::<u64>("seeds")?);
    let d = load(data, &s)?;
    create_out(out)?;
    emit_config(out, &s, &[TRAIN_KEYS, RUN_KEYS])?;
    let rows = trainer::shift_study(&cfg, &d, &shifts, &seeds)?;
    let mut csv = String::from("shift,mean_test,std_test\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{}", r.shift, r.mean_test, r.std_test);
    }
    write(out, "shift.csv", &csv)?;
    let means: Vec<f64> = rows.iter().map(|r| r.mean_test).collect();
    let trend = non_increasing(&means);
    write(
        out,
        "shift.json",
        to_json(&serde_json::json!({ "rows": rows, "non_increasing": trend }))?,
    )?;
    print!("{csv}");
    println!("non-increasing: {trend}");
    Ok(())
}

pub fn variance(
    data: &Path,
    config: Option<&Path>,
    overrides: Vec<(&'static str, String)>,
    out: &Path,
) -> Result<(), CliError> {
    let mut s = settings(config, overrides)?;
    s.set("flip", "on").map_err(CliError::Usage)?;
    let flip = s.train_config()?;
    let plain = TrainConfig {
        flip: false,
        ..flip.clone()
    };
    let seeds = s.list::<u64>("seeds")?;
    let d = load(data, &s)?;
    create_out(out)?;
    emit_config(out, &s, &[TRAIN_KEYS, RUN_KEYS])?;
    let kind = flip.model.kind;
    let methods = [(kind.to_string(), plain), (format!("flip-{kind}"), flip)];
    let report = trainer::variance_report(&methods, &d, &seeds)?;
    let mut csv = String::from("method,mean_test,std_test,cov_trace\n");
    for m in &report.methods {
        let _ = writeln!(csv, "{},{},{},{}", m.name, m.mean_test, m.std_test, m.cov_trace);
    }
    write(out, "variance.csv", &csv)?;
    write(out, "variance.json", to_json(&report)?)?;
    print!("{csv}");
    Ok(())
}

pub fn sweep_labels(
    data: &Path,
    config: Option<&Path>,
    overrides: Vec<(&'static str, String)>,
    out: &Path,
) -> Result<(), CliError> {
    let s = settings(config, overrides)?;
    let cfg = s.train_config()?;
    let (budgets, seeds) = (s.list::<usize>("labels_per_class")?, s.list::<u64>("seeds")?);
    let d = load(data, &s)?;
    create_out(out)?;
    emit_config(out, &s, &[TRAIN_KEYS, RUN_KEYS])?;
    let rows = trainer::label_budget_sweep(&cfg, &d, &budgets, &seeds)?;
    let mut csv = String::from(
        "labels_per_class,z_train,plain_test,flip_test,plain_std,flip_std,gain,relative_gain\n",
    );
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.labels_per_class,
            r.z_train,
            r.plain_test,
            r.flip_test,
            r.plain_std,
            r.flip_std,
            r.gain,
            r.relative_gain
        );
    }
    write(out, "sweep.csv", &csv)?;
    print!("{csv}");
    Ok(())
}
