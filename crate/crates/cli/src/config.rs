//! Flat `key = value` configuration.
//!
//! Values are resolved in order: built-in defaults, `FLIPGNN_SEED`, the
//! config file, command-line flags. The resolved settings are written next to
//! every command's outputs and can be fed back through `--config`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use flipgnn::dataset::{Scale, SynthSpec};
use flipgnn::models::{ModelKind, ModelSpec};
use flipgnn::trainer::{ScaleScope, TrainConfig, DEFAULT_GRID};

use crate::CliError;

pub const SEED_ENV: &str = "FLIPGNN_SEED";

/// Keys read by the training commands.
pub const TRAIN_KEYS: &[&str] = &[
    "model",
    "hidden",
    "dropout",
    "appnp_k",
    "appnp_teleport",
    "bias",
    "flip",
    "alpha",
    "beta",
    "lr",
    "weight_decay",
    "epochs",
    "seed",
    "grad_mode",
    "eval_space",
    "scale_scope",
    "reflection",
    "scale",
];

/// List-valued keys of the multi-run commands.
pub const RUN_KEYS: &[&str] = &["alphas", "betas", "seeds", "shifts", "labels_per_class"];

/// Keys read by `synth`.
pub const SYNTH_KEYS: &[&str] = &[
    "n",
    "classes",
    "num_features",
    "signature_dims_per_class",
    "train_per_class",
    "intra_p",
    "inter_p",
    "train_dim_fraction",
    "activation_prob",
    "noise_prob",
    "eval_per_class",
    "seed",
];

fn on_off(b: bool) -> String {
    if b { "on" } else { "off" }.to_string()
}

#[derive(Debug, Clone)]
pub struct Settings {
    values: BTreeMap<&'static str, String>,
    /// Keys set by the config file or a flag rather than a default.
    explicit: BTreeSet<&'static str>,
}

impl Settings {
    pub fn defaults() -> Self {
        let t = TrainConfig::default();
        let m = ModelSpec::default();
        let s = SynthSpec::default();
        let mut values = BTreeMap::new();
        let mut put = |k: &'static str, v: String| {
            values.insert(k, v);
        };
        put("model", m.kind.to_string());
        put("hidden", m.hidden.to_string());
        put("dropout", m.dropout.to_string());
        put("appnp_k", m.appnp_k.to_string());
        put("appnp_teleport", m.appnp_teleport.to_string());
        put("bias", on_off(m.bias));
        put("flip", on_off(t.flip));
        put("alpha", t.alpha.to_string());
        put("beta", t.beta.to_string());
        put("lr", t.lr.to_string());
        put("weight_decay", t.weight_decay.to_string());
        put("epochs", t.epochs.to_string());
        put("seed", t.seed.to_string());
        put("grad_mode", t.grad_mode.to_string());
        put("eval_space", t.eval_space.to_string());
        put("scale_scope", t.scale_scope.to_string());
        put("reflection", t.reflection.to_string());
        put("scale", Scale::None.to_string());
        put("n", s.n.to_string());
        put("classes", s.classes.to_string());
        put("num_features", s.num_features.to_string());
        put("signature_dims_per_class", s.signature_dims_per_class.to_string());
        put("train_per_class", s.train_per_class.to_string());
        put("intra_p", s.intra_p.to_string());
        put("inter_p", s.inter_p.to_string());
        put("train_dim_fraction", s.train_dim_fraction.to_string());
        put("activation_prob", s.activation_prob.to_string());
        put("noise_prob", s.noise_prob.to_string());
        put(
            "eval_per_class",
            s.eval_per_class.map_or("none".into(), |k| k.to_string()),
        );
        let grid = DEFAULT_GRID.map(|v| v.to_string()).join(",");
        values.insert("alphas", grid.clone());
        values.insert("betas", grid);
        values.insert("seeds", "0,1,2,3,4".into());
        values.insert("shifts", "0,0.1,0.5,1".into());
        values.insert("labels_per_class", "20,40,80".into());
        Self {
            values,
            explicit: BTreeSet::new(),
        }
    }

    /// Defaults, then the seed environment variable, then `file` if given.
    pub fn resolve(file: Option<&Path>) -> Result<Self, CliError> {
        let mut s = Self::defaults();
        if let Ok(seed) = std::env::var(SEED_ENV) {
            s.values.insert("seed", seed);
            s.get::<u64>("seed")
                .map_err(|e| CliError::Usage(format!("{SEED_ENV}: {e}")))?;
        }
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            s.merge_text(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        }
        Ok(s)
    }

    pub fn merge_text(&mut self, text: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), String> {
        let key = self
            .values
            .keys()
            .find(|k| **k == key)
            .copied()
            .ok_or_else(|| format!("unknown key '{key}'"))?;
        self.values.insert(key, value.into());
        self.explicit.insert(key);
        Ok(())
    }

    /// Applies `(key, value)` overrides from flags.
    pub fn apply(&mut self, overrides: Vec<(&'static str, String)>) -> Result<(), CliError> {
        for (k, v) in overrides {
            self.set(k, v).map_err(CliError::Usage)?;
        }
        Ok(())
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, String>
    where
        T::Err: Display,
    {
        let raw = &self.values[key];
        raw.parse::<T>()
            .map_err(|e| format!("invalid value '{raw}' for {key}: {e}"))
    }

    /// Comma-separated list; empty entries are rejected.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        self.values[key]
            .split(',')
            .map(|item| {
                item.trim().parse::<T>().map_err(|e| {
                    CliError::Usage(format!("invalid entry '{item}' in {key}: {e}"))
                })
            })
            .collect()
    }

    fn flag(&self, key: &str) -> Result<bool, String> {
        match self.values[key].as_str() {
            "on" | "true" | "1" => Ok(true),
            "off" | "false" | "0" => Ok(false),
            other => Err(format!("invalid value '{other}' for {key}: expected on or off")),
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let u = CliError::Usage;
        let model = ModelSpec {
            kind: self.get::<ModelKind>("model").map_err(u)?,
            hidden: self.get("hidden").map_err(u)?,
            dropout: self.get("dropout").map_err(u)?,
            appnp_k: self.get("appnp_k").map_err(u)?,
            appnp_teleport: self.get("appnp_teleport").map_err(u)?,
            bias: self.flag("bias").map_err(u)?,
        };
        let cfg = TrainConfig {
            model,
            flip: self.flag("flip").map_err(u)?,
            alpha: self.get("alpha").map_err(u)?,
            beta: self.get("beta").map_err(u)?,
            lr: self.get("lr").map_err(u)?,
            weight_decay: self.get("weight_decay").map_err(u)?,
            epochs: self.get("epochs").map_err(u)?,
            seed: self.get("seed").map_err(u)?,
            grad_mode: self.get("grad_mode").map_err(u)?,
            eval_space: self.get("eval_space").map_err(u)?,
            scale_scope: self.get::<ScaleScope>("scale_scope").map_err(u)?,
            reflection: self.get("reflection").map_err(u)?,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn scale(&self) -> Result<Scale, CliError> {
        self.get("scale").map_err(CliError::Usage)
    }

    pub fn synth_spec(&self) -> Result<SynthSpec, CliError> {
        let u = CliError::Usage;
        let eval_per_class = match self.values["eval_per_class"].as_str() {
            "none" => None,
            _ => Some(self.get("eval_per_class").map_err(u)?),
        };
        let spec = SynthSpec {
            n: self.get("n").map_err(u)?,
            classes: self.get("classes").map_err(u)?,
            num_features: self.get("num_features").map_err(u)?,
            signature_dims_per_class: self.get("signature_dims_per_class").map_err(u)?,
            train_per_class: self.get("train_per_class").map_err(u)?,
            intra_p: self.get("intra_p").map_err(u)?,
            inter_p: self.get("inter_p").map_err(u)?,
            train_dim_fraction: self.get("train_dim_fraction").map_err(u)?,
            activation_prob: self.get("activation_prob").map_err(u)?,
            noise_prob: self.get("noise_prob").map_err(u)?,
            eval_per_class,
            seed: self.get("seed").map_err(u)?,
        };
        spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(spec)
    }

    /// `key = value` lines for `keys`, in the given order.
    pub fn render(&self, keys: &[&str]) -> String {
        keys.iter()
            .map(|k| format!("{k} = {}\n", self.values[k]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let d = Settings::defaults();
        assert_eq!(d.train_config().unwrap(), TrainConfig::default());
        assert_eq!(d.synth_spec().unwrap(), SynthSpec::default());
        let mut again = Settings::defaults();
        again.merge_text(&d.render(TRAIN_KEYS)).unwrap();
        again.merge_text(&d.render(SYNTH_KEYS)).unwrap();
        again.merge_text(&d.render(RUN_KEYS)).unwrap();
        assert_eq!(again.values, d.values);
    }

    #[test]
    fn file_syntax() {
        let mut s = Settings::defaults();
        s.merge_text("# comment\n\nmodel = mlp\n  alpha=0.1  \nflip = on\n")
            .unwrap();
        let cfg = s.train_config().unwrap();
        assert_eq!(cfg.model.kind, ModelKind::Mlp);
        assert_eq!(cfg.alpha, 0.1);
        assert!(cfg.flip);
        assert!(s.is_explicit("alpha") && !s.is_explicit("beta"));
        assert!(s.merge_text("colour = red").unwrap_err().contains("unknown key"));
        assert!(s.merge_text("model mlp").unwrap_err().contains("line 1"));
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let mut s = Settings::defaults();
        s.set("epochs", "many").unwrap();
        assert!(matches!(s.train_config(), Err(CliError::Usage(_))));
        let mut s = Settings::defaults();
        s.set("alpha", "0").unwrap();
        assert!(matches!(s.train_config(), Err(CliError::Usage(_))));
    }

    #[test]
    fn lists() {
        let mut s = Settings::defaults();
        assert_eq!(s.list::<f64>("alphas").unwrap(), vec![1.0, 0.1, 0.01, 0.001]);
        s.set("seeds", "3, 4,5").unwrap();
        assert_eq!(s.list::<u64>("seeds").unwrap(), vec![3, 4, 5]);
        s.set("seeds", "3,,5").unwrap();
        assert!(matches!(s.list::<u64>("seeds"), Err(CliError::Usage(_))));
    }
}
