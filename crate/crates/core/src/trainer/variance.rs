use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_std, predict_proba, train, TrainConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const MIN_VARIANCE_SEEDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodVariance {
    pub name: String,
    pub flip: bool,
    pub test: Vec<f64>,
    pub mean_test: f64,
    pub std_test: f64,
    /// Trace of the across-seed covariance of the predicted class
    /// distribution, averaged over test nodes.
    pub cov_trace: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodVariance>,
}

/// Mean over `nodes` of the summed sample variance (n - 1) of each class
/// probability across the given per-seed probability matrices.
pub fn mean_covariance_trace(probs: &[Matrix], nodes: &[usize]) -> Result<f64> {
    if probs.len() < 2 {
        return Err(Error::InvalidArgument(
            "covariance needs at least two runs".into(),
        ));
    }
    if nodes.is_empty() {
        return Err(Error::EmptySet("test split"));
    }
    let k = probs.len() as f64;
    let c = probs[0].cols();
    let mut total = 0.0;
    for &v in nodes {
        for j in 0..c {
            // Shifted by the first run so identical runs give exactly 0.
            let base = probs[0].get(v, j);
            let (s1, s2) = probs.iter().fold((0.0, 0.0), |(s1, s2), p| {
                let d = p.get(v, j) - base;
                (s1 + d, s2 + d * d)
            });
            total += ((s2 - s1 * s1 / k) / (k - 1.0)).max(0.0);
        }
    }
    Ok(total / nodes.len() as f64)
}

/// Trains every method on every seed and compares the spread of the selected
/// models' test predictions.
pub fn variance_report(
    methods: &[(String, TrainConfig)],
    data: &Dataset,
    seeds: &[u64],
) -> Result<VarianceReport> {
    if seeds.len() < MIN_VARIANCE_SEEDS {
        return Err(Error::InvalidArgument(format!(
            "variance report needs at least {MIN_VARIANCE_SEEDS} seeds, got {}",
            seeds.len()
        )));
    }
    let mut out = Vec::new();
    for (name, base) in methods {
        let runs = seeds
            .par_iter()
            .map(|&seed| {
                let cfg = TrainConfig {
                    seed,
                    ..base.clone()
                };
                let st = train(&cfg, data)?;
                Ok((st.test_at_best_val, predict_proba(&cfg, data, &st.best_params)?))
            })
            .collect::<Result<Vec<(f64, Matrix)>>>()?;
        let (test, probs): (Vec<f64>, Vec<Matrix>) = runs.into_iter().unzip();
        let (mean_test, std_test) = mean_std(&test);
        out.push(MethodVariance {
            name: name.clone(),
            flip: base.flip,
            cov_trace: mean_covariance_trace(&probs, &data.split.test)?,
            test,
            mean_test,
            std_test,
        });
    }
    Ok(VarianceReport {
        seeds: seeds.to_vec(),
        methods: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SynthSpec};
    use crate::models::{ModelKind, ModelSpec};

    #[test]
    fn trace_of_known_values() {
        let a = Matrix::from_rows(&[&[1.0, 0.0]]).unwrap();
        let b = Matrix::from_rows(&[&[0.0, 1.0]]).unwrap();
        // each class: values {1, 0}, sample variance 0.5
        assert!((mean_covariance_trace(&[a, b], &[0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn repeated_seed_has_zero_trace() {
        let d = generate_synthetic(&SynthSpec {
            n: 80,
            num_features: 40,
            signature_dims_per_class: 10,
            train_per_class: 4,
            ..Default::default()
        })
        .unwrap();
        let cfg = TrainConfig {
            model: ModelSpec {
                kind: ModelKind::Gcn,
                hidden: 8,
                ..Default::default()
            },
            epochs: 5,
            ..Default::default()
        };
        let r = variance_report(&[("gcn".into(), cfg.clone())], &d, &[4; 5]).unwrap();
        assert_eq!(r.methods[0].cov_trace, 0.0);
        assert!(variance_report(&[("gcn".into(), cfg)], &d, &[1, 2, 3, 4]).is_err());
    }
}
