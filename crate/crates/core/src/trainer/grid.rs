use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_std, train_flip, TrainConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_GRID: [f64; 4] = [1.0, 0.1, 0.01, 1e-3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    /// Per-seed best validation accuracy, `None` where the run diverged.
    pub val: Vec<Option<f64>>,
    /// Per-seed test accuracy at the best validation point.
    pub test: Vec<Option<f64>>,
    pub mean_val: f64,
    pub mean_test: f64,
    pub std_test: f64,
    pub diverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub seeds: Vec<u64>,
    /// Row-major over (alpha, beta).
    pub cells: Vec<GridCell>,
    /// Cell with the highest mean validation accuracy; earlier cells win ties.
    pub best: Option<usize>,
}

impl GridReport {
    pub fn best_cell(&self) -> Option<&GridCell> {
        self.best.map(|i| &self.cells[i])
    }
}

/// Flip training over every (α, β, seed) combination. Runs in the current
/// rayon pool; the report order does not depend on the number of workers.
/// A diverged run is recorded in its cell and excluded from the means.
pub fn grid_search(
    base: &TrainConfig,
    data: &Dataset,
    alphas: &[f64],
    betas: &[f64],
    seeds: &[u64],
) -> Result<GridReport> {
    if alphas.is_empty() || betas.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument(
            "grid search needs at least one alpha, beta and seed".into(),
        ));
    }
    let mut jobs = Vec::new();
    for &alpha in alphas {
        for &beta in betas {
            for &seed in seeds {
                jobs.push(TrainConfig {
                    alpha,
                    beta,
                    seed,
                    flip: true,
                    ..base.clone()
                });
            }
        }
    }
    // Invalid configurations are an error for the whole grid.
    for cfg in &jobs {
        cfg.validate()?;
    }
    let results: Vec<Result<(f64, f64)>> = jobs
        .par_iter()
        .map(|cfg| train_flip(cfg, data).map(|s| (s.best_val, s.test_at_best_val)))
        .collect();

    let mut cells = Vec::new();
    let mut results = results.into_iter();
    for cfg in jobs.iter().step_by(seeds.len()) {
        let mut val = Vec::new();
        let mut test = Vec::new();
        for r in results.by_ref().take(seeds.len()) {
            match r {
                Ok((v, t)) => {
                    val.push(Some(v));
                    test.push(Some(t));
                }
                Err(e) if e.is_divergence() => {
                    val.push(None);
                    test.push(None);
                }
                Err(e) => return Err(e),
            }
        }
        let ok_val: Vec<f64> = val.iter().flatten().copied().collect();
        let ok_test: Vec<f64> = test.iter().flatten().copied().collect();
        let (mean_test, std_test) = mean_std(&ok_test);
        cells.push(GridCell {
            alpha: cfg.alpha,
            beta: cfg.beta,
            diverged: val.len() - ok_val.len(),
            mean_val: mean_std(&ok_val).0,
            mean_test,
            std_test,
            val,
            test,
        });
    }
    let mut best: Option<usize> = None;
    for (i, c) in cells.iter().enumerate() {
        if c.diverged == c.val.len() {
            continue;
        }
        if best.is_none_or(|b| c.mean_val > cells[b].mean_val) {
            best = Some(i);
        }
    }
    Ok(GridReport {
        seeds: seeds.to_vec(),
        cells,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SynthSpec};
    use crate::models::{ModelKind, ModelSpec};

    #[test]
    fn single_cell_matches_direct_training() {
        let d = generate_synthetic(&SynthSpec {
            n: 100,
            num_features: 40,
            signature_dims_per_class: 10,
            train_per_class: 4,
            ..Default::default()
        })
        .unwrap();
        let base = TrainConfig {
            model: ModelSpec {
                kind: ModelKind::Mlp,
                hidden: 8,
                ..Default::default()
            },
            epochs: 10,
            ..Default::default()
        };
        let g = grid_search(&base, &d, &[0.1], &[0.01], &[7]).unwrap();
        let direct = train_flip(
            &TrainConfig {
                alpha: 0.1,
                beta: 0.01,
                seed: 7,
                flip: true,
                ..base.clone()
            },
            &d,
        )
        .unwrap();
        assert_eq!(g.cells.len(), 1);
        assert_eq!(g.best, Some(0));
        assert_eq!(g.cells[0].val, vec![Some(direct.best_val)]);
        assert_eq!(g.cells[0].test, vec![Some(direct.test_at_best_val)]);
    }
}
