use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_std, train, TrainConfig};
use crate::analysis::z_value;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::NodeSplit;
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub labels_per_class: usize,
    /// Mean hop-0 z-value of the resampled training sets.
    pub z_train: f64,
    pub plain_test: f64,
    pub flip_test: f64,
    pub plain_std: f64,
    pub flip_std: f64,
    /// flip - plain
    pub gain: f64,
    /// (flip - plain) / plain
    pub relative_gain: f64,
}

/// Class-stratified draw of `per_class` training nodes from outside val/test.
pub fn resample_train_split(data: &Dataset, per_class: usize, seed: u64) -> Result<NodeSplit> {
    if per_class == 0 {
        return Err(Error::InvalidArgument("labels per class must be >= 1".into()));
    }
    let mut held = vec![false; data.n()];
    for &v in data.split.val.iter().chain(&data.split.test) {
        held[v] = true;
    }
    let mut pools = vec![Vec::new(); data.num_classes];
    for v in 0..data.n() {
        if !held[v] {
            pools[data.labels[v]].push(v);
        }
    }
    let mut rng = stream(seed, Stream::Splits);
    let mut train = Vec::new();
    for (c, pool) in pools.iter_mut().enumerate() {
        if pool.len() < per_class {
            return Err(Error::InsufficientLabels(format!(
                "class {c} has {} labelled nodes outside val/test, {per_class} requested",
                pool.len()
            )));
        }
        pool.shuffle(&mut rng);
        train.extend_from_slice(&pool[..per_class]);
    }
    NodeSplit::new(train, data.split.val.clone(), data.split.test.clone(), data.n())
}

/// For each budget: resample the training split per seed, train with flip
/// off and on, and report mean test accuracy and the training-set z-value.
pub fn label_budget_sweep(
    cfg: &TrainConfig,
    data: &Dataset,
    labels_per_class: &[usize],
    seeds: &[u64],
) -> Result<Vec<BudgetRow>> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("label sweep needs at least one seed".into()));
    }
    // Fail on the largest budget before training anything.
    if let Some(&max) = labels_per_class.iter().max() {
        resample_train_split(data, max, seeds[0])?;
    }
    let mut rows = Vec::new();
    for &budget in labels_per_class {
        let runs = seeds
            .par_iter()
            .map(|&seed| {
                let d = data.with_split(resample_train_split(data, budget, seed)?)?;
                let z = z_value(&d, &d.split.train, 0)?;
                let plain = train(&TrainConfig { seed, flip: false, ..cfg.clone() }, &d)?;
                let flip = train(&TrainConfig { seed, flip: true, ..cfg.clone() }, &d)?;
                Ok((z, plain.test_at_best_val, flip.test_at_best_val))
            })
            .collect::<Result<Vec<_>>>()?;
        let z: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let (plain_test, plain_std) = mean_std(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
        let (flip_test, flip_std) = mean_std(&runs.iter().map(|r| r.2).collect::<Vec<_>>());
        let gain = flip_test - plain_test;
        rows.push(BudgetRow {
            labels_per_class: budget,
            z_train: mean_std(&z).0,
            plain_test,
            flip_test,
            plain_std,
            flip_std,
            gain,
            relative_gain: if plain_test > 0.0 { gain / plain_test } else { 0.0 },
        });
    }
    Ok(rows)
}
