use serde::{Deserialize, Serialize};

use super::{run_flip, mean_std, TrainConfig, TrainState};
use crate::analysis::{partition_feature_types, FeatureType, FeatureTypePartition};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::flip::Space;
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradStatRecord {
    pub epoch: usize,
    pub space: Space,
    pub ty: FeatureType,
    /// Mean over the type's dimensions of the row-mean |dW1|.
    pub mean_abs_grad: f64,
    /// Population standard deviation of the same per-dimension values.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradStats {
    pub partition: FeatureTypePartition,
    pub records: Vec<GradStatRecord>,
}

impl GradStats {
    /// Per-type mean of `mean_abs_grad` over all epochs of one space.
    pub fn type_means(&self, space: Space) -> [f64; 4] {
        let mut sum = [0.0; 4];
        let mut count = [0usize; 4];
        for r in self.records.iter().filter(|r| r.space == space) {
            sum[r.ty.index()] += r.mean_abs_grad;
            count[r.ty.index()] += 1;
        }
        std::array::from_fn(|i| if count[i] == 0 { 0.0 } else { sum[i] / count[i] as f64 })
    }

    /// Standard deviation across the non-empty types of `type_means`.
    pub fn type_dispersion(&self, space: Space) -> f64 {
        let means = self.type_means(space);
        let counts = self.partition.counts();
        let present: Vec<f64> = (0..4).filter(|&i| counts[i] > 0).map(|i| means[i]).collect();
        mean_std(&present).1
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,space,type,mean_abs_grad,std\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.space, r.ty, r.mean_abs_grad, r.std
            ));
        }
        out
    }
}

fn summarize(g: &Matrix, dims: &[usize]) -> (f64, f64) {
    let per_dim: Vec<f64> = dims
        .iter()
        .map(|&i| g.row(i).iter().map(|v| v.abs()).sum::<f64>() / g.cols() as f64)
        .collect();
    mean_std(&per_dim)
}

/// Flip training that records first-layer gradient magnitudes per feature
/// type after every half-epoch. The recorded gradient is the loss gradient on
/// the shared weights plus the L2 term, before α/β scaling.
pub fn grad_stats(cfg: &TrainConfig, data: &Dataset) -> Result<(GradStats, TrainState)> {
    let ctx = super::flip_context(cfg, data)?;
    let partition = partition_feature_types(data)?;
    let dims: Vec<Vec<usize>> = FeatureType::ALL.iter().map(|&t| partition.dims_of(t)).collect();
    let mut records = Vec::new();
    let mut obs = |epoch: usize, space: Space, g: &Matrix| {
        for (ty, d) in FeatureType::ALL.iter().zip(&dims) {
            let (mean_abs_grad, std) = summarize(g, d);
            records.push(GradStatRecord {
                epoch,
                space,
                ty: *ty,
                mean_abs_grad,
                std,
            });
        }
    };
    let state = run_flip(cfg, data, &ctx, Some(&mut obs))?;
    Ok((GradStats { partition, records }, state))
}
