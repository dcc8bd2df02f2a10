use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_std, train_plain_on, TrainConfig};
use crate::analysis::shift_features;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub shift: f64,
    pub mean_test: f64,
    pub std_test: f64,
    pub test: Vec<f64>,
}

/// Plain training on `X + s` for each shift, averaged over seeds.
pub fn shift_study(
    base: &TrainConfig,
    data: &Dataset,
    shifts: &[f64],
    seeds: &[u64],
) -> Result<Vec<ShiftRow>> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("shift study needs at least one seed".into()));
    }
    let mut rows = Vec::new();
    for &s in shifts {
        let input = shift_features(&data.features, s)?;
        let test = seeds
            .par_iter()
            .map(|&seed| {
                let cfg = TrainConfig {
                    seed,
                    flip: false,
                    ..base.clone()
                };
                train_plain_on(&cfg, data, &input).map(|st| st.test_at_best_val)
            })
            .collect::<Result<Vec<f64>>>()?;
        let (mean_test, std_test) = mean_std(&test);
        rows.push(ShiftRow {
            shift: s,
            mean_test,
            std_test,
            test,
        });
    }
    Ok(rows)
}
