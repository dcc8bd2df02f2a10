//! Dataset diagnostics: nonzero-dimension ratio (z), edge homophily and the
//! hop-based feature-type partition.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureMatrix};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Fraction of feature dimensions whose sum over the nodes within `hop` hops
/// of `seeds` is nonzero.
pub fn z_value(d: &Dataset, seeds: &[usize], hop: usize) -> Result<f64> {
    if seeds.is_empty() {
        return Err(Error::EmptySet("z-value seed set"));
    }
    if let Some(&bad) = seeds.iter().find(|&&s| s >= d.n()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            n: d.n(),
        });
    }
    let f = d.num_features();
    if f == 0 {
        return Ok(0.0);
    }
    let mut sum = vec![0.0; f];
    for v in d.graph.khop_nodes(seeds, hop) {
        let (dims, vals) = d.features.row(v);
        for (&dim, &x) in dims.iter().zip(vals) {
            sum[dim] += x;
        }
    }
    let nonzero = sum.iter().filter(|&&s| s != 0.0).count();
    Ok(nonzero as f64 / f as f64)
}

/// Fraction of undirected edges whose endpoints share a label.
pub fn homophily(d: &Dataset) -> Result<f64> {
    let m = d.graph.m();
    if m == 0 {
        return Err(Error::EdgelessGraph);
    }
    let same = d
        .graph
        .undirected_edges()
        .filter(|&(u, v)| d.labels[u] == d.labels[v])
        .count();
    Ok(same as f64 / m as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureType {
    T1,
    T2,
    T3,
    T4,
}

impl FeatureType {
    pub const ALL: [FeatureType; 4] = [FeatureType::T1, FeatureType::T2, FeatureType::T3, FeatureType::T4];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for FeatureType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.index() + 1)
    }
}

/// Tag per feature dimension: T1 if active on a training node, else T2 if
/// active within one hop of the training set, T3 within two hops, else T4.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureTypePartition {
    pub type_of_dim: Vec<FeatureType>,
}

impl FeatureTypePartition {
    pub fn dims_of(&self, t: FeatureType) -> Vec<usize> {
        (0..self.type_of_dim.len())
            .filter(|&i| self.type_of_dim[i] == t)
            .collect()
    }

    pub fn counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        self.type_of_dim.iter().for_each(|t| c[t.index()] += 1);
        c
    }
}

pub fn partition_feature_types(d: &Dataset) -> Result<FeatureTypePartition> {
    let train = &d.split.train;
    if train.is_empty() {
        return Err(Error::EmptySet("training split"));
    }
    let mut types = vec![FeatureType::T4; d.num_features()];
    // Highest priority last so it overwrites.
    for (hop, t) in [(2, FeatureType::T3), (1, FeatureType::T2), (0, FeatureType::T1)] {
        let mut active = vec![false; d.num_features()];
        for v in d.graph.khop_nodes(train, hop) {
            for &dim in d.features.row(v).0 {
                active[dim] = true;
            }
        }
        for (ty, a) in types.iter_mut().zip(active) {
            if a {
                *ty = t;
            }
        }
    }
    Ok(FeatureTypePartition { type_of_dim: types })
}

/// Dense `X + s` on every entry.
pub fn shift_features(x: &FeatureMatrix, s: f64) -> Result<Matrix> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("shift {s} must be finite and >= 0")));
    }
    let mut m = x.to_dense();
    m.as_mut_slice().iter_mut().for_each(|v| *v += s);
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    /// z over the training split expanded to 0, 1 and 2 hops.
    pub z_by_hop: BTreeMap<usize, f64>,
    /// `None` for an edgeless graph.
    pub homophily: Option<f64>,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "F")]
    pub num_features: usize,
    #[serde(rename = "C")]
    pub num_classes: usize,
}

pub fn analyze(d: &Dataset) -> Result<AnalysisReport> {
    let mut z_by_hop = BTreeMap::new();
    for hop in 0..=2 {
        z_by_hop.insert(hop, z_value(d, &d.split.train, hop)?);
    }
    let homophily = match homophily(d) {
        Ok(h) => Some(h),
        Err(Error::EdgelessGraph) => None,
        Err(e) => return Err(e),
    };
    Ok(AnalysisReport {
        z_by_hop,
        homophily,
        n: d.n(),
        m: d.graph.m(),
        num_features: d.num_features(),
        num_classes: d.num_classes,
    })
}
