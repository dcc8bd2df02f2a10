use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Node features stored as sorted `(dim, value)` rows without explicit zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n: usize,
    f: usize,
    row_offsets: Vec<usize>,
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    /// Builds from `(node, dim, value)` triplets in any order. Stored zeros are
    /// dropped; duplicates and non-finite values are rejected.
    pub fn from_triplets(n: usize, f: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(node, dim, value) in &triplets {
            if node >= n {
                return Err(Error::IndexOutOfRange { index: node, n });
            }
            if dim >= f {
                return Err(Error::InvalidDataset(format!(
                    "feature dim {dim} of node {node} not below F = {f}"
                )));
            }
            if !value.is_finite() {
                return Err(Error::InvalidDataset(format!(
                    "non-finite feature value at node {node}, dim {dim}"
                )));
            }
        }
        triplets.retain(|t| t.2 != 0.0);
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        if let Some(w) = triplets.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidDataset(format!(
                "duplicate feature entry for node {}, dim {}",
                w[0].0, w[0].1
            )));
        }
        let mut row_offsets = vec![0usize; n + 1];
        for &(node, _, _) in &triplets {
            row_offsets[node + 1] += 1;
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(Self {
            n,
            f,
            row_offsets,
            dims: triplets.iter().map(|t| t.1).collect(),
            values: triplets.iter().map(|t| t.2).collect(),
        })
    }

    /// Sparse view of a dense matrix.
    pub fn from_dense(m: &Matrix) -> Self {
        let mut triplets = Vec::new();
        for r in 0..m.rows() {
            for (c, &v) in m.row(r).iter().enumerate() {
                if v != 0.0 {
                    triplets.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.rows(), m.cols(), triplets).expect("dense matrix is well formed")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_features(&self) -> usize {
        self.f
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, node: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[node]..self.row_offsets[node + 1];
        (&self.dims[r.clone()], &self.values[r])
    }

    /// Triplets in `(node, dim)` order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |node| {
            let (dims, vals) = self.row(node);
            dims.iter().zip(vals).map(move |(&d, &v)| (node, d, v))
        })
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.f);
        for (node, dim, v) in self.triplets() {
            m.set(node, dim, v);
        }
        m
    }

    /// First entry outside `[0, 1]`, if any.
    pub fn first_out_of_unit_range(&self) -> Option<(usize, usize, f64)> {
        self.triplets().find(|t| !(0.0..=1.0).contains(&t.2))
    }

    /// Per-dimension min-max scaling to `[0, 1]` over all nodes, implicit
    /// zeros included. Constant dimensions map to 0.
    pub fn minmax_scaled(&self) -> Self {
        let mut min = vec![f64::INFINITY; self.f];
        let mut max = vec![f64::NEG_INFINITY; self.f];
        let mut count = vec![0usize; self.f];
        for (_, d, v) in self.triplets() {
            min[d] = min[d].min(v);
            max[d] = max[d].max(v);
            count[d] += 1;
        }
        for ((&c, lo), hi) in count.iter().zip(&mut min).zip(&mut max) {
            if c < self.n {
                *lo = lo.min(0.0);
                *hi = hi.max(0.0);
            }
        }
        let scale = |d: usize, v: f64| {
            let range = max[d] - min[d];
            if range > 0.0 {
                (v - min[d]) / range
            } else {
                0.0
            }
        };
        let mut triplets = Vec::with_capacity(self.nnz());
        for node in 0..self.n {
            let (dims, vals) = self.row(node);
            let mut k = 0;
            for d in 0..self.f {
                let v = if k < dims.len() && dims[k] == d {
                    k += 1;
                    vals[k - 1]
                } else if min[d] == 0.0 {
                    // implicit zero stays zero
                    continue;
                } else {
                    0.0
                };
                let s = scale(d, v);
                if s != 0.0 {
                    triplets.push((node, d, s));
                }
            }
        }
        Self::from_triplets(self.n, self.f, triplets).expect("scaling preserves validity")
    }
}
