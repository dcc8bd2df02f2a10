//! Undirected graphs in CSR form and the GCN propagation matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Undirected graph; each edge is stored in both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    m: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    edge_values: Vec<f64>,
}

/// Symmetric renormalized propagation matrix `D̃^{-1/2}(A+I)D̃^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedGraph {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    edge_values: Vec<f64>,
}

/// Disjoint train/validation/test node sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl NodeSplit {
    /// Sorts each set and checks disjointness, bounds and a non-empty train set.
    pub fn new(
        mut train: Vec<usize>,
        mut val: Vec<usize>,
        mut test: Vec<usize>,
        n: usize,
    ) -> Result<Self> {
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        let mut seen = vec![false; n];
        for &v in train.iter().chain(&val).chain(&test) {
            if v >= n {
                return Err(Error::IndexOutOfRange { index: v, n });
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidDataset(format!(
                    "node {v} appears in more than one split role"
                )));
            }
        }
        if train.is_empty() {
            return Err(Error::EmptySet("training split"));
        }
        Ok(Self { train, val, test })
    }
}

impl Graph {
    /// Builds a symmetric CSR graph from undirected pairs, deduplicating
    /// repeated and mirrored pairs.
    pub fn from_edges(edges: &[(usize, usize)], n: usize) -> Result<Self> {
        let mut directed = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            for idx in [u, v] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, n });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            directed.push((u, v));
            directed.push((v, u));
        }
        directed.sort_unstable();
        directed.dedup();

        let mut row_offsets = vec![0usize; n + 1];
        for &(u, _) in &directed {
            row_offsets[u + 1] += 1;
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices: Vec<usize> = directed.iter().map(|&(_, v)| v).collect();
        let edge_values = vec![1.0; col_indices.len()];
        Ok(Self {
            n,
            m: directed.len() / 2,
            row_offsets,
            col_indices,
            edge_values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn degree(&self, u: usize) -> usize {
        self.row_offsets[u + 1] - self.row_offsets[u]
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[u]..self.row_offsets[u + 1]]
    }

    pub fn edge_values(&self, u: usize) -> &[f64] {
        &self.edge_values[self.row_offsets[u]..self.row_offsets[u + 1]]
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in lexicographic order.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| u < v)
                .map(move |&v| (u, v))
        })
    }

    /// `D̃^{-1/2}(A+I)D̃^{-1/2}` with `D̃` the degree matrix of `A+I`.
    pub fn renormalize(&self) -> NormalizedGraph {
        let deg: Vec<f64> = (0..self.n).map(|u| (self.degree(u) + 1) as f64).collect();
        let mut row_offsets = Vec::with_capacity(self.n + 1);
        let mut col_indices = Vec::with_capacity(self.col_indices.len() + self.n);
        let mut edge_values = Vec::with_capacity(self.col_indices.len() + self.n);
        row_offsets.push(0);
        for u in 0..self.n {
            let nbrs = self.neighbors(u);
            let split = nbrs.partition_point(|&v| v < u);
            let cols = nbrs[..split]
                .iter()
                .copied()
                .chain(std::iter::once(u))
                .chain(nbrs[split..].iter().copied());
            for v in cols {
                col_indices.push(v);
                edge_values.push(1.0 / (deg[u] * deg[v]).sqrt());
            }
            row_offsets.push(col_indices.len());
        }
        NormalizedGraph {
            n: self.n,
            row_offsets,
            col_indices,
            edge_values,
        }
    }

    /// Nodes within `k` hops of any seed, seeds included, sorted ascending.
    pub fn khop_nodes(&self, seeds: &[usize], k: usize) -> Vec<usize> {
        let mut visited = vec![false; self.n];
        let mut frontier = Vec::new();
        for &s in seeds {
            if s < self.n && !visited[s] {
                visited[s] = true;
                frontier.push(s);
            }
        }
        for _ in 0..k {
            let mut next = Vec::new();
            for &u in &frontier {
                for &v in self.neighbors(u) {
                    if !visited[v] {
                        visited[v] = true;
                        next.push(v);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        (0..self.n).filter(|&v| visited[v]).collect()
    }
}

impl NormalizedGraph {
    /// The identity operator on `n` nodes, i.e. the renormalization of an
    /// edgeless graph.
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            edge_values: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row(&self, u: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[u]..self.row_offsets[u + 1];
        (&self.col_indices[r.clone()], &self.edge_values[r])
    }

    /// Entry `(u, v)`, zero if absent.
    pub fn get(&self, u: usize, v: usize) -> f64 {
        let (cols, vals) = self.row(u);
        cols.binary_search(&v).map_or(0.0, |i| vals[i])
    }

    /// Sparse-dense product `Â·H`, summing each row in ascending column order.
    pub fn spmm(&self, h: &Matrix) -> Result<Matrix> {
        if h.rows() != self.n {
            return Err(Error::shape(
                "spmm",
                format!("propagation over {} nodes, input has {} rows", self.n, h.rows()),
            ));
        }
        let k = h.cols();
        let mut out = Matrix::zeros(self.n, k);
        for u in 0..self.n {
            let (cols, vals) = self.row(u);
            let out_row = out.row_mut(u);
            for (&v, &w) in cols.iter().zip(vals) {
                for (o, x) in out_row.iter_mut().zip(h.row(v)) {
                    *o += w * x;
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for u in 0..self.n {
            let (cols, vals) = self.row(u);
            for (&v, &w) in cols.iter().zip(vals) {
                m.set(u, v, w);
            }
        }
        m
    }
}
