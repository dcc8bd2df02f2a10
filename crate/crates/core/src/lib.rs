//! Flip augmentation for semi-supervised node classification.
//!
//! Sparse bag-of-words features leave most rows of the first weight matrix
//! without gradient when few nodes are labeled. Training alternates between
//! the original space and a flipped space in which features are reflected
//! through the centre of the unit hypercube and the first hyperplane is
//! reflected with them, so hidden states are unchanged while every input
//! dimension becomes nonzero.
//!
//! Modules, bottom up: [`graph`] (CSR graph, renormalized propagation),
//! [`dataset`] (on-disk format, synthetic benchmark), [`analysis`] (z-value,
//! homophily, feature types), [`tensor`] (kernels, layers, Adam, gradient
//! check), [`models`] (MLP/GCN/APPNP), [`flip`] (two-space views) and
//! [`trainer`] (alternating optimization and the studies built on it).

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod flip;
pub mod graph;
pub mod models;
pub mod rng;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
