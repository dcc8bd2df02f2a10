//! Stochastic-block-model benchmark with class-signature bag-of-words
//! features. Training nodes only ever activate the leading part of their
//! class signature, so a controlled share of the feature space is never seen
//! during training.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureMatrix};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSplit};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub classes: usize,
    /// Total feature dimensions; dims past the class signatures are noise dims.
    pub num_features: usize,
    pub signature_dims_per_class: usize,
    pub train_per_class: usize,
    pub intra_p: f64,
    pub inter_p: f64,
    /// Leading fraction of each signature that training nodes may activate.
    pub train_dim_fraction: f64,
    /// Probability that a node activates each dim of its (visible) signature.
    pub activation_prob: f64,
    /// Probability that a node activates each noise dim.
    pub noise_prob: f64,
    /// Val and test nodes per class. `None` splits everything outside train
    /// evenly; otherwise the remainder forms an unassigned labelled pool that
    /// shares the training nodes' restricted signatures.
    #[serde(default)]
    pub eval_per_class: Option<usize>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 600,
            classes: 4,
            num_features: 360,
            signature_dims_per_class: 40,
            train_per_class: 20,
            intra_p: 0.02,
            inter_p: 0.002,
            train_dim_fraction: 0.25,
            activation_prob: 0.1,
            noise_prob: 0.003,
            eval_per_class: None,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.classes == 0 || self.signature_dims_per_class == 0 {
            return bad("classes and signature_dims_per_class must be positive".into());
        }
        if self.signature_dims_per_class * self.classes > self.num_features {
            return bad(format!(
                "{} classes x {} signature dims exceed the feature budget F = {}",
                self.classes, self.signature_dims_per_class, self.num_features
            ));
        }
        for (name, p) in [
            ("intra_p", self.intra_p),
            ("inter_p", self.inter_p),
            ("activation_prob", self.activation_prob),
            ("noise_prob", self.noise_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        if !(self.train_dim_fraction > 0.0 && self.train_dim_fraction <= 1.0) {
            return bad(format!(
                "train_dim_fraction = {} outside (0, 1]",
                self.train_dim_fraction
            ));
        }
        if self.train_per_class == 0 {
            return bad("train_per_class must be positive".into());
        }
        let smallest_class = self.n / self.classes;
        let needed = self.train_per_class + 2 * self.eval_per_class.unwrap_or(0);
        if needed > smallest_class {
            return bad(format!(
                "{needed} labelled nodes per class exceed the smallest class size {smallest_class}"
            ));
        }
        Ok(())
    }

    /// Number of leading signature dims visible to training nodes.
    pub fn visible_dims_per_class(&self) -> usize {
        ((self.train_dim_fraction * self.signature_dims_per_class as f64).ceil() as usize)
            .clamp(1, self.signature_dims_per_class)
    }

    /// Signature dims of class `c`.
    pub fn signature(&self, c: usize) -> std::ops::Range<usize> {
        c * self.signature_dims_per_class..(c + 1) * self.signature_dims_per_class
    }
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n;
    let c = spec.classes;

    let mut labels: Vec<usize> = (0..n).map(|v| v % c).collect();
    labels.shuffle(&mut stream(spec.seed, Stream::Labels));

    let mut rng = stream(spec.seed, Stream::Edges);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] {
                spec.intra_p
            } else {
                spec.inter_p
            };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::from_edges(&edges, n)?;

    let mut rng = stream(spec.seed, Stream::Splits);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for class in 0..c {
        let mut members: Vec<usize> = (0..n).filter(|&v| labels[v] == class).collect();
        members.shuffle(&mut rng);
        let rest = &members[spec.train_per_class..];
        let k = spec.eval_per_class.unwrap_or(rest.len() / 2);
        let test_end = if spec.eval_per_class.is_some() { 2 * k } else { rest.len() };
        train.extend_from_slice(&members[..spec.train_per_class]);
        val.extend_from_slice(&rest[..k]);
        test.extend_from_slice(&rest[k..test_end]);
    }
    // Training nodes and the unassigned pool see only the visible dims.
    let mut restricted = vec![true; n];
    val.iter().chain(&test).for_each(|&v| restricted[v] = false);

    let mut rng = stream(spec.seed, Stream::Features);
    let visible = spec.visible_dims_per_class();
    let noise_start = c * spec.signature_dims_per_class;
    let mut triplets = Vec::new();
    for v in 0..n {
        let sig = spec.signature(labels[v]);
        let pool = if restricted[v] {
            sig.start..sig.start + visible
        } else {
            sig
        };
        let mut active: Vec<usize> = pool
            .clone()
            .filter(|_| rng.random::<f64>() < spec.activation_prob)
            .collect();
        if active.is_empty() {
            active.push(rng.random_range(pool));
        }
        for d in noise_start..spec.num_features {
            if rng.random::<f64>() < spec.noise_prob {
                active.push(d);
            }
        }
        triplets.extend(active.into_iter().map(|d| (v, d, 1.0)));
    }
    let features = FeatureMatrix::from_triplets(n, spec.num_features, triplets)?;
    let split = NodeSplit::new(train, val, test, n)?;
    Dataset::new(
        format!("synthetic-{}", spec.seed),
        graph,
        features,
        labels,
        c,
        split,
    )
}
