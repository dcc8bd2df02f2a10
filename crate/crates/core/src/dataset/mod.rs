//! Datasets: graph, sparse features, labels and split, plus the on-disk
//! format and a synthetic benchmark generator.

mod features;
mod io;
mod synth;

pub use features::FeatureMatrix;
pub use io::{load_dataset, save_dataset, Scale};
pub use synth::{generate_synthetic, SynthSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSplit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub n: usize,
    #[serde(rename = "F")]
    pub num_features: usize,
    #[serde(rename = "C")]
    pub num_classes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub split: NodeSplit,
}

impl Dataset {
    /// Assembles a dataset and checks that all parts agree.
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        features: FeatureMatrix,
        labels: Vec<usize>,
        num_classes: usize,
        split: NodeSplit,
    ) -> Result<Self> {
        let n = graph.n();
        if features.n() != n {
            return Err(Error::InvalidDataset(format!(
                "feature matrix has {} rows for {n} nodes",
                features.n()
            )));
        }
        if labels.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {n} nodes",
                labels.len()
            )));
        }
        if let Some((v, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(Error::InvalidDataset(format!(
                "label {y} of node {v} not below C = {num_classes}"
            )));
        }
        // Re-run the split checks so hand-built datasets get the same guarantees.
        let split = NodeSplit::new(split.train, split.val, split.test, n)?;
        Ok(Self {
            name: name.into(),
            graph,
            features,
            labels,
            num_classes,
            split,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn num_features(&self) -> usize {
        self.features.num_features()
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            name: self.name.clone(),
            n: self.n(),
            num_features: self.num_features(),
            num_classes: self.num_classes,
        }
    }

    /// Copy of this dataset with a different split.
    pub fn with_split(&self, split: NodeSplit) -> Result<Self> {
        Dataset::new(
            self.name.clone(),
            self.graph.clone(),
            self.features.clone(),
            self.labels.clone(),
            self.num_classes,
            split,
        )
    }

    /// Copy with replaced features (same node count).
    pub fn with_features(&self, features: FeatureMatrix) -> Result<Self> {
        Dataset::new(
            self.name.clone(),
            self.graph.clone(),
            features,
            self.labels.clone(),
            self.num_classes,
            self.split.clone(),
        )
    }
}
