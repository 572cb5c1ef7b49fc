//! Hard clustering on the sphere and partition-agreement scores.

mod kmeans;
mod metrics;

pub use kmeans::{kmeans, KMeansConfig, KMeansFit};
pub use metrics::{
    adjusted_rand_index, normalized_mutual_information, normalized_mutual_information_with,
    ClusterMetrics, NmiNormalization,
};

use serde::{Deserialize, Serialize};

use crate::error::{Result, VmfError};
use crate::mixture::{e_step, MixtureParams};
use crate::vmf::Dataset;

/// Cluster indices in `[0, k)`, one per observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<usize>,
    k: usize,
}

impl LabelVector {
    /// Requires every label to be below `k`.
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(VmfError::invalid(format!(
                "label {bad} out of range for k = {k}"
            )));
        }
        Ok(LabelVector { labels, k })
    }

    /// `k` is one more than the largest label.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(0, |&m| m + 1);
        LabelVector { labels, k }
    }

    /// Maps arbitrary integer ids to `0..k` in order of first appearance.
    pub fn from_raw<T: Eq + std::hash::Hash + Clone>(raw: &[T]) -> Self {
        let mut ids = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|r| {
                let next = ids.len();
                *ids.entry(r.clone()).or_insert(next)
            })
            .collect();
        LabelVector {
            labels,
            k: ids.len(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// `argmax_m q_i(m)`, ties going to the lowest index.
pub fn assign(mix: &MixtureParams, data: &Dataset) -> Result<LabelVector> {
    let q = e_step(mix, data)?;
    let labels = q
        .q()
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (m, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = m;
                }
            }
            best
        })
        .collect();
    LabelVector::new(labels, mix.order())
}
