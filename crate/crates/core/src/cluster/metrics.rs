use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::LabelVector;
use crate::error::{Result, VmfError};

/// Denominator used to normalize mutual information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NmiNormalization {
    /// `(H(a) + H(b)) / 2`
    #[default]
    Arithmetic,
    /// `sqrt(H(a) H(b))`
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterMetrics {
    pub ari: f64,
    pub nmi: f64,
}

impl ClusterMetrics {
    pub fn compare(pred: &LabelVector, truth: &LabelVector) -> Result<Self> {
        Ok(ClusterMetrics {
            ari: adjusted_rand_index(pred, truth)?,
            nmi: normalized_mutual_information(pred, truth)?,
        })
    }
}

fn contingency(a: &LabelVector, b: &LabelVector) -> Result<Array2<f64>> {
    if a.len() != b.len() {
        return Err(VmfError::invalid(format!(
            "labelings differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(VmfError::invalid("labelings are empty"));
    }
    let mut table = Array2::zeros((a.k(), b.k()));
    for (&i, &j) in a.labels().iter().zip(b.labels()) {
        table[[i, j]] += 1.0;
    }
    Ok(table)
}

fn same_partition(a: &LabelVector, b: &LabelVector) -> bool {
    let mut ab = std::collections::HashMap::new();
    let mut ba = std::collections::HashMap::new();
    a.labels()
        .iter()
        .zip(b.labels())
        .all(|(&x, &y)| *ab.entry(x).or_insert(y) == y && *ba.entry(y).or_insert(x) == x)
}

fn choose2(n: f64) -> f64 {
    0.5 * n * (n - 1.0)
}

/// Hubert–Arabie adjusted Rand index.
///
/// When the expected and maximal indices coincide (both labelings are a
/// single cluster, or both are all singletons) the score is 1 for identical
/// partitions and 0 otherwise.
pub fn adjusted_rand_index(a: &LabelVector, b: &LabelVector) -> Result<f64> {
    let table = contingency(a, b)?;
    let n = a.len() as f64;
    let index: f64 = table.iter().map(|&v| choose2(v)).sum();
    let rows: f64 = table.rows().into_iter().map(|r| choose2(r.sum())).sum();
    let cols: f64 = table.columns().into_iter().map(|c| choose2(c.sum())).sum();
    let expected = rows * cols / choose2(n).max(f64::MIN_POSITIVE);
    let max = 0.5 * (rows + cols);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(if same_partition(a, b) { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

/// Mutual information normalized by the arithmetic mean of the entropies.
pub fn normalized_mutual_information(a: &LabelVector, b: &LabelVector) -> Result<f64> {
    normalized_mutual_information_with(a, b, NmiNormalization::Arithmetic)
}

/// As [`normalized_mutual_information`] with an explicit normalizer.
///
/// If either labeling has zero entropy the score is 1 for identical
/// partitions and 0 otherwise.
pub fn normalized_mutual_information_with(
    a: &LabelVector,
    b: &LabelVector,
    norm: NmiNormalization,
) -> Result<f64> {
    let table = contingency(a, b)?;
    let n = a.len() as f64;
    let entropy = |counts: Vec<f64>| -> f64 {
        counts
            .into_iter()
            .filter(|&c| c > 0.0)
            .map(|c| -(c / n) * (c / n).ln())
            .sum()
    };
    let row_sums: Vec<f64> = table.rows().into_iter().map(|r| r.sum()).collect();
    let col_sums: Vec<f64> = table.columns().into_iter().map(|c| c.sum()).collect();
    let mut mi = 0.0;
    for ((i, j), &v) in table.indexed_iter() {
        if v > 0.0 {
            mi += (v / n) * (n * v / (row_sums[i] * col_sums[j])).ln();
        }
    }
    let (ha, hb) = (entropy(row_sums), entropy(col_sums));
    if ha == 0.0 || hb == 0.0 {
        return Ok(if same_partition(a, b) { 1.0 } else { 0.0 });
    }
    let denom = match norm {
        NmiNormalization::Arithmetic => 0.5 * (ha + hb),
        NmiNormalization::Geometric => (ha * hb).sqrt(),
    };
    Ok((mi / denom).clamp(0.0, 1.0))
}
