use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LabelVector;
use crate::error::{Result, VmfError};
use crate::rng::{split_rng, VmfRng};
use crate::vmf::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub seed: u64,
    pub max_iters: usize,
    pub n_init: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            seed: 0,
            max_iters: 300,
            n_init: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansFit {
    pub labels: LabelVector,
    pub centers: Array2<f64>,
    /// Within-cluster sum of squared Euclidean distances.
    pub inertia: f64,
    pub iterations: usize,
}

/// Lloyd's algorithm with k-means++ seeding, best of `n_init` restarts.
///
/// Restart `r` draws from its own stream of the seeded generator, so
/// results do not depend on how many restarts precede it. A cluster that
/// empties is reseeded at the point farthest from its assigned center.
pub fn kmeans(data: &Dataset, k: usize, cfg: &KMeansConfig) -> Result<KMeansFit> {
    if k == 0 {
        return Err(VmfError::invalid("k must be >= 1"));
    }
    if data.len() < k {
        return Err(VmfError::invalid(format!(
            "need at least {k} points for {k} clusters, got {}",
            data.len()
        )));
    }
    if cfg.n_init == 0 || cfg.max_iters == 0 {
        return Err(VmfError::invalid("n_init and max_iters must be >= 1"));
    }
    let mut best: Option<KMeansFit> = None;
    for restart in 0..cfg.n_init {
        let mut rng = split_rng(cfg.seed, restart as u64);
        let fit = lloyd(data, plus_plus_seeds(data, k, &mut rng), cfg.max_iters)?;
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

fn sq_dist(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++: first center uniform, then sampled proportionally to squared distance.
fn plus_plus_seeds(data: &Dataset, k: usize, rng: &mut VmfRng) -> Array2<f64> {
    let n = data.len();
    let mut centers = Array2::zeros((k, data.dim()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&data.row(first));
    let mut d2: Array1<f64> = (0..n)
        .map(|i| sq_dist(data.row(i), data.row(first)))
        .collect();
    for c in 1..k {
        let total = d2.sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&data.row(pick));
        for i in 0..n {
            d2[i] = d2[i].min(sq_dist(data.row(i), data.row(pick)));
        }
    }
    centers
}

fn nearest(centers: &Array2<f64>, x: ndarray::ArrayView1<'_, f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.rows().into_iter().enumerate() {
        let d = sq_dist(x, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd(data: &Dataset, mut centers: Array2<f64>, max_iters: usize) -> Result<KMeansFit> {
    let n = data.len();
    let k = centers.nrows();
    let mut labels = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    let mut iterations = 0;
    loop {
        let mut changed = false;
        for i in 0..n {
            let (c, d) = nearest(&centers, data.row(i));
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
            dists[i] = d;
        }
        if !changed || iterations == max_iters {
            break;
        }
        iterations += 1;

        let mut sums = Array2::<f64>::zeros(centers.raw_dim());
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            sums.row_mut(c).scaled_add(1.0, &data.row(i));
            counts[c] += 1;
        }
        let mut taken = Vec::new();
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let mean = &sums.row(c) / count as f64;
                centers.row_mut(c).assign(&mean);
                continue;
            }
            // empty cluster: move it to the worst-served point
            let far = (0..n)
                .filter(|i| !taken.contains(i))
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                .expect("n >= k");
            taken.push(far);
            centers.row_mut(c).assign(&data.row(far));
            dists[far] = 0.0;
        }
    }
    let inertia = dists.iter().sum();
    Ok(KMeansFit {
        labels: LabelVector::new(labels, k)?,
        centers,
        inertia,
        iterations,
    })
}
