use ndarray::Array1;
use rand::Rng;

use crate::error::{Result, VmfError};
use crate::rng::split_rng;
use crate::vmf::Dataset;

/// Stream reserved for initialization so it never perturbs minibatch order.
pub(crate) const INIT_STREAM: u64 = 1;

/// Picks `m` seed rows: one uniformly at random, then repeatedly the row
/// whose largest cosine to the chosen seeds is smallest.
pub fn furthest_cosine_seeds(data: &Dataset, m: usize, seed: u64) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(VmfError::invalid("order must be >= 1"));
    }
    if data.len() < m {
        return Err(VmfError::invalid(format!(
            "need at least {m} points for {m} components, got {}",
            data.len()
        )));
    }
    let mut rng = split_rng(seed, INIT_STREAM);
    let first = rng.random_range(0..data.len());
    let mut chosen = vec![first];
    let mut best_cos: Array1<f64> = data.rows().dot(&data.row(first));
    while chosen.len() < m {
        let mut pick = None;
        let mut lowest = f64::INFINITY;
        for (i, &c) in best_cos.iter().enumerate() {
            if c < lowest && !chosen.contains(&i) {
                lowest = c;
                pick = Some(i);
            }
        }
        let pick = pick.expect("fewer chosen seeds than rows");
        chosen.push(pick);
        let cos = data.rows().dot(&data.row(pick));
        best_cos.zip_mut_with(&cos, |b, &c| *b = b.max(c));
    }
    Ok(chosen)
}
