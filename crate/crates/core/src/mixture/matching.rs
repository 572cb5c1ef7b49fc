use itertools::Itertools;
use serde::{Deserialize, Serialize};

use super::MixtureParams;
use crate::error::{Result, VmfError};

/// L1 parameter errors under the best component matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedError {
    /// `perm[m]` is the learned component matched to true component `m`.
    pub perm: Vec<usize>,
    /// `Σ_m |α̂ - α|`
    pub alpha: f64,
    /// `Σ_m Σ_j |μ̂_j - μ_j|`
    pub mu: f64,
    /// `Σ_m |κ̂ - κ|`
    pub kappa: f64,
}

impl MatchedError {
    pub fn total(&self) -> f64 {
        self.alpha + self.mu + self.kappa
    }
}

fn errors_for(learned: &MixtureParams, truth: &MixtureParams, perm: &[usize]) -> MatchedError {
    let mut e = MatchedError {
        perm: perm.to_vec(),
        alpha: 0.0,
        mu: 0.0,
        kappa: 0.0,
    };
    for (m, &p) in perm.iter().enumerate() {
        let (l, t) = (&learned.components()[p], &truth.components()[m]);
        e.alpha += (learned.alphas()[p] - truth.alphas()[m]).abs();
        e.mu += l
            .mu()
            .iter()
            .zip(t.mu())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
        e.kappa += (l.kappa() - t.kappa()).abs();
    }
    e
}

/// Minimizes the summed L1 error over all `M!` matchings of learned to true
/// components. Among equal-cost matchings the lexicographically first wins.
pub fn permutation_matched_error(
    learned: &MixtureParams,
    truth: &MixtureParams,
) -> Result<MatchedError> {
    if learned.order() != truth.order() {
        return Err(VmfError::DimensionMismatch {
            expected: truth.order(),
            found: learned.order(),
        });
    }
    if learned.dim() != truth.dim() {
        return Err(VmfError::DimensionMismatch {
            expected: truth.dim(),
            found: learned.dim(),
        });
    }
    let m = truth.order();
    let mut best: Option<MatchedError> = None;
    for perm in (0..m).permutations(m) {
        let e = errors_for(learned, truth, &perm);
        if best.as_ref().is_none_or(|b| e.total() < b.total()) {
            best = Some(e);
        }
    }
    Ok(best.expect("at least one permutation"))
}
