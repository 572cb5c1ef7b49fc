//! First-order ascent steppers over a flat parameter vector.

use serde::{Deserialize, Serialize};

/// Update rule for stochastic-gradient fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    /// `θ ← θ + lr·g`
    PlainSgd,
    /// Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    #[default]
    AdaptiveMoment,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Optimizer state for a fixed-length parameter vector.
#[derive(Debug, Clone)]
pub struct Stepper {
    kind: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Stepper {
    pub fn new(kind: Optimizer, len: usize) -> Self {
        let (m, v) = match kind {
            Optimizer::PlainSgd => (Vec::new(), Vec::new()),
            Optimizer::AdaptiveMoment => (vec![0.0; len], vec![0.0; len]),
        };
        Stepper { kind, m, v, t: 0 }
    }

    /// Moves `params` along the ascent direction derived from `grad`.
    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grad.len());
        match self.kind {
            Optimizer::PlainSgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p += lr * g;
                }
            }
            Optimizer::AdaptiveMoment => {
                self.t = self.t.saturating_add(1);
                let c1 = 1.0 - BETA1.powi(self.t);
                let c2 = 1.0 - BETA2.powi(self.t);
                for (i, (p, &g)) in params.iter_mut().zip(grad).enumerate() {
                    self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
                    self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    *p += lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }
}
