//! Log-gamma in double precision.

/// `ln Γ(z)` for `z > 0`.
pub fn ln_gamma(z: f64) -> f64 {
    debug_assert!(z > 0.0);
    libm::lgamma(z)
}
