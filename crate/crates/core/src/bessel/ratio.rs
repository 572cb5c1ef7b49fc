//! `I_{s+1}(x) / I_s(x)` by Perron's continued fraction.
//!
//! With `ν = s + 1`,
//!
//! ```text
//! I_ν(x)/I_{ν-1}(x) = x / (2ν + x - (2ν+1)x / (2ν+1+2x - (2ν+3)x / (2ν+2+2x - ...)))
//! ```
//!
//! i.e. `b_0 = 2ν + x`, `a_k = -(2ν + 2k - 1) x`, `b_k = 2ν + k + 2x`. Unlike the
//! Gauss fraction, this form converges in a handful of steps for large `x`,
//! and it never subtracts two nearly equal Bessel values.

const TINY: f64 = 1e-300;

/// Returns the ratio and the number of iterations used, or `None` if the
/// fraction did not settle within `max_iter` steps.
pub(crate) fn perron_ratio(s: f64, x: f64, max_iter: usize) -> Option<(f64, usize)> {
    debug_assert!(x > 0.0);
    let nu = s + 1.0;
    let two_nu = 2.0 * nu;
    let mut f = two_nu + x;
    let mut c = f;
    let mut d = 0.0f64;
    for k in 1..=max_iter {
        let kf = k as f64;
        let a = -(two_nu + 2.0 * kf - 1.0) * x;
        let b = two_nu + kf + 2.0 * x;
        d = b + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() <= f64::EPSILON {
            return Some((x / f, k));
        }
    }
    None
}
