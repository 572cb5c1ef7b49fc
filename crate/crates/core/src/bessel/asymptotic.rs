//! Large-argument expansions of `log I_ν(x)`.
//!
//! Two expansions are used above the series region:
//! * Hankel's expansion in `1/x`, accurate when `ν²` is small next to `x`;
//! * Debye's uniform expansion in `1/ν`, accurate when `ν` itself is large.
//!
//! Both return an error estimate (magnitude of the last retained correction
//! relative to the partial sum) so the caller can pick whichever converged.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Number of Debye polynomials `u_0 ..= u_{DEBYE_TERMS-1}` generated.
const DEBYE_TERMS: usize = 20;

const HANKEL_MAX_TERMS: usize = 200;

/// `log I_ν(x)` and its estimated error on the log scale.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Expansion {
    pub value: f64,
    pub err: f64,
}

/// Hankel: `I_ν(x) ~ e^x / sqrt(2πx) · Σ_k (-1)^k a_k(ν) / x^k`.
pub(crate) fn hankel(nu: f64, x: f64) -> Expansion {
    let mu = 4.0 * nu * nu;
    let mut sum = 1.0f64;
    let mut term = 1.0f64;
    let mut err = f64::INFINITY;
    for k in 1..=HANKEL_MAX_TERMS {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = -term * (mu - odd * odd) / (8.0 * kf * x);
        if next.abs() >= term.abs() && k > 1 {
            // the series has started to diverge; stop at the smallest term
            err = term.abs() / sum.abs();
            break;
        }
        term = next;
        sum += term;
        err = term.abs() / sum.abs();
        if err < 0.25 * f64::EPSILON || term == 0.0 {
            break;
        }
    }
    Expansion {
        value: x - 0.5 * (2.0 * PI * x).ln() + sum.ln(),
        err,
    }
}

/// Debye: `I_ν(νz) ~ e^{νη} / (sqrt(2πν) (1+z²)^{1/4}) · Σ_k u_k(p) / ν^k`,
/// `p = 1/sqrt(1+z²)`, written directly in terms of `x` and `ν`.
pub(crate) fn debye(nu: f64, x: f64) -> Expansion {
    debug_assert!(nu > 0.0);
    let root = nu.hypot(x);
    let p = nu / root;
    let polys = debye_polynomials();
    let mut sum = 1.0f64;
    let mut inv_nu_pow = 1.0f64;
    let mut prev = f64::INFINITY;
    let mut err = f64::INFINITY;
    for poly in polys.iter().skip(1) {
        inv_nu_pow /= nu;
        let term = eval_poly(poly, p) * inv_nu_pow;
        if term.abs() > prev && prev < 1e-3 {
            break;
        }
        sum += term;
        prev = term.abs();
        err = term.abs() / sum.abs();
        if err < 0.25 * f64::EPSILON {
            break;
        }
    }
    // ν·η = sqrt(ν²+x²) + ν·ln(x / (ν + sqrt(ν²+x²)))
    let nu_eta = root + nu * (x / (nu + root)).ln();
    Expansion {
        value: nu_eta - 0.5 * (2.0 * PI * root).ln() + sum.ln(),
        err,
    }
}

fn eval_poly(coeffs: &[f64], p: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * p + c)
}

/// Coefficients (ascending powers of p) of the Debye polynomials, from
/// `u_{k+1}(p) = p²(1-p²)/2 · u_k'(p) + 1/8 ∫_0^p (1 - 5t²) u_k(t) dt`.
fn debye_polynomials() -> &'static [Vec<f64>] {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys: Vec<Vec<f64>> = vec![vec![1.0]];
        for _ in 1..DEBYE_TERMS {
            let u = polys.last().unwrap();
            let mut next = vec![0.0; u.len() + 3];
            // p²(1-p²)/2 · u'
            for (i, &c) in u.iter().enumerate().skip(1) {
                let dc = c * i as f64;
                // dc · p^{i-1} · (p² - p⁴)/2
                next[i + 1] += 0.5 * dc;
                next[i + 3] -= 0.5 * dc;
            }
            // 1/8 ∫ (1 - 5t²) u
            for (i, &c) in u.iter().enumerate() {
                next[i + 1] += 0.125 * c / (i as f64 + 1.0);
                if i + 3 < next.len() {
                    next[i + 3] -= 0.625 * c / (i as f64 + 3.0);
                }
            }
            while next.last() == Some(&0.0) {
                next.pop();
            }
            polys.push(next);
        }
        polys
    })
}
