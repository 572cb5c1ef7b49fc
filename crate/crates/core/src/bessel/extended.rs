//! Extended-precision evaluation of `log I_s(x)` on a software float.
//!
//! The ascending series is summed with `precision_bits` of working
//! precision, and `ln Γ(s+1)` comes from Stirling's series with exact
//! rational Bernoulli numbers. This path is slow; it serves requests below
//! double-precision reach and acts as a reference for the fast paths.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_int::{IBig, UBig};
use dashu_ratio::RBig;

use crate::error::{Result, VmfError};

pub type ExtFloat = FBig<HalfEven, 2>;

/// Lift an `f64` to a software float with `bits` of precision (exact).
pub fn ext_from_f64(v: f64, bits: usize) -> ExtFloat {
    ExtFloat::try_from(v)
        .expect("finite f64")
        .with_precision(bits)
        .value()
}

fn ext_from_u64(v: u64, bits: usize) -> ExtFloat {
    ExtFloat::from(UBig::from(v)).with_precision(bits).value()
}

/// Round to the nearest `f64`.
pub fn ext_to_f64(v: &ExtFloat) -> f64 {
    v.to_f64().value()
}

/// Even-index Bernoulli numbers `B_2, B_4, ..., B_{2n}` (Akiyama–Tanigawa).
fn bernoulli_even(n: usize) -> Vec<RBig> {
    let top = 2 * n;
    let mut a: Vec<RBig> = Vec::with_capacity(top + 1);
    let mut out = Vec::with_capacity(n);
    for m in 0..=top {
        a.push(RBig::from_parts(IBig::ONE, UBig::from(m as u64 + 1)));
        for j in (1..=m).rev() {
            let diff = &a[j - 1] - &a[j];
            a[j - 1] = diff * RBig::from(j as u64);
        }
        if m >= 2 && m % 2 == 0 {
            out.push(a[0].clone());
        }
    }
    out
}

fn ratio_to_ext(r: &RBig, bits: usize) -> ExtFloat {
    let num = ExtFloat::from(r.numerator().clone())
        .with_precision(bits)
        .value();
    let den = ExtFloat::from(r.denominator().clone())
        .with_precision(bits)
        .value();
    num / den
}

/// `ln Γ(z)` with `bits` of working precision.
pub fn ln_gamma_extended(z: f64, bits: usize) -> ExtFloat {
    assert!(z > 0.0 && z.is_finite());
    let threshold = bits as f64 / 2.0 + 10.0;
    let shift = if z < threshold {
        (threshold - z).ceil() as u64
    } else {
        0
    };
    let z0 = ext_from_f64(z, bits);
    let mut prod = ext_from_u64(1, bits);
    for j in 0..shift {
        prod *= &z0 + ext_from_u64(j, bits);
    }
    let w = &z0 + ext_from_u64(shift, bits);
    let half = ext_from_f64(0.5, bits);
    let two_pi = ExtFloat::pi(bits) * ext_from_u64(2, bits);
    let mut acc = (&w - &half) * w.ln() - &w + &half * two_pi.ln();

    // Stirling corrections B_{2k} / (2k(2k-1) w^{2k-1}); stop once below 2^-bits.
    let max_k = bits / 4 + 8;
    let bern = bernoulli_even(max_k);
    let tol = ext_from_f64(2f64.powi(-(bits as i32) - 8), bits);
    let w2 = &w * &w;
    let mut wpow = w.clone();
    for (i, b) in bern.iter().enumerate() {
        let k = (i + 1) as u64;
        let denom = ext_from_u64(2 * k * (2 * k - 1), bits) * &wpow;
        let term = ratio_to_ext(b, bits) / denom;
        let below = term < tol && -term.clone() < tol;
        acc += &term;
        if below {
            break;
        }
        wpow *= &w2;
    }
    if shift > 0 {
        acc -= prod.ln();
    }
    acc
}

/// `log I_s(x)` evaluated entirely in extended precision.
pub fn log_bessel_i_extended_raw(
    s: f64,
    x: f64,
    bits: usize,
    max_terms: usize,
) -> Result<ExtFloat> {
    if !(s.is_finite() && s >= 0.0) || !(x.is_finite() && x > 0.0) {
        return Err(VmfError::invalid(format!(
            "log_bessel_i_extended requires finite s >= 0 and x > 0 (got s={s}, x={x})"
        )));
    }
    let sx = ext_from_f64(s, bits);
    let xx = ext_from_f64(x, bits);
    let half = ext_from_f64(0.5, bits);
    let q = &xx * &xx / ext_from_u64(4, bits);
    let one = ext_from_u64(1, bits);
    let mut sum = one.clone();
    let mut term = one;
    let eps = ext_from_f64(2f64.powi(-(bits as i32) - 4), bits);
    let mut converged = false;
    for k in 1..=max_terms as u64 {
        let kk = ext_from_u64(k, bits);
        term = term * &q / (&kk * (&sx + &kk));
        sum += &term;
        let ratio_small = {
            let k1 = ext_from_u64(k + 1, bits);
            let next_den = &k1 * (&sx + &k1);
            &q * ext_from_u64(2, bits) <= next_den
        };
        if ratio_small && term <= &sum * &eps {
            converged = true;
            break;
        }
    }
    let prefactor = if s == 0.0 {
        ExtFloat::ZERO.with_precision(bits).value()
    } else {
        &sx * (&xx * &half).ln()
    };
    let value = prefactor - ln_gamma_extended(s + 1.0, bits) + sum.ln();
    if !converged {
        return Err(VmfError::numerical(
            format!("extended series for I_{s}({x}) did not converge in {max_terms} terms"),
            Some(ext_to_f64(&value)),
        ));
    }
    Ok(value)
}

/// `log I_s(x)` in extended precision, rounded to `f64`.
pub fn log_bessel_i_extended(s: f64, x: f64, bits: usize, max_terms: usize) -> Result<f64> {
    log_bessel_i_extended_raw(s, x, bits, max_terms).map(|v| ext_to_f64(&v))
}
