//! Modified Bessel function of the first kind, in the log domain.
//!
//! vMF normalizers need `log I_s(κ)` with `s = d/2 - 1`, which for large `d`
//! and small `κ` lies far below the smallest positive `f64`. Nothing here
//! ever forms `I_s(x)` itself:
//!
//! * `x <= max(s, 20)`: ascending series with a log-domain prefactor;
//! * above that: Hankel's expansion when it converges to full precision,
//!   else Debye's uniform expansion, else the series again;
//! * `target_rel_err` below double-precision reach: the same series on a
//!   software float with `precision_bits` of mantissa.
//!
//! The ratio `I_{s+1}/I_s` has its own continued-fraction path.

mod asymptotic;
pub mod extended;
mod gamma;
mod ratio;
pub(crate) mod series;

pub use extended::log_bessel_i_extended;
pub use gamma::ln_gamma;

use crate::error::{Result, VmfError};
use series::SeriesOutcome;

/// Series region boundary for small orders.
const SERIES_MIN_ARG: f64 = 20.0;

/// Requests tighter than this go to the extended-precision path.
const DOUBLE_REACH: f64 = 4.0 * f64::EPSILON;

/// Expansions must resolve the sum to this relative accuracy to be used.
const EXPANSION_TOL: f64 = 2.0 * f64::EPSILON;

const RATIO_MAX_ITER: usize = 1_000_000;

/// Order `s >= 0` of a modified Bessel function.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BesselOrder(f64);

impl BesselOrder {
    pub fn new(s: f64) -> Result<Self> {
        if !s.is_finite() || s < 0.0 {
            return Err(VmfError::invalid(format!(
                "Bessel order must be finite and >= 0, got {s}"
            )));
        }
        Ok(BesselOrder(s))
    }

    /// The order `d/2 - 1` attached to a vMF density on `S^{d-1}`.
    pub fn for_dim(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(VmfError::invalid(format!(
                "dimension must be >= 2, got {d}"
            )));
        }
        Ok(BesselOrder(d as f64 / 2.0 - 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Accuracy and resource limits for Bessel evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEvalConfig {
    pub target_rel_err: f64,
    pub max_series_terms: usize,
    pub precision_bits: usize,
}

impl Default for BesselEvalConfig {
    fn default() -> Self {
        BesselEvalConfig {
            target_rel_err: 1e-12,
            max_series_terms: 10_000,
            precision_bits: 256,
        }
    }
}

impl BesselEvalConfig {
    fn validate(&self) -> Result<()> {
        if !(self.target_rel_err > 0.0) {
            return Err(VmfError::invalid("target_rel_err must be > 0"));
        }
        if self.max_series_terms < 1 {
            return Err(VmfError::invalid("max_series_terms must be >= 1"));
        }
        if self.precision_bits < 64 {
            return Err(VmfError::invalid("precision_bits must be >= 64"));
        }
        Ok(())
    }
}

/// `log I_s(x)` for `x > 0`.
///
/// The result is finite for every admissible input; for high orders and
/// small arguments it is a large negative number rather than `-inf`.
pub fn log_bessel_i(s: BesselOrder, x: f64, cfg: &BesselEvalConfig) -> Result<f64> {
    cfg.validate()?;
    if !x.is_finite() || x <= 0.0 {
        return Err(VmfError::invalid(format!(
            "log_bessel_i requires a finite x > 0, got {x}"
        )));
    }
    let s = s.0;
    if cfg.target_rel_err < DOUBLE_REACH {
        return log_bessel_i_extended(s, x, cfg.precision_bits, cfg.max_series_terms);
    }
    if x <= s.max(SERIES_MIN_ARG) {
        return series_or_fail(s, x, cfg);
    }

    let hankel = asymptotic::hankel(s, x);
    if hankel.err <= EXPANSION_TOL {
        return Ok(hankel.value);
    }
    let debye = (s > 0.0).then(|| asymptotic::debye(s, x));
    if let Some(e) = debye {
        if e.err <= EXPANSION_TOL {
            return Ok(e.value);
        }
    }
    match series::log_bessel_i_series(s, x, cfg.max_series_terms) {
        SeriesOutcome::Converged { value, .. } => Ok(value),
        SeriesOutcome::Exhausted { partial, terms } => {
            // fall back to the better expansion if it meets the caller's tolerance
            let best = match debye {
                Some(d) if d.err < hankel.err => d,
                _ => hankel,
            };
            if best.err <= cfg.target_rel_err * best.value.abs() {
                Ok(best.value)
            } else {
                Err(VmfError::numerical(
                    format!("log I_{s}({x}): series not converged after {terms} terms"),
                    Some(partial),
                ))
            }
        }
    }
}

fn series_or_fail(s: f64, x: f64, cfg: &BesselEvalConfig) -> Result<f64> {
    match series::log_bessel_i_series(s, x, cfg.max_series_terms) {
        SeriesOutcome::Converged { value, .. } => Ok(value),
        SeriesOutcome::Exhausted { partial, terms } => Err(VmfError::numerical(
            format!("log I_{s}({x}): series not converged after {terms} terms"),
            Some(partial),
        )),
    }
}

/// `I_{s+1}(x) / I_s(x)` for `x >= 0`, in `[0, 1)`.
pub fn bessel_ratio(s: BesselOrder, x: f64, cfg: &BesselEvalConfig) -> Result<f64> {
    cfg.validate()?;
    if !x.is_finite() || x < 0.0 {
        return Err(VmfError::invalid(format!(
            "bessel_ratio requires a finite x >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    match ratio::perron_ratio(s.0, x, RATIO_MAX_ITER) {
        Some((r, _)) => Ok(r),
        None => Err(VmfError::numerical(
            format!(
                "continued fraction for I_{{s+1}}/I_s at s={}, x={x} did not converge",
                s.0
            ),
            None,
        )),
    }
}

/// Shorthand for `bessel_ratio(d/2 - 1, kappa)` with default settings.
pub(crate) fn mean_resultant(d: usize, kappa: f64) -> Result<f64> {
    bessel_ratio(
        BesselOrder::for_dim(d)?,
        kappa,
        &BesselEvalConfig::default(),
    )
}

/// Shorthand for `log_bessel_i(d/2 - 1, kappa)` with default settings.
pub(crate) fn log_bessel_for_dim(d: usize, kappa: f64) -> Result<f64> {
    log_bessel_i(
        BesselOrder::for_dim(d)?,
        kappa,
        &BesselEvalConfig::default(),
    )
}

/// Approximate solution κ of `I_{d/2}(κ)/I_{d/2-1}(κ) = r`:
/// `κ ≈ (d·r - r³) / (1 - r²)`.
pub fn invert_bessel_ratio(d: usize, r: f64) -> Result<f64> {
    if d < 2 {
        return Err(VmfError::invalid(format!(
            "dimension must be >= 2, got {d}"
        )));
    }
    if !r.is_finite() || r < 0.0 {
        return Err(VmfError::Domain(format!(
            "mean resultant length must lie in [0, 1), got {r}"
        )));
    }
    if r >= 1.0 {
        return Err(VmfError::Domain(format!(
            "mean resultant length {r} >= 1: data are fully concentrated"
        )));
    }
    let df = d as f64;
    Ok((df * r - r * r * r) / (1.0 - r * r))
}

/// Solves `I_{d/2}(κ)/I_{d/2-1}(κ) = r` to working precision.
///
/// Newton's method started from [`invert_bessel_ratio`], using
/// `A'(κ) = 1 - A² - (d-1)A/κ`. The ratio is concave in κ, so once an
/// iterate falls below the root the sequence increases monotonically.
pub fn solve_bessel_ratio(d: usize, r: f64) -> Result<f64> {
    let mut kappa = invert_bessel_ratio(d, r)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    let df = d as f64;
    for _ in 0..100 {
        let a = mean_resultant(d, kappa)?;
        let slope = 1.0 - a * a - (df - 1.0) * a / kappa;
        if !(slope > 0.0) {
            break;
        }
        let mut next = kappa - (a - r) / slope;
        if !(next > 0.0) {
            next = 0.5 * kappa;
        }
        let done = (next - kappa).abs() <= 4.0 * f64::EPSILON * kappa;
        kappa = next;
        if done {
            break;
        }
    }
    Ok(kappa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn solved_ratio_round_trips() {
        for d in [2usize, 3, 5, 20, 100, 1000] {
            for r in [1e-4, 0.05, 0.3, 0.6, 0.9, 0.99, 0.9999, 1.0 - 1e-9] {
                let k = solve_bessel_ratio(d, r).unwrap();
                let back = mean_resultant(d, k).unwrap();
                assert!((back - r).abs() <= 1e-13, "d={d} r={r} k={k} back={back}");
            }
        }
        assert_eq!(solve_bessel_ratio(5, 0.0).unwrap(), 0.0);
    }

    fn lbi(s: f64, x: f64) -> f64 {
        log_bessel_i(
            BesselOrder::new(s).unwrap(),
            x,
            &BesselEvalConfig::default(),
        )
        .unwrap()
    }

    fn ratio(s: f64, x: f64) -> f64 {
        bessel_ratio(
            BesselOrder::new(s).unwrap(),
            x,
            &BesselEvalConfig::default(),
        )
        .unwrap()
    }

    /// Independent oracle: the leading small-argument terms
    /// log[(x/2)^s / Γ(s+1)] + log(1 + y + y²/2!/(s+2)... ), y = x²/(4(s+1)).
    fn small_argument_oracle(s: f64, x: f64) -> f64 {
        let y = x * x / 4.0;
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..6 {
            term *= y / (k as f64 * (s + k as f64));
            sum += term;
        }
        s * (x / 2.0).ln() - ln_gamma(s + 1.0) + f64::ln_1p(sum)
    }

    #[test]
    fn high_order_tiny_argument_stays_finite() {
        let got = lbi(100.0, 0.03);
        assert!(got.is_finite() && got < -700.0, "{got}");
        let oracle = small_argument_oracle(100.0, 0.03);
        assert!((got - oracle).abs() <= 1e-12 * oracle.abs());
        // the linear-domain value is not representable
        assert_eq!(got.exp(), 0.0);
    }

    #[test]
    fn half_order_at_one() {
        let exact = ((2.0 / std::f64::consts::PI).sqrt() * 1f64.sinh()).ln();
        assert!((exact.exp() - 0.937674).abs() < 1e-6);
        assert!((lbi(0.5, 1.0) - exact).abs() <= 1e-14);
    }

    #[test]
    fn order_zero_near_zero() {
        assert!(lbi(0.0, 1e-10).abs() < 1e-20);
        assert!(lbi(0.0, 1e-300).abs() == 0.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let cfg = BesselEvalConfig::default();
        let s = BesselOrder::new(1.0).unwrap();
        assert!(matches!(
            log_bessel_i(s, 0.0, &cfg),
            Err(VmfError::InvalidArgument(_))
        ));
        assert!(matches!(
            log_bessel_i(s, f64::NAN, &cfg),
            Err(VmfError::InvalidArgument(_))
        ));
        assert!(matches!(
            bessel_ratio(s, f64::INFINITY, &cfg),
            Err(VmfError::InvalidArgument(_))
        ));
        assert!(BesselOrder::new(-1.0).is_err());
        assert!(BesselOrder::new(f64::NAN).is_err());
        let bad = BesselEvalConfig {
            target_rel_err: 0.0,
            ..cfg
        };
        assert!(log_bessel_i(s, 1.0, &bad).is_err());
    }

    #[test]
    fn series_budget_exhaustion_carries_partial() {
        // x = 15 sits in the series region; two terms cannot converge
        let cfg = BesselEvalConfig {
            max_series_terms: 2,
            ..Default::default()
        };
        match log_bessel_i(BesselOrder::new(3.0).unwrap(), 15.0, &cfg) {
            Err(VmfError::Numerical {
                partial: Some(p), ..
            }) => assert!(p.is_finite()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tight_tolerance_uses_extended_path() {
        let cfg = BesselEvalConfig {
            target_rel_err: 1e-20,
            ..Default::default()
        };
        let v = log_bessel_i(BesselOrder::new(0.5).unwrap(), 1.0, &cfg).unwrap();
        let exact = ((2.0 / std::f64::consts::PI).sqrt() * 1f64.sinh()).ln();
        assert!((v - exact).abs() <= 1e-16);
    }

    #[test]
    fn fast_paths_agree_with_extended_precision() {
        let orders = [0.0, 0.5, 1.0, 1.5, 4.0, 9.0, 12.5, 49.0, 99.0, 200.0];
        let args = [
            1e-4, 0.03, 0.7, 5.0, 19.9, 20.1, 23.0, 37.0, 60.0, 150.0, 400.0, 2500.0,
        ];
        for &s in &orders {
            for &x in &args {
                let fast = lbi(s, x);
                let slow = log_bessel_i_extended(s, x, 192, 100_000).unwrap();
                let tol = 4e-15 * slow.abs().max(1.0);
                assert!((fast - slow).abs() <= tol, "s={s} x={x}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn ratio_zero_argument() {
        for s in [0.0, 0.5, 7.0, 300.0] {
            assert_eq!(ratio(s, 0.0), 0.0);
        }
    }

    #[test]
    fn ratio_half_order_closed_form() {
        let exact = 1.0 / 2f64.tanh() - 0.5;
        assert!((exact - 0.537315).abs() < 1e-6);
        assert!((ratio(0.5, 2.0) - exact).abs() < 1e-15);
    }

    #[test]
    fn ratio_agrees_with_log_difference() {
        let r = ratio(1.5, 50.0);
        assert!(r > 0.9 && r < 1.0);
        let via_logs = (lbi(2.5, 50.0) - lbi(1.5, 50.0)).exp();
        assert!((r - via_logs).abs() <= 1e-10 * via_logs);
    }

    #[test]
    fn ratio_agrees_with_extended_log_difference_on_grid() {
        for &s in &[0.0, 0.5, 1.5, 9.0, 49.0, 150.0] {
            for &x in &[1e-3, 0.3, 3.0, 30.0, 300.0, 3000.0] {
                let a = extended::log_bessel_i_extended_raw(s + 1.0, x, 192, 100_000).unwrap();
                let b = extended::log_bessel_i_extended_raw(s, x, 192, 100_000).unwrap();
                let want = extended::ext_to_f64(&(a - b)).exp();
                let got = ratio(s, x);
                assert!(
                    (got - want).abs() <= 1e-13 * want,
                    "s={s} x={x}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn inversion_examples() {
        assert!((invert_bessel_ratio(5, 0.5).unwrap() - 2.375 / 0.75).abs() < 1e-14);
        assert_eq!(invert_bessel_ratio(17, 0.0).unwrap(), 0.0);
        let k = invert_bessel_ratio(20, 0.9).unwrap();
        assert!((k - (18.0 - 0.729) / 0.19).abs() < 1e-12);
        assert!((ratio(9.0, k) - 0.9).abs() < 0.01);
    }

    #[test]
    fn inversion_rejects_out_of_domain() {
        assert!(matches!(
            invert_bessel_ratio(5, 1.0),
            Err(VmfError::Domain(_))
        ));
        assert!(matches!(
            invert_bessel_ratio(5, 1.5),
            Err(VmfError::Domain(_))
        ));
        assert!(matches!(
            invert_bessel_ratio(5, -0.1),
            Err(VmfError::Domain(_))
        ));
        assert!(matches!(
            invert_bessel_ratio(1, 0.5),
            Err(VmfError::InvalidArgument(_))
        ));
    }

    #[test]
    fn inversion_round_trip() {
        for d in [5usize, 20, 100] {
            let s = d as f64 / 2.0 - 1.0;
            for i in 1..=19 {
                let r = 0.05 * i as f64;
                let k = invert_bessel_ratio(d, r).unwrap();
                assert!((ratio(s, k) - r).abs() <= 0.02, "d={d} r={r}");
            }
        }
    }

    #[test]
    fn ratio_strictly_increasing_on_grid() {
        for &s in &[0.0, 0.5, 1.5, 9.0, 49.0, 200.0] {
            let mut prev = 0.0;
            for i in 0..400 {
                let x = 1e-4 * 10f64.powf(i as f64 / 50.0);
                let r = ratio(s, x);
                assert!(r > prev, "s={s} x={x}");
                prev = r;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn recurrence_holds_in_log_form(s in 1.0f64..200.0, lx in -4.0f64..4.0) {
            // I_{s-1} = I_{s+1} + (2s/x) I_s
            let x = 10f64.powf(lx);
            let lhs = lbi(s - 1.0, x);
            let a = lbi(s + 1.0, x);
            let b = (2.0 * s / x).ln() + lbi(s, x);
            let m = a.max(b);
            let rhs = m + ((a - m).exp() + (b - m).exp()).ln();
            prop_assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0), "{} vs {}", lhs, rhs);
        }

        #[test]
        fn fast_path_matches_extended(s in 0.0f64..500.0, lx in -3.0f64..3.5) {
            let x = 10f64.powf(lx);
            let fast = lbi(s, x);
            let slow = log_bessel_i_extended(s, x, 160, 100_000).unwrap();
            // double precision cannot beat the cancellation between the prefactor terms
            let scale = slow.abs().max(1.0) + (s * (x / 2.0).ln()).abs() + ln_gamma(s + 1.0);
            prop_assert!((fast - slow).abs() <= 4.0 * f64::EPSILON * scale, "s={} x={}: {} vs {}", s, x, fast, slow);
        }

        #[test]
        fn ratio_within_amos_bounds(s in 0.0f64..200.0, lx in -4.0f64..4.0) {
            let x = 10f64.powf(lx);
            let r = ratio(s, x);
            let lower = x / (s + 1.0 + ((s + 1.0).powi(2) + x * x).sqrt());
            prop_assert!(r >= lower * (1.0 - 1e-14));
            prop_assert!(r < 1.0);
        }
    }
}
