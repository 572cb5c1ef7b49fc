//! Ascending power series for `log I_s(x)` in double precision.
//!
//! `I_s(x) = (x/2)^s / Γ(s+1) · Σ_k t_k` with `t_0 = 1` and
//! `t_k = t_{k-1} · (x²/4) / (k (s + k))`. Every term is positive, so the
//! sum never cancels; the only hazards are overflow (handled by rescaling)
//! and underflow of the prefactor (avoided by staying in the log domain).

use super::gamma::ln_gamma;

/// Rescaling threshold for the running sum.
const RESCALE_AT: f64 = 1e280;

/// Outcome of a truncated series evaluation.
#[derive(Debug, Clone, Copy)]
pub(crate) enum SeriesOutcome {
    Converged { value: f64 },
    Exhausted { partial: f64, terms: usize },
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }

    fn scale(&mut self, f: f64) {
        self.sum *= f;
        self.comp *= f;
    }
}

/// `log I_s(x)` by the ascending series.
pub(crate) fn log_bessel_i_series(s: f64, x: f64, max_terms: usize) -> SeriesOutcome {
    let log_prefactor = s * (0.5 * x).ln() - ln_gamma(s + 1.0);
    let (log_sum, terms, converged) = log_series_sum(s, x, max_terms);
    let value = log_prefactor + log_sum;
    if converged {
        SeriesOutcome::Converged { value }
    } else {
        SeriesOutcome::Exhausted {
            partial: value,
            terms,
        }
    }
}

/// `ln Σ_k t_k`, returned with the number of terms used and a convergence flag.
pub(crate) fn log_series_sum(s: f64, x: f64, max_terms: usize) -> (f64, usize, bool) {
    let q = 0.25 * x * x;
    // tail holds Σ_{k>=1} t_k · exp(-log_scale)
    let mut tail = CompensatedSum::default();
    let mut term = 1.0f64;
    let mut log_scale = 0.0f64;
    let mut head = 1.0f64;
    let mut converged = false;
    let mut k = 0usize;
    while k < max_terms {
        k += 1;
        let kf = k as f64;
        term *= q / (kf * (s + kf));
        tail.add(term);
        if tail.value() > RESCALE_AT {
            let f = 1.0 / RESCALE_AT;
            tail.scale(f);
            term *= f;
            head *= f;
            log_scale += RESCALE_AT.ln();
        }
        let next_ratio = q / ((kf + 1.0) * (s + kf + 1.0));
        // remaining tail <= term · r / (1 - r) <= term once r <= 1/2
        if next_ratio <= 0.5 && term <= f64::EPSILON * 0.0625 * (head + tail.value()) {
            converged = true;
            break;
        }
        if term == 0.0 {
            converged = true;
            break;
        }
    }
    let log_sum = if log_scale == 0.0 {
        tail.value().ln_1p()
    } else {
        log_scale + (head + tail.value()).ln()
    };
    (log_sum, k, converged)
}
