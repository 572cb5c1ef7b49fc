//! Exact vMF sampling by the tangent-normal decomposition.
//!
//! A draw is assembled around the first axis `e₁` and rotated onto `μ`:
//!
//! 1. `v` uniform on `S^{d-2}` (normalized Gaussian vector);
//! 2. `w ∈ [-1, 1]` from `p(w) ∝ exp(κw)(1 - w²)^{(d-3)/2}`;
//! 3. `y = [w; sqrt(1 - w²) v]`;
//! 4. `x = U y` with the Householder reflection `U` taking `e₁` to `μ`.
//!
//! Step 2 uses Wood's rejection sampler with a Beta envelope. On the circle
//! (`d = 2`) the angle is drawn from a von Mises law by Best and Fisher's
//! wrapped-Cauchy rejection scheme instead.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayViewMut1};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Result, VmfError};
use crate::rng::seeded_rng;
use crate::vmf::{Dataset, UnitVector, VmfParams};

/// `μ` counts as `e₁` when `‖e₁ - μ‖` is below this.
const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub seed: u64,
    /// Total proposals allowed per call.
    pub max_rejections: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: 0,
            max_rejections: 10_000_000,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        SamplerConfig {
            seed,
            ..Default::default()
        }
    }
}

/// Proposal bookkeeping for a rejection sampler.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SampleStats {
    pub proposals: u64,
    pub accepted: u64,
}

impl SampleStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// The reflection `U = I - 2 uuᵀ/‖u‖²`, `u = e₁ - μ`, which swaps `e₁` and `μ`.
#[derive(Debug, Clone)]
pub struct HouseholderMap {
    mu: Array1<f64>,
    u: Array1<f64>,
    /// `2 / ‖u‖²`
    scale: f64,
    degenerate: bool,
}

impl HouseholderMap {
    pub fn new(mu: &UnitVector) -> Self {
        let mu = mu.as_array().clone();
        let mut u = mu.mapv(|c| -c);
        // 1 - μ₁ = (Σ_{j>1} μ_j²)/(1 + μ₁) avoids cancellation near μ = e₁
        let tail_sq: f64 = mu.iter().skip(1).map(|c| c * c).sum();
        u[0] = if mu[0] > 0.0 {
            tail_sq / (1.0 + mu[0])
        } else {
            1.0 - mu[0]
        };
        let norm_sq = u.dot(&u);
        let degenerate = norm_sq.sqrt() < DEGENERATE_TOL;
        HouseholderMap {
            mu,
            u,
            scale: if degenerate { 0.0 } else { 2.0 / norm_sq },
            degenerate,
        }
    }

    /// True when `μ = e₁` and the map is the identity.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn target(&self) -> &Array1<f64> {
        &self.mu
    }

    pub fn apply_inplace(&self, mut v: ArrayViewMut1<'_, f64>) {
        if self.degenerate {
            return;
        }
        let f = self.scale * self.u.dot(&v);
        v.scaled_add(-f, &self.u);
    }

    pub fn apply(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut out = v.to_owned();
        self.apply_inplace(out.view_mut());
        out
    }
}

/// Uniform draw on `S^{d-2}` as a vector of length `d - 1`.
pub fn sample_tangent<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<UnitVector> {
    if d < 3 {
        return Err(VmfError::invalid(format!(
            "tangent sampling needs d >= 3 (got {d}); the circle uses the von Mises branch"
        )));
    }
    let mut v = Array1::zeros(d - 1);
    fill_tangent(v.view_mut(), rng);
    UnitVector::new(v)
}

fn fill_tangent<R: Rng + ?Sized>(mut v: ArrayViewMut1<'_, f64>, rng: &mut R) {
    loop {
        for c in v.iter_mut() {
            *c = StandardNormal.sample(rng);
        }
        let norm = v.dot(&v).sqrt();
        if norm > 0.0 {
            v.mapv_inplace(|c| c / norm);
            return;
        }
    }
}

/// Rejection sampler for the cosine `w = μᵀx`.
#[derive(Debug, Clone)]
pub enum CosineSampler {
    /// Wood's envelope, `d >= 3`.
    Wood {
        kappa: f64,
        dm1: f64,
        b: f64,
        x0: f64,
        c: f64,
        beta: Beta<f64>,
    },
    /// Best–Fisher von Mises sampler, `d = 2`; `r = 0` means uniform.
    Circle { kappa: f64, r: f64 },
}

impl CosineSampler {
    pub fn new(d: usize, kappa: f64) -> Result<Self> {
        if d < 2 {
            return Err(VmfError::invalid(format!(
                "dimension must be >= 2, got {d}"
            )));
        }
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(VmfError::invalid(format!(
                "concentration must be finite and >= 0, got {kappa}"
            )));
        }
        if d == 2 {
            let r = if kappa == 0.0 {
                0.0
            } else {
                let root = (1.0 + 4.0 * kappa * kappa).sqrt();
                let tau = 1.0 + root;
                // ρ = (τ - sqrt(2τ)) / (2κ), rearranged to avoid cancellation at small κ
                let rho = 2.0 * kappa * tau / ((root + 1.0) * (tau + (2.0 * tau).sqrt()));
                (1.0 + rho * rho) / (2.0 * rho)
            };
            return Ok(CosineSampler::Circle { kappa, r });
        }
        let dm1 = (d - 1) as f64;
        // b = (-2κ + sqrt(4κ² + (d-1)²)) / (d-1), in cancellation-free form
        let b = dm1 / (2.0 * kappa + (4.0 * kappa * kappa + dm1 * dm1).sqrt());
        let x0 = (1.0 - b) / (1.0 + b);
        // 1 - x0² = 4b / (1 + b)²
        let one_minus_x0_sq = 4.0 * b / ((1.0 + b) * (1.0 + b));
        let c = kappa * x0 + dm1 * one_minus_x0_sq.ln();
        let beta = Beta::new(0.5 * dm1, 0.5 * dm1)
            .map_err(|e| VmfError::invalid(format!("beta envelope: {e}")))?;
        Ok(CosineSampler::Wood {
            kappa,
            dm1,
            b,
            x0,
            c,
            beta,
        })
    }

    /// One proposal; `Some(w)` on acceptance.
    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        match *self {
            CosineSampler::Wood {
                kappa,
                dm1,
                b,
                x0,
                c,
                ref beta,
            } => {
                let z = beta.sample(rng);
                let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
                let u: f64 = rng.random();
                (kappa * w + dm1 * (1.0 - x0 * w).ln() - c >= u.ln()).then_some(w)
            }
            CosineSampler::Circle { kappa, r } => {
                let u1: f64 = rng.random();
                if r == 0.0 {
                    return Some((2.0 * PI * u1).cos());
                }
                let z = (PI * u1).cos();
                let f = (1.0 + r * z) / (r + z);
                let cc = kappa * (r - f);
                let u2: f64 = rng.random();
                (cc * (2.0 - cc) - u2 > 0.0 || (cc / u2).ln() + 1.0 - cc >= 0.0)
                    .then_some(f.clamp(-1.0, 1.0))
            }
        }
    }

    /// Draws one cosine, spending proposals from `stats` up to `budget`.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        stats: &mut SampleStats,
        budget: u64,
    ) -> Result<f64> {
        while stats.proposals < budget {
            stats.proposals += 1;
            if let Some(w) = self.propose(rng) {
                stats.accepted += 1;
                return Ok(w);
            }
        }
        Err(VmfError::SamplingFailure {
            proposals: stats.proposals,
            accepted: stats.accepted,
            acceptance_rate: stats.acceptance_rate(),
        })
    }
}

/// One draw of `w` from `p(w) ∝ exp(κw)(1 - w²)^{(d-3)/2}`.
pub fn sample_w<R: Rng + ?Sized>(d: usize, kappa: f64, rng: &mut R) -> Result<f64> {
    let sampler = CosineSampler::new(d, kappa)?;
    let mut stats = SampleStats::default();
    sampler.draw(rng, &mut stats, SamplerConfig::default().max_rejections)
}

/// `n` independent draws from `vMF(μ, κ)` using an explicit generator.
pub fn sample_vmf_with_rng<R: Rng + ?Sized>(
    p: &VmfParams,
    n: usize,
    max_rejections: u64,
    rng: &mut R,
) -> Result<(Dataset, SampleStats)> {
    if n == 0 {
        return Err(VmfError::invalid("sample count must be >= 1"));
    }
    if max_rejections < 1 {
        return Err(VmfError::invalid("max_rejections must be >= 1"));
    }
    let d = p.dim();
    let cosine = CosineSampler::new(d, p.kappa())?;
    let rotation = HouseholderMap::new(&UnitVector::new(p.mu().clone())?);
    let mut stats = SampleStats::default();
    let mut out = Array2::zeros((n, d));
    for mut row in out.rows_mut() {
        let w = cosine.draw(rng, &mut stats, max_rejections)?;
        let radial = (1.0 - w * w).max(0.0).sqrt();
        row[0] = w;
        {
            let mut tangent = row.slice_mut(ndarray::s![1..]);
            if d == 2 {
                tangent[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
            } else {
                fill_tangent(tangent.view_mut(), rng);
            }
            tangent.mapv_inplace(|c| c * radial);
        }
        rotation.apply_inplace(row.view_mut());
    }
    Ok((Dataset::from_trusted(out), stats))
}

/// `n` independent draws from `vMF(μ, κ)` seeded by `cfg.seed`.
pub fn sample_vmf(p: &VmfParams, n: usize, cfg: &SamplerConfig) -> Result<Dataset> {
    let mut rng = seeded_rng(cfg.seed);
    sample_vmf_with_rng(p, n, cfg.max_rejections, &mut rng).map(|(data, _)| data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::{bessel_ratio, BesselEvalConfig, BesselOrder};
    use crate::rng::seeded_rng;
    use ndarray::{array, Axis};
    use proptest::prelude::*;

    fn ratio(d: usize, kappa: f64) -> f64 {
        bessel_ratio(
            BesselOrder::for_dim(d).unwrap(),
            kappa,
            &BesselEvalConfig::default(),
        )
        .unwrap()
    }

    /// Kolmogorov–Smirnov statistic of `xs` against `cdf`.
    fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Asymptotic 1% critical value of the one-sample KS statistic.
    fn ks_critical_1pct(n: usize) -> f64 {
        1.628 / (n as f64).sqrt()
    }

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn tangent_is_unit_and_centered() {
        let mut rng = seeded_rng(1);
        let v = sample_tangent(3, &mut rng).unwrap();
        assert_eq!(v.dim(), 2);
        assert!((v.view().dot(&v.view()) - 1.0).abs() < 1e-15);

        let n = 100_000;
        let d = 6;
        let mut sums = vec![0.0; d - 1];
        for _ in 0..n {
            let v = sample_tangent(d, &mut rng).unwrap();
            for (s, c) in sums.iter_mut().zip(v.view().iter()) {
                *s += c;
            }
        }
        // each coordinate has variance 1/(d-1)
        let sigma = (1.0 / ((d - 1) as f64 * n as f64)).sqrt();
        for s in sums {
            assert!((s / n as f64).abs() <= 3.0 * sigma);
        }
        assert!(sample_tangent(2, &mut rng).is_err());
    }

    #[test]
    fn tangent_is_deterministic() {
        let a = sample_tangent(8, &mut seeded_rng(5)).unwrap();
        let b = sample_tangent(8, &mut seeded_rng(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_cosine_on_s2() {
        let mut rng = seeded_rng(2);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_w(3, 0.0, &mut rng).unwrap())
            .collect();
        let ks = ks_statistic(xs, |w| (w + 1.0) / 2.0);
        assert!(ks < ks_critical_1pct(n), "{ks}");
    }

    #[test]
    fn cosine_mean_is_bessel_ratio() {
        let mut rng = seeded_rng(3);
        for (d, kappa) in [(5usize, 50.0), (2, 3.0), (2, 40.0), (3, 0.5), (40, 10.0)] {
            let xs: Vec<f64> = (0..100_000)
                .map(|_| sample_w(d, kappa, &mut rng).unwrap())
                .collect();
            let (mean, se) = mean_and_se(&xs);
            let want = ratio(d, kappa);
            assert!(
                (mean - want).abs() <= 3.0 * se,
                "d={d} κ={kappa}: {mean} vs {want}"
            );
        }
    }

    #[test]
    fn high_concentration_envelope_is_efficient() {
        let sampler = CosineSampler::new(5, 500.0).unwrap();
        let mut rng = seeded_rng(4);
        let mut stats = SampleStats::default();
        for _ in 0..20_000 {
            let w = sampler.draw(&mut rng, &mut stats, u64::MAX).unwrap();
            assert!(w > 0.0 && w <= 1.0);
        }
        assert!(stats.acceptance_rate() > 0.5, "{}", stats.acceptance_rate());
    }

    #[test]
    fn exhausted_budget_reports_failure() {
        let p = VmfParams::new(array![1.0, 0.0, 0.0], 1.0).unwrap();
        let err = sample_vmf_with_rng(&p, 10, 3, &mut seeded_rng(0)).unwrap_err();
        match err {
            VmfError::SamplingFailure { proposals, .. } => assert_eq!(proposals, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn householder_maps_e1_to_mu() {
        let mu = crate::vmf::normalize(array![0.3, -1.0, 2.0, 0.5].view()).unwrap();
        let h = HouseholderMap::new(&mu);
        let e1 = array![1.0, 0.0, 0.0, 0.0];
        let image = h.apply(e1.view());
        assert!((&image - mu.as_array()).iter().all(|c| c.abs() < 1e-10));

        // nearly e₁ still maps accurately
        let mu = crate::vmf::normalize(array![1.0, 1e-7, -2e-7].view()).unwrap();
        let h = HouseholderMap::new(&mu);
        assert!(!h.is_degenerate());
        let image = h.apply(array![1.0, 0.0, 0.0].view());
        assert!((&image - mu.as_array()).iter().all(|c| c.abs() < 1e-10));
    }

    #[test]
    fn e1_takes_identity_branch_and_mirrors_minus_e1() {
        let e1 = UnitVector::basis(4, 0).unwrap();
        assert!(HouseholderMap::new(&e1).is_degenerate());
        let plus = VmfParams::new(array![1.0, 0.0, 0.0, 0.0], 20.0).unwrap();
        let minus = VmfParams::new(array![-1.0, 0.0, 0.0, 0.0], 20.0).unwrap();
        let cfg = SamplerConfig::with_seed(9);
        let a = sample_vmf(&plus, 500, &cfg).unwrap();
        let b = sample_vmf(&minus, 500, &cfg).unwrap();
        for (ra, rb) in a.rows().rows().into_iter().zip(b.rows().rows()) {
            assert_eq!(ra[0], -rb[0]);
            for j in 1..4 {
                assert_eq!(ra[j], rb[j]);
            }
        }
    }

    #[test]
    fn samples_are_unit_and_reproducible() {
        let p = VmfParams::from_direction(array![1.0, -2.0, 0.5, 3.0, 0.0].view(), 7.0).unwrap();
        let cfg = SamplerConfig::with_seed(42);
        let a = sample_vmf(&p, 2000, &cfg).unwrap();
        let b = sample_vmf(&p, 2000, &cfg).unwrap();
        assert_eq!(a, b);
        for row in a.rows().rows() {
            assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-9);
        }
        let c = sample_vmf(&p, 2000, &SamplerConfig::with_seed(43)).unwrap();
        assert_ne!(a, c);
        assert!(sample_vmf(&p, 0, &cfg).is_err());
    }

    #[test]
    fn extreme_concentration_hugs_the_mean() {
        for d in [2usize, 3, 10, 100] {
            let mu = crate::vmf::normalize(Array1::linspace(1.0, 2.0, d).view()).unwrap();
            let p = VmfParams::new(mu.as_array().clone(), 1e4).unwrap();
            let data = sample_vmf(&p, 1000, &SamplerConfig::with_seed(d as u64)).unwrap();
            for row in data.rows().rows() {
                assert!(row.dot(p.mu()) > 0.99, "d={d}");
            }
        }
    }

    #[test]
    fn mean_resultant_matches_ratio() {
        let p = VmfParams::new(array![0.0, 0.0, 1.0, 0.0, 0.0], 50.0).unwrap();
        let data = sample_vmf(&p, 10_000, &SamplerConfig::with_seed(17)).unwrap();
        let cos: Vec<f64> = data
            .rows()
            .rows()
            .into_iter()
            .map(|r| r.dot(p.mu()))
            .collect();
        let (_, se) = mean_and_se(&cos);
        let mean = data.rows().mean_axis(Axis(0)).unwrap();
        let r = mean.dot(&mean).sqrt();
        assert!((r - ratio(5, 50.0)).abs() <= 3.0 * se);
    }

    #[test]
    fn mean_direction_recovered() {
        for (d, kappa) in [(3usize, 50.0), (20, 80.0), (100, 50.0), (100, 500.0)] {
            let mu = crate::vmf::normalize(Array1::linspace(-1.0, 1.5, d).view()).unwrap();
            let p = VmfParams::new(mu.as_array().clone(), kappa).unwrap();
            let data = sample_vmf(&p, 10_000, &SamplerConfig::with_seed(d as u64)).unwrap();
            let m = data.mean().unwrap();
            let cos = m.dot(p.mu()) / m.dot(&m).sqrt();
            assert!(cos >= 0.99, "d={d} κ={kappa}: {cos}");
        }
    }

    #[test]
    fn goodness_of_fit_on_s2() {
        // d = 3: the cosine t = μᵀx has density ∝ exp(κt) on [-1, 1]
        let kappa = 10.0f64;
        let p = VmfParams::from_direction(array![1.0, 1.0, 1.0].view(), kappa).unwrap();
        let n = 20_000;
        let data = sample_vmf(&p, n, &SamplerConfig::with_seed(23)).unwrap();
        let ts: Vec<f64> = data
            .rows()
            .rows()
            .into_iter()
            .map(|r| r.dot(p.mu()))
            .collect();
        // F(t) = (e^{κ(t+1)} - 1) / (e^{2κ} - 1)
        let cdf = |t: f64| (kappa * (t + 1.0)).exp_m1() / (2.0 * kappa).exp_m1();
        let ks = ks_statistic(ts, cdf);
        assert!(ks < ks_critical_1pct(n), "{ks}");
    }

    #[test]
    fn circle_goodness_of_fit() {
        // d = 2, κ = 2: compare the angle's CDF against numerical quadrature
        let kappa = 2.0f64;
        let n = 20_000;
        let mut rng = seeded_rng(29);
        let ws: Vec<f64> = (0..n)
            .map(|_| sample_w(2, kappa, &mut rng).unwrap())
            .collect();
        let thetas: Vec<f64> = ws.iter().map(|w| w.acos()).collect();
        // density of |θ| on [0, π] ∝ exp(κ cos θ)
        let grid = 20_000;
        let h = PI / grid as f64;
        let mut cum = vec![0.0; grid + 1];
        for i in 0..grid {
            let a = (kappa * (i as f64 * h).cos()).exp();
            let b = (kappa * ((i + 1) as f64 * h).cos()).exp();
            cum[i + 1] = cum[i] + 0.5 * h * (a + b);
        }
        let total = cum[grid];
        let cdf = |t: f64| {
            let pos = (t / h).min(grid as f64 - 1e-9);
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            (cum[i] + frac * (cum[i + 1] - cum[i])) / total
        };
        let ks = ks_statistic(thetas, cdf);
        assert!(ks < ks_critical_1pct(n), "{ks}");
    }

    proptest! {
        #[test]
        fn householder_is_involutive_isometry(
            mu in proptest::collection::vec(-1.0f64..1.0, 6),
            v in proptest::collection::vec(-3.0f64..3.0, 6),
        ) {
            let mu_arr = Array1::from(mu);
            prop_assume!(mu_arr.dot(&mu_arr) > 1e-6);
            let mu = crate::vmf::normalize(mu_arr.view()).unwrap();
            let h = HouseholderMap::new(&mu);
            let v = Array1::from(v);
            let once = h.apply(v.view());
            let twice = h.apply(once.view());
            for (a, b) in twice.iter().zip(v.iter()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            prop_assert!((once.dot(&once).sqrt() - v.dot(&v).sqrt()).abs() <= 1e-12);
        }
    }
}
