//! Maximum-likelihood estimation for a single vMF component.
//!
//! [`fit_batch`] solves the stationarity conditions directly: the mean
//! direction is the normalized sample mean and `κ` comes from the
//! approximate Bessel-ratio inversion. [`fit_sgd`] runs projected minibatch
//! ascent on the mean log-likelihood with the analytic gradients.

use ndarray::{Array1, ArrayView1};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bessel::{invert_bessel_ratio, mean_resultant};
use crate::error::{Result, VmfError};
use crate::optim::{Optimizer, Stepper};
use crate::rng::seeded_rng;
use crate::vmf::{log_norm_const, Dataset, VmfParams};

/// Resultant lengths at or above this are treated as fully concentrated.
pub const MAX_RESULTANT: f64 = 1.0 - 1e-12;

/// How `κ` is represented inside the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaParam {
    /// Steps are taken on `log κ`; the gradient is scaled by `κ`.
    #[default]
    Log,
    /// Steps are taken on `κ` itself.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub lr: f64,
    pub lr_decay_per_epoch: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub kappa_floor: f64,
    pub kappa_ceiling: f64,
    pub kappa_param: KappaParam,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            lr: 0.01,
            lr_decay_per_epoch: 0.95,
            batch_size: 128,
            epochs: 100,
            optimizer: Optimizer::AdaptiveMoment,
            kappa_floor: 1e-6,
            kappa_ceiling: 1e6,
            kappa_param: KappaParam::Log,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(VmfError::invalid(format!(
                "lr must be finite and >= 0, got {}",
                self.lr
            )));
        }
        if !(self.lr_decay_per_epoch > 0.0 && self.lr_decay_per_epoch <= 1.0) {
            return Err(VmfError::invalid(format!(
                "lr_decay_per_epoch must be in (0, 1], got {}",
                self.lr_decay_per_epoch
            )));
        }
        if self.batch_size == 0 {
            return Err(VmfError::invalid("batch_size must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(VmfError::invalid("epochs must be >= 1"));
        }
        if !(self.kappa_floor > 0.0)
            || !(self.kappa_ceiling >= self.kappa_floor)
            || !self.kappa_ceiling.is_finite()
        {
            return Err(VmfError::invalid(format!(
                "need 0 < kappa_floor <= kappa_ceiling < inf, got [{}, {}]",
                self.kappa_floor, self.kappa_ceiling
            )));
        }
        Ok(())
    }

    /// Learning rate used throughout epoch `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay_per_epoch.powi(epoch as i32)
    }
}

/// Estimator output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: VmfParams,
    /// Mean log-likelihood per epoch; a single entry for the batch estimator.
    pub ll_trace: Vec<f64>,
    pub iterations: usize,
    /// `‖μ - μ*‖`
    pub e_mu: Option<f64>,
    /// `‖μ - μ*‖²`
    pub e_mu_sq: Option<f64>,
    /// `|κ - κ*| / κ*`
    pub e_kappa: Option<f64>,
}

/// Estimation errors against known parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeErrors {
    pub e_mu: f64,
    pub e_mu_sq: f64,
    pub e_kappa: f64,
}

impl RelativeErrors {
    pub fn between(estimate: &VmfParams, truth: &VmfParams) -> Result<Self> {
        if estimate.dim() != truth.dim() {
            return Err(VmfError::DimensionMismatch {
                expected: truth.dim(),
                found: estimate.dim(),
            });
        }
        if truth.kappa() == 0.0 {
            return Err(VmfError::invalid("relative κ error needs κ* > 0"));
        }
        let diff = estimate.mu() - truth.mu();
        let e_mu_sq = diff.dot(&diff);
        Ok(RelativeErrors {
            e_mu: e_mu_sq.sqrt(),
            e_mu_sq,
            e_kappa: (estimate.kappa() - truth.kappa()).abs() / truth.kappa(),
        })
    }
}

impl FitReport {
    fn new(params: VmfParams, ll_trace: Vec<f64>, iterations: usize) -> Self {
        FitReport {
            params,
            ll_trace,
            iterations,
            e_mu: None,
            e_mu_sq: None,
            e_kappa: None,
        }
    }

    /// Fills the error fields against ground truth.
    pub fn with_truth(mut self, truth: &VmfParams) -> Result<Self> {
        let e = RelativeErrors::between(&self.params, truth)?;
        self.e_mu = Some(e.e_mu);
        self.e_mu_sq = Some(e.e_mu_sq);
        self.e_kappa = Some(e.e_kappa);
        Ok(self)
    }

    pub fn errors(&self) -> Option<RelativeErrors> {
        Some(RelativeErrors {
            e_mu: self.e_mu?,
            e_mu_sq: self.e_mu_sq?,
            e_kappa: self.e_kappa?,
        })
    }
}

/// Full-batch estimate from the sample mean.
pub fn fit_batch(data: &Dataset) -> Result<FitReport> {
    if data.is_empty() {
        return Err(VmfError::invalid("dataset is empty"));
    }
    let xbar = data.mean()?;
    let params = params_from_mean(xbar.view())?;
    let ll = objective_from_mean(&params, xbar.view())?;
    Ok(FitReport::new(params, vec![ll], 1))
}

/// `μ = x̄/‖x̄‖`, `κ = invert_bessel_ratio(d, ‖x̄‖)`.
pub(crate) fn params_from_mean(xbar: ArrayView1<'_, f64>) -> Result<VmfParams> {
    let r = xbar.dot(&xbar).sqrt();
    if !(r > 0.0) {
        return Err(VmfError::DegenerateData(
            "sample mean is zero; the mean direction is undefined".into(),
        ));
    }
    if r >= MAX_RESULTANT {
        return Err(VmfError::ConcentrationOverflow { resultant: r });
    }
    let kappa = invert_bessel_ratio(xbar.len(), r)?;
    VmfParams::from_direction(xbar, kappa)
}

/// Mean log-likelihood `κ μᵀx̄_B + log C_d(κ)` of `batch`.
pub fn vmf_objective(p: &VmfParams, batch: &Dataset) -> Result<f64> {
    check_batch(p, batch)?;
    objective_from_mean(p, batch.mean()?.view())
}

/// Gradient of [`vmf_objective`] with respect to `μ` and `κ`.
#[derive(Debug, Clone, PartialEq)]
pub struct VmfGradient {
    /// `κ x̄_B`, not projected onto the tangent space.
    pub mu: Array1<f64>,
    /// `μᵀx̄_B - I_{s+1}(κ)/I_s(κ)`
    pub kappa: f64,
}

pub fn vmf_gradient(p: &VmfParams, batch: &Dataset) -> Result<VmfGradient> {
    check_batch(p, batch)?;
    gradient_from_mean(p, batch.mean()?.view())
}

fn check_batch(p: &VmfParams, batch: &Dataset) -> Result<()> {
    if batch.is_empty() {
        return Err(VmfError::invalid("batch is empty"));
    }
    if batch.dim() != p.dim() {
        return Err(VmfError::DimensionMismatch {
            expected: p.dim(),
            found: batch.dim(),
        });
    }
    Ok(())
}

pub(crate) fn objective_from_mean(p: &VmfParams, xbar: ArrayView1<'_, f64>) -> Result<f64> {
    Ok(p.kappa() * p.mu().dot(&xbar) + log_norm_const(p.dim(), p.kappa())?)
}

pub(crate) fn gradient_from_mean(p: &VmfParams, xbar: ArrayView1<'_, f64>) -> Result<VmfGradient> {
    let ratio = mean_resultant(p.dim(), p.kappa())?;
    Ok(VmfGradient {
        mu: xbar.mapv(|c| p.kappa() * c),
        kappa: p.mu().dot(&xbar) - ratio,
    })
}

/// Mean of the rows listed in `idx`.
pub(crate) fn subset_mean(data: &Dataset, idx: &[usize]) -> Array1<f64> {
    let mut acc = Array1::zeros(data.dim());
    for &i in idx {
        acc += &data.row(i);
    }
    acc / idx.len() as f64
}

/// Removes the component of `g` along the unit vector `mu`.
pub(crate) fn project_tangent(g: &mut Array1<f64>, mu: &Array1<f64>) {
    let along = mu.dot(g);
    g.scaled_add(-along, mu);
}

/// Renormalizes `mu`; falls back to `prev` if the step collapsed it.
pub(crate) fn renormalize(mu: &mut Array1<f64>, prev: &Array1<f64>) {
    let norm = mu.dot(mu).sqrt();
    if norm > 0.0 && norm.is_finite() {
        mu.mapv_inplace(|c| c / norm);
    } else {
        mu.assign(prev);
    }
}

/// Optimizer coordinate for `κ`.
pub(crate) fn kappa_to_coord(kind: KappaParam, kappa: f64) -> f64 {
    match kind {
        KappaParam::Log => kappa.ln(),
        KappaParam::Direct => kappa,
    }
}

pub(crate) fn coord_to_kappa(kind: KappaParam, coord: f64, cfg: &SgdConfig) -> f64 {
    let kappa = match kind {
        KappaParam::Log => coord.exp(),
        KappaParam::Direct => coord,
    };
    if kappa.is_nan() {
        return kappa;
    }
    kappa.clamp(cfg.kappa_floor, cfg.kappa_ceiling)
}

/// `∂/∂coord` given `∂/∂κ`.
pub(crate) fn kappa_coord_grad(kind: KappaParam, kappa: f64, grad_kappa: f64) -> f64 {
    match kind {
        KappaParam::Log => kappa * grad_kappa,
        KappaParam::Direct => grad_kappa,
    }
}

/// Epoch order and initial direction shared by the single- and mixture-SGD fits.
pub(crate) struct EpochSchedule {
    rng: crate::rng::VmfRng,
    order: Vec<usize>,
    batch_size: usize,
}

impl EpochSchedule {
    pub(crate) fn new(n: usize, cfg: &SgdConfig) -> Result<Self> {
        if n < cfg.batch_size {
            return Err(VmfError::invalid(format!(
                "batch_size {} exceeds the number of points {n}",
                cfg.batch_size
            )));
        }
        Ok(EpochSchedule {
            rng: seeded_rng(cfg.seed),
            order: (0..n).collect(),
            batch_size: cfg.batch_size,
        })
    }

    pub(crate) fn shuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
    }

    pub(crate) fn batches(&self) -> std::slice::Chunks<'_, usize> {
        self.order.chunks(self.batch_size)
    }
}

/// Direction of the mean of the first minibatch, or of the whole dataset if that cancels.
pub(crate) fn initial_direction(data: &Dataset, first_batch: &[usize]) -> Result<Array1<f64>> {
    for mean in [subset_mean(data, first_batch), data.mean()?] {
        let norm = mean.dot(&mean).sqrt();
        if norm > 0.0 {
            return Ok(mean / norm);
        }
    }
    Err(VmfError::DegenerateData(
        "sample mean is zero; cannot initialize the mean direction".into(),
    ))
}

/// Projected minibatch ascent on the mean log-likelihood.
///
/// Starts from the normalized mean of the first minibatch with `κ = 1`.
/// After each step `μ` is renormalized and `κ` clamped to the configured range.
pub fn fit_sgd(data: &Dataset, cfg: &SgdConfig) -> Result<FitReport> {
    cfg.validate()?;
    let n = data.len();
    let d = data.dim();
    let mut schedule = EpochSchedule::new(n, cfg)?;
    schedule.shuffle();
    let first: Vec<usize> = schedule.batches().next().unwrap_or(&[]).to_vec();

    let mut mu = initial_direction(data, &first)?;
    let mut kappa = 1.0f64.clamp(cfg.kappa_floor, cfg.kappa_ceiling);
    let mut params = VmfParams::new(mu.clone(), kappa)?;
    let mut stepper = Stepper::new(cfg.optimizer, d + 1);
    let mut theta = vec![0.0; d + 1];
    let mut grad = vec![0.0; d + 1];
    let mut ll_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if epoch > 0 {
            schedule.shuffle();
        }
        let lr = cfg.lr_at(epoch);
        let mut weighted = 0.0;
        for batch in schedule.batches() {
            let xbar = subset_mean(data, batch);
            let obj = objective_from_mean(&params, xbar.view())?;
            if !obj.is_finite() {
                return Err(VmfError::Divergence { epoch, lr });
            }
            weighted += obj * batch.len() as f64;

            let g = gradient_from_mean(&params, xbar.view())?;
            let mut g_mu = g.mu;
            project_tangent(&mut g_mu, &mu);

            theta[..d].copy_from_slice(mu.as_slice().expect("contiguous"));
            theta[d] = kappa_to_coord(cfg.kappa_param, kappa);
            grad[..d].copy_from_slice(g_mu.as_slice().expect("contiguous"));
            grad[d] = kappa_coord_grad(cfg.kappa_param, kappa, g.kappa);
            stepper.ascend(&mut theta, &grad, lr);

            let prev = mu.clone();
            mu.as_slice_mut()
                .expect("contiguous")
                .copy_from_slice(&theta[..d]);
            renormalize(&mut mu, &prev);
            kappa = coord_to_kappa(cfg.kappa_param, theta[d], cfg);
            if !kappa.is_finite() || mu.iter().any(|c| !c.is_finite()) {
                return Err(VmfError::Divergence { epoch, lr });
            }
            params.set_unchecked(mu.clone(), kappa);
        }
        let mean_ll = weighted / n as f64;
        if !mean_ll.is_finite() {
            return Err(VmfError::Divergence { epoch, lr });
        }
        ll_trace.push(mean_ll);
    }
    Ok(FitReport::new(params, ll_trace, cfg.epochs))
}
