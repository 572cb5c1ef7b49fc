//! The von Mises-Fisher density `p(x; μ, κ) = C_d(κ) exp(κ μᵀx)` on `S^{d-1}`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::bessel::{self, ln_gamma};
use crate::error::{Result, VmfError};

/// Tolerance on `‖x‖ = 1` for observations.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// Tolerance on `‖μ‖ = 1` for parameters.
pub const MEAN_NORM_TOL: f64 = 1e-9;

/// Below this concentration `log C_d` is assembled from the series sum
/// directly, so that `s·ln κ` cancels analytically instead of numerically.
const SMALL_KAPPA: f64 = 1.0;

/// A point on the unit hypersphere.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Array1<f64>);

impl UnitVector {
    /// Wraps `v`, rejecting it unless `|‖v‖ - 1| <= 1e-6`.
    pub fn new(v: Array1<f64>) -> Result<Self> {
        check_unit(v.view(), UNIT_NORM_TOL)?;
        Ok(UnitVector(v))
    }

    /// `e_{axis}` in `R^d`.
    pub fn basis(d: usize, axis: usize) -> Result<Self> {
        if axis >= d {
            return Err(VmfError::invalid(format!(
                "axis {axis} out of range for d={d}"
            )));
        }
        let mut v = Array1::zeros(d);
        v[axis] = 1.0;
        Ok(UnitVector(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }
}

/// Scales `v` to unit length.
pub fn normalize(v: ArrayView1<'_, f64>) -> Result<UnitVector> {
    let norm = v.dot(&v).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(VmfError::invalid(format!(
            "cannot normalize a vector of norm {norm}"
        )));
    }
    Ok(UnitVector(v.mapv(|c| c / norm)))
}

fn check_unit(v: ArrayView1<'_, f64>, tol: f64) -> Result<()> {
    let norm = v.dot(&v).sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > tol {
        return Err(VmfError::invalid(format!(
            "expected a unit vector (tolerance {tol:e}), got norm {norm}"
        )));
    }
    Ok(())
}

/// Mean direction and concentration of one vMF component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VmfParamsRepr", into = "VmfParamsRepr")]
pub struct VmfParams {
    mu: Array1<f64>,
    kappa: f64,
}

#[derive(Serialize, Deserialize)]
struct VmfParamsRepr {
    d: usize,
    kappa: f64,
    mu: Vec<f64>,
}

impl TryFrom<VmfParamsRepr> for VmfParams {
    type Error = VmfError;

    fn try_from(r: VmfParamsRepr) -> Result<Self> {
        if r.mu.len() != r.d {
            return Err(VmfError::DimensionMismatch {
                expected: r.d,
                found: r.mu.len(),
            });
        }
        VmfParams::new(Array1::from(r.mu), r.kappa)
    }
}

impl From<VmfParams> for VmfParamsRepr {
    fn from(p: VmfParams) -> Self {
        VmfParamsRepr {
            d: p.mu.len(),
            kappa: p.kappa,
            mu: p.mu.to_vec(),
        }
    }
}

impl VmfParams {
    /// Requires `d >= 2`, `‖μ‖ = 1` within 1e-9, and a finite `κ >= 0`.
    pub fn new(mu: Array1<f64>, kappa: f64) -> Result<Self> {
        if mu.len() < 2 {
            return Err(VmfError::invalid(format!(
                "dimension must be >= 2, got {}",
                mu.len()
            )));
        }
        check_unit(mu.view(), MEAN_NORM_TOL)?;
        check_kappa(kappa)?;
        Ok(VmfParams { mu, kappa })
    }

    /// Normalizes `direction` before building the parameters.
    pub fn from_direction(direction: ArrayView1<'_, f64>, kappa: f64) -> Result<Self> {
        let mu = normalize(direction)?.into_inner();
        VmfParams::new(mu, kappa)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &Array1<f64> {
        &self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn log_norm_const(&self) -> Result<f64> {
        log_norm_const(self.dim(), self.kappa)
    }

    /// Updates in place; the caller guarantees the invariants.
    pub(crate) fn set_unchecked(&mut self, mu: Array1<f64>, kappa: f64) {
        debug_assert_eq!(mu.len(), self.mu.len());
        self.mu = mu;
        self.kappa = kappa;
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !kappa.is_finite() || kappa < 0.0 {
        return Err(VmfError::invalid(format!(
            "concentration must be finite and >= 0, got {kappa}"
        )));
    }
    Ok(())
}

/// `log C_d(κ) = s log κ - (d/2) log 2π - log I_s(κ)`, `s = d/2 - 1`.
///
/// At `κ = 0` this is the uniform limit `-log |S^{d-1}|`.
pub fn log_norm_const(d: usize, kappa: f64) -> Result<f64> {
    if d < 2 {
        return Err(VmfError::invalid(format!(
            "dimension must be >= 2, got {d}"
        )));
    }
    check_kappa(kappa)?;
    let half_d = d as f64 / 2.0;
    let s = half_d - 1.0;
    let log_2pi = (2.0 * PI).ln();
    if kappa == 0.0 {
        return Ok(ln_gamma(half_d) + s * 2f64.ln() - half_d * log_2pi);
    }
    if kappa <= SMALL_KAPPA {
        // log I_s(κ) = s log(κ/2) - lnΓ(s+1) + ln Σ, so the κ^s factors cancel
        let (log_sum, _, converged) = bessel::series::log_series_sum(s, kappa, 1000);
        debug_assert!(converged);
        return Ok(s * 2f64.ln() + ln_gamma(s + 1.0) - log_sum - half_d * log_2pi);
    }
    let log_i = bessel::log_bessel_for_dim(d, kappa)?;
    Ok(s * kappa.ln() - half_d * log_2pi - log_i)
}

/// `κ μᵀx + log C_d(κ)`.
pub fn log_density(p: &VmfParams, x: &UnitVector) -> Result<f64> {
    if p.dim() != x.dim() {
        return Err(VmfError::DimensionMismatch {
            expected: p.dim(),
            found: x.dim(),
        });
    }
    Ok(p.kappa * p.mu.dot(&x.0) + p.log_norm_const()?)
}

/// `N × d` observations, each row on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset(Array2<f64>);

impl Dataset {
    /// Rejects rows whose norm differs from one by more than 1e-6.
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        if rows.ncols() < 2 {
            return Err(VmfError::invalid(format!(
                "dimension must be >= 2, got {}",
                rows.ncols()
            )));
        }
        for (i, row) in rows.axis_iter(Axis(0)).enumerate() {
            check_unit(row, UNIT_NORM_TOL)
                .map_err(|e| VmfError::invalid(format!("row {i}: {e}")))?;
        }
        Ok(Dataset(rows))
    }

    /// Scales every row to unit length first.
    pub fn normalized(mut rows: Array2<f64>) -> Result<Self> {
        for (i, mut row) in rows.axis_iter_mut(Axis(0)).enumerate() {
            let norm = row.dot(&row).sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(VmfError::invalid(format!("row {i} has norm {norm}")));
            }
            row.mapv_inplace(|c| c / norm);
        }
        Dataset::new(rows)
    }

    pub(crate) fn from_trusted(rows: Array2<f64>) -> Self {
        Dataset(rows)
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn rows(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.0.row(i)
    }

    pub fn unit_row(&self, i: usize) -> UnitVector {
        UnitVector(self.0.row(i).to_owned())
    }

    /// Rows selected by `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset(self.0.select(Axis(0), idx))
    }

    /// Sample mean `x̄` (not normalized).
    pub fn mean(&self) -> Result<Array1<f64>> {
        self.0
            .mean_axis(Axis(0))
            .ok_or_else(|| VmfError::invalid("dataset is empty"))
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}
