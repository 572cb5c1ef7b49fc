use ndarray::Array1;

use super::em::{initial_mixture, MixtureFit};
use super::{log_joint, normalize_rows, MixtureParams};
use crate::bessel::mean_resultant;
use crate::error::{Result, VmfError};
use crate::estimators::{
    coord_to_kappa, initial_direction, kappa_coord_grad, kappa_to_coord, project_tangent,
    renormalize, EpochSchedule, SgdConfig,
};
use crate::optim::Stepper;
use crate::vmf::{Dataset, VmfParams};

/// Gradient of the minibatch mean of `log p(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureGradient {
    /// `mean_i q_i(m) / α_m`
    pub alphas: Array1<f64>,
    /// `κ_m · mean_i q_i(m) x_i`
    pub mu: Vec<Array1<f64>>,
    /// `mean_i q_i(m) (μ_mᵀx_i - A_d(κ_m))`
    pub kappa: Array1<f64>,
}

struct BatchEval {
    mean_ll: f64,
    grad: MixtureGradient,
}

fn check(mix: &MixtureParams, batch: &Dataset) -> Result<()> {
    if batch.is_empty() {
        return Err(VmfError::invalid("batch is empty"));
    }
    if batch.dim() != mix.dim() {
        return Err(VmfError::DimensionMismatch {
            expected: mix.dim(),
            found: batch.dim(),
        });
    }
    Ok(())
}

fn evaluate(mix: &MixtureParams, batch: &Dataset) -> Result<BatchEval> {
    let mut q = log_joint(mix, batch)?;
    let marg = normalize_rows(&mut q);
    let b = batch.len() as f64;
    let order = mix.order();
    // s[m] = Σ_i q_i(m) x_i, accumulated row by row
    let mut s: Vec<Array1<f64>> = vec![Array1::zeros(mix.dim()); order];
    for (i, x) in batch.rows().rows().into_iter().enumerate() {
        for (m, acc) in s.iter_mut().enumerate() {
            acc.scaled_add(q[[i, m]], &x);
        }
    }
    let masses = q.sum_axis(ndarray::Axis(0));
    let mut grad = MixtureGradient {
        alphas: Array1::zeros(order),
        mu: Vec::with_capacity(order),
        kappa: Array1::zeros(order),
    };
    for (m, c) in mix.components().iter().enumerate() {
        let weighted_mean = &s[m] / b;
        let frac = masses[m] / b;
        let a = mix.alphas()[m];
        grad.alphas[m] = if a > 0.0 { frac / a } else { 0.0 };
        grad.kappa[m] = c.mu().dot(&weighted_mean) - frac * mean_resultant(c.dim(), c.kappa())?;
        grad.mu.push(weighted_mean.mapv(|v| c.kappa() * v));
    }
    Ok(BatchEval {
        mean_ll: marg.sum() / b,
        grad,
    })
}

/// Mean `log p(x)` over `batch`.
pub fn mixture_objective(mix: &MixtureParams, batch: &Dataset) -> Result<f64> {
    check(mix, batch)?;
    let mut lj = log_joint(mix, batch)?;
    Ok(normalize_rows(&mut lj).sum() / batch.len() as f64)
}

/// Unprojected gradient of [`mixture_objective`].
pub fn mixture_gradient(mix: &MixtureParams, batch: &Dataset) -> Result<MixtureGradient> {
    check(mix, batch)?;
    evaluate(mix, batch).map(|e| e.grad)
}

/// Offset of component `m` in the flat parameter vector `[μ_m, κ_m, α_m]*`.
fn block(m: usize, d: usize) -> usize {
    m * (d + 2)
}

/// Direct minibatch ascent on the mean log marginal likelihood.
///
/// With one component the run is step-for-step the single-vMF SGD fit on
/// the same seed. With more, components start at furthest-cosine data
/// points with `κ = 10` and equal weights. After every step each `μ_m` is
/// renormalized, each `κ_m` clamped, and `α` clipped to `≥ 0` and rescaled.
pub fn fit_mix_sgd(data: &Dataset, m: usize, cfg: &SgdConfig) -> Result<MixtureFit> {
    cfg.validate()?;
    if m == 0 {
        return Err(VmfError::invalid("order must be >= 1"));
    }
    let n = data.len();
    let d = data.dim();
    let mut schedule = EpochSchedule::new(n, cfg)?;
    schedule.shuffle();
    let mut mix = if m == 1 {
        let first: Vec<usize> = schedule.batches().next().unwrap_or(&[]).to_vec();
        let mu = initial_direction(data, &first)?;
        let kappa = 1.0f64.clamp(cfg.kappa_floor, cfg.kappa_ceiling);
        MixtureParams::new(Array1::from_elem(1, 1.0), vec![VmfParams::new(mu, kappa)?])?
    } else {
        initial_mixture(data, m, cfg.seed)?
    };
    {
        let (_, comps) = mix.parts_mut();
        for c in comps.iter_mut() {
            let k = c.kappa().clamp(cfg.kappa_floor, cfg.kappa_ceiling);
            c.set_unchecked(c.mu().clone(), k);
        }
    }

    let width = m * (d + 2);
    let mut stepper = Stepper::new(cfg.optimizer, width);
    let mut theta = vec![0.0; width];
    let mut grad = vec![0.0; width];
    let mut ll_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if epoch > 0 {
            schedule.shuffle();
        }
        let lr = cfg.lr_at(epoch);
        let mut weighted = 0.0;
        for idx in schedule.batches() {
            let batch = data.select(idx);
            let eval = evaluate(&mix, &batch)?;
            if !eval.mean_ll.is_finite() {
                return Err(VmfError::Divergence { epoch, lr });
            }
            weighted += eval.mean_ll * idx.len() as f64;

            let g = eval.grad;
            let alpha_mean = g.alphas.mean().unwrap_or(0.0);
            for (k, c) in mix.components().iter().enumerate() {
                let o = block(k, d);
                let mut g_mu = g.mu[k].clone();
                project_tangent(&mut g_mu, c.mu());
                theta[o..o + d].copy_from_slice(c.mu().as_slice().expect("contiguous"));
                grad[o..o + d].copy_from_slice(g_mu.as_slice().expect("contiguous"));
                theta[o + d] = kappa_to_coord(cfg.kappa_param, c.kappa());
                grad[o + d] = kappa_coord_grad(cfg.kappa_param, c.kappa(), g.kappa[k]);
                theta[o + d + 1] = mix.alphas()[k];
                grad[o + d + 1] = g.alphas[k] - alpha_mean;
            }
            stepper.ascend(&mut theta, &grad, lr);

            let (alphas, comps) = mix.parts_mut();
            for (k, c) in comps.iter_mut().enumerate() {
                let o = block(k, d);
                let mut mu = Array1::from(theta[o..o + d].to_vec());
                renormalize(&mut mu, c.mu());
                let kappa = coord_to_kappa(cfg.kappa_param, theta[o + d], cfg);
                if !kappa.is_finite() || mu.iter().any(|v| !v.is_finite()) {
                    return Err(VmfError::Divergence { epoch, lr });
                }
                c.set_unchecked(mu, kappa);
                alphas[k] = theta[o + d + 1].max(0.0);
            }
            project_simplex(alphas);
            if alphas.iter().any(|a| !a.is_finite()) {
                return Err(VmfError::Divergence { epoch, lr });
            }
        }
        let mean_ll = weighted / n as f64;
        if !mean_ll.is_finite() {
            return Err(VmfError::Divergence { epoch, lr });
        }
        ll_trace.push(mean_ll);
    }
    Ok(MixtureFit {
        params: mix,
        ll_trace,
        iterations: cfg.epochs,
        converged: true,
        reseed_iters: Vec::new(),
    })
}

/// Rescales clipped weights to sum to one, or resets them to uniform if all vanished.
fn project_simplex(alphas: &mut Array1<f64>) {
    let total = alphas.sum();
    if total > 0.0 && total.is_finite() {
        *alphas /= total;
    } else {
        let w = 1.0 / alphas.len() as f64;
        alphas.fill(w);
    }
}
