use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::{
    e_step_with_ll, furthest_cosine_seeds, m_step_components, MixtureParams, Responsibilities,
};
use crate::error::{Result, VmfError};
use crate::vmf::{Dataset, VmfParams};

/// Concentration given to freshly seeded components.
pub(crate) const SEED_KAPPA: f64 = 10.0;

/// How the M-step turns a mean resultant length into a concentration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaUpdate {
    /// `κ = (dR - R³)/(1 - R²)`. Cheap, but off by up to about 1% in low
    /// dimension, which can lower the log-likelihood by a hair near a fixed point.
    ClosedForm,
    /// The closed form polished by Newton's method to the exact root of
    /// `A_d(κ) = R`, so every iteration is a true EM step and cannot descend.
    #[default]
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop once `(LL_t - LL_{t-1}) / |LL_{t-1}|` drops below this.
    pub rel_ll_tol: f64,
    pub min_component_mass: f64,
    pub max_reseeds: usize,
    pub kappa_update: KappaUpdate,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iters: 100,
            rel_ll_tol: 1e-5,
            min_component_mass: 1e-8,
            max_reseeds: 3,
            kappa_update: KappaUpdate::Exact,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(VmfError::invalid("max_iters must be >= 1"));
        }
        if !(self.rel_ll_tol > 0.0) {
            return Err(VmfError::invalid("rel_ll_tol must be > 0"));
        }
        if !(self.min_component_mass > 0.0) {
            return Err(VmfError::invalid("min_component_mass must be > 0"));
        }
        Ok(())
    }
}

/// Result of a mixture fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    pub params: MixtureParams,
    /// Total log-likelihood per EM iteration, or mean log-likelihood per SGD epoch.
    pub ll_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Iterations (0-based) whose M-step reseeded a collapsed component.
    pub reseed_iters: Vec<usize>,
}

/// Seeds `m` components at furthest-cosine data points with `κ = 10` and equal weights.
pub(crate) fn initial_mixture(data: &Dataset, m: usize, seed: u64) -> Result<MixtureParams> {
    let idx = furthest_cosine_seeds(data, m, seed)?;
    let comps = idx
        .iter()
        .map(|&i| VmfParams::from_direction(data.row(i), SEED_KAPPA))
        .collect::<Result<Vec<_>>>()?;
    MixtureParams::uniform(comps)
}

/// Expectation–maximization from a furthest-cosine initialization.
///
/// Each iteration evaluates the log-likelihood of the current parameters
/// during the E-step, stops if the relative improvement is below
/// `rel_ll_tol`, and otherwise applies the closed-form M-step.
pub fn fit_em(data: &Dataset, m: usize, cfg: &EmConfig) -> Result<MixtureFit> {
    cfg.validate()?;
    let init = initial_mixture(data, m, cfg.seed)?;
    fit_em_from(data, init, cfg)
}

/// EM starting from the given parameters.
pub fn fit_em_from(data: &Dataset, init: MixtureParams, cfg: &EmConfig) -> Result<MixtureFit> {
    cfg.validate()?;
    let mut params = init;
    let mut ll_trace = Vec::new();
    let mut reseed_iters = Vec::new();
    let mut reseeds = 0usize;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..cfg.max_iters {
        let (q, marg) = e_step_with_ll(&params, data)?;
        let ll = marg.sum();
        let stop = match ll_trace.last() {
            Some(&prev) if !reseed_iters.contains(&(it - 1)) => {
                let prev: f64 = prev;
                (ll - prev) / prev.abs() < cfg.rel_ll_tol
            }
            _ => false,
        };
        ll_trace.push(ll);
        if stop {
            converged = true;
            break;
        }
        iterations = it + 1;
        let (next, reseeded) = m_step_reseeding(&q, data, &marg, cfg, &mut reseeds)?;
        if reseeded {
            reseed_iters.push(it);
        }
        params = next;
    }
    Ok(MixtureFit {
        params,
        ll_trace,
        iterations,
        converged,
        reseed_iters,
    })
}

fn m_step_reseeding(
    q: &Responsibilities,
    data: &Dataset,
    marg: &Array1<f64>,
    cfg: &EmConfig,
    reseeds: &mut usize,
) -> Result<(MixtureParams, bool)> {
    let updates = m_step_components(q, data, cfg.min_component_mass, cfg.kappa_update)?;
    let order = updates.len();
    let n = data.len() as f64;
    let mut alphas = Array1::zeros(order);
    let mut comps = Vec::with_capacity(order);
    // points ordered from worst to best explained, built on first collapse
    let mut next_worst: Option<std::vec::IntoIter<usize>> = None;
    let mut reseeded = false;
    for (m, u) in updates.into_iter().enumerate() {
        match u.params {
            Some(p) => {
                alphas[m] = u.mass / n;
                comps.push(p);
            }
            None => {
                if *reseeds >= cfg.max_reseeds {
                    return Err(VmfError::ComponentCollapse {
                        component: m,
                        reseeds: *reseeds,
                    });
                }
                *reseeds += 1;
                reseeded = true;
                let i = next_worst
                    .get_or_insert_with(|| {
                        let mut idx: Vec<usize> = (0..data.len()).collect();
                        idx.sort_by(|&a, &b| marg[a].total_cmp(&marg[b]));
                        idx.into_iter()
                    })
                    .next()
                    .expect("more points than components");
                log::warn!(
                    "component {m} collapsed (mass {:e}); reseeding at point {i}",
                    u.mass
                );
                alphas[m] = 1.0 / order as f64;
                comps.push(VmfParams::from_direction(data.row(i), SEED_KAPPA)?);
            }
        }
    }
    let total = alphas.sum();
    alphas /= total;
    Ok((MixtureParams::from_parts_unchecked(alphas, comps), reseeded))
}
