//! Finite mixtures of vMF components.
//!
//! All likelihood arithmetic happens in the log domain: densities with
//! `κ` in the hundreds and `d` near 100 are far outside `f64` range.

mod em;
mod init;
mod matching;
mod sgd;

pub use em::{fit_em, fit_em_from, EmConfig, KappaUpdate, MixtureFit};
pub use init::furthest_cosine_seeds;
pub use matching::{permutation_matched_error, MatchedError};
pub use sgd::{fit_mix_sgd, mixture_gradient, mixture_objective, MixtureGradient};

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::bessel::{invert_bessel_ratio, solve_bessel_ratio};
use crate::error::{Result, VmfError};
use crate::estimators::MAX_RESULTANT;
use crate::rng::seeded_rng;
use crate::sampler::{sample_vmf_with_rng, SamplerConfig};
use crate::vmf::{log_norm_const, normalize, Dataset, UnitVector, VmfParams};
use rand::Rng;
use rand_distr::StandardNormal;

/// Tolerance on `Σ α = 1`.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Mixing proportions and components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureRepr", into = "MixtureRepr")]
pub struct MixtureParams {
    alphas: Array1<f64>,
    components: Vec<VmfParams>,
}

#[derive(Serialize, Deserialize)]
struct MixtureRepr {
    alphas: Vec<f64>,
    components: Vec<VmfParams>,
}

impl TryFrom<MixtureRepr> for MixtureParams {
    type Error = VmfError;

    fn try_from(r: MixtureRepr) -> Result<Self> {
        MixtureParams::new(Array1::from(r.alphas), r.components)
    }
}

impl From<MixtureParams> for MixtureRepr {
    fn from(m: MixtureParams) -> Self {
        MixtureRepr {
            alphas: m.alphas.to_vec(),
            components: m.components,
        }
    }
}

impl MixtureParams {
    pub fn new(alphas: Array1<f64>, components: Vec<VmfParams>) -> Result<Self> {
        if components.is_empty() {
            return Err(VmfError::invalid("a mixture needs at least one component"));
        }
        if alphas.len() != components.len() {
            return Err(VmfError::DimensionMismatch {
                expected: components.len(),
                found: alphas.len(),
            });
        }
        let d = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(VmfError::DimensionMismatch {
                expected: d,
                found: c.dim(),
            });
        }
        if alphas.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) {
            return Err(VmfError::invalid(
                "mixing proportions must be finite and >= 0",
            ));
        }
        let total = alphas.sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(VmfError::invalid(format!(
                "mixing proportions must sum to 1, got {total}"
            )));
        }
        Ok(MixtureParams { alphas, components })
    }

    /// Equal weights over `components`.
    pub fn uniform(components: Vec<VmfParams>) -> Result<Self> {
        let m = components.len().max(1);
        MixtureParams::new(
            Array1::from_elem(components.len(), 1.0 / m as f64),
            components,
        )
    }

    pub fn order(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn alphas(&self) -> &Array1<f64> {
        &self.alphas
    }

    pub fn components(&self) -> &[VmfParams] {
        &self.components
    }

    /// Components reordered so that entry `m` is old component `perm[m]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.order()];
        if perm.len() != self.order() {
            return Err(VmfError::invalid("permutation length must equal the order"));
        }
        for &p in perm {
            if p >= self.order() || std::mem::replace(&mut seen[p], true) {
                return Err(VmfError::invalid("not a permutation"));
            }
        }
        Ok(MixtureParams {
            alphas: perm.iter().map(|&p| self.alphas[p]).collect(),
            components: perm.iter().map(|&p| self.components[p].clone()).collect(),
        })
    }

    pub(crate) fn from_parts_unchecked(alphas: Array1<f64>, components: Vec<VmfParams>) -> Self {
        MixtureParams { alphas, components }
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Array1<f64>, &mut Vec<VmfParams>) {
        (&mut self.alphas, &mut self.components)
    }
}

/// `n` draws from the mixture with their component labels.
pub fn sample_mixture(
    mix: &MixtureParams,
    n: usize,
    cfg: &SamplerConfig,
) -> Result<(Dataset, Vec<usize>)> {
    if n == 0 {
        return Err(VmfError::invalid("sample count must be >= 1"));
    }
    let mut rng = seeded_rng(cfg.seed);
    let cumulative: Vec<f64> = mix
        .alphas
        .iter()
        .scan(0.0, |acc, &a| {
            *acc += a;
            Some(*acc)
        })
        .collect();
    let labels: Vec<usize> = (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
            cumulative.partition_point(|&c| c <= u).min(mix.order() - 1)
        })
        .collect();
    let mut rows = Array2::zeros((n, mix.dim()));
    for (m, comp) in mix.components.iter().enumerate() {
        let slots: Vec<usize> = (0..n).filter(|&i| labels[i] == m).collect();
        if slots.is_empty() {
            continue;
        }
        let (block, _) = sample_vmf_with_rng(comp, slots.len(), cfg.max_rejections, &mut rng)?;
        for (r, &i) in slots.iter().enumerate() {
            rows.row_mut(i).assign(&block.row(r));
        }
    }
    Ok((Dataset::from_trusted(rows), labels))
}

/// A random mixture with well-separated components.
///
/// Mean directions are uniform on the sphere, redrawn until every pairwise
/// cosine is at most `max_cosine`; concentrations are log-uniform in
/// `kappa_range`; weights are proportional to draws from `[0.5, 1.5)`.
pub fn random_well_separated(
    d: usize,
    order: usize,
    kappa_range: (f64, f64),
    max_cosine: f64,
    seed: u64,
) -> Result<MixtureParams> {
    if d < 2 || order == 0 {
        return Err(VmfError::invalid("need d >= 2 and at least one component"));
    }
    let (lo, hi) = kappa_range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(VmfError::invalid(format!(
            "bad concentration range [{lo}, {hi}]"
        )));
    }
    if !(-1.0..=1.0).contains(&max_cosine) {
        return Err(VmfError::invalid("max_cosine must lie in [-1, 1]"));
    }
    let mut rng = seeded_rng(seed);
    let mut dirs: Vec<Array1<f64>> = Vec::with_capacity(order);
    let mut attempts = 0usize;
    while dirs.len() < order {
        attempts += 1;
        if attempts > 10_000 * order {
            return Err(VmfError::invalid(format!(
                "could not place {order} directions in d = {d} with pairwise cosine <= {max_cosine}"
            )));
        }
        let g: Array1<f64> = (0..d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let v = normalize(g.view())?.into_inner();
        if dirs.iter().all(|u| u.dot(&v) <= max_cosine) {
            dirs.push(v);
        }
    }
    let comps = dirs
        .into_iter()
        .map(|v| {
            let kappa = (lo.ln() + rng.random::<f64>() * (hi / lo).ln()).exp();
            VmfParams::new(v, kappa)
        })
        .collect::<Result<Vec<_>>>()?;
    let w: Array1<f64> = (0..order).map(|_| 0.5 + rng.random::<f64>()).collect();
    let total = w.sum();
    MixtureParams::new(w / total, comps)
}

/// Posterior membership probabilities, one row per observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Responsibilities(Array2<f64>);

impl Responsibilities {
    /// Requires entries in `[0, 1]` and rows summing to one within 1e-9.
    pub fn new(q: Array2<f64>) -> Result<Self> {
        if q.ncols() == 0 {
            return Err(VmfError::invalid(
                "responsibilities need at least one column",
            ));
        }
        for (i, row) in q.axis_iter(Axis(0)).enumerate() {
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(VmfError::invalid(format!(
                    "row {i} has entries outside [0, 1]"
                )));
            }
            let s = row.sum();
            if (s - 1.0).abs() > SIMPLEX_TOL {
                return Err(VmfError::invalid(format!("row {i} sums to {s}")));
            }
        }
        Ok(Responsibilities(q))
    }

    /// One-hot rows from hard labels in `[0, order)`.
    pub fn one_hot(labels: &[usize], order: usize) -> Result<Self> {
        let mut q = Array2::zeros((labels.len(), order));
        for (i, &l) in labels.iter().enumerate() {
            if l >= order {
                return Err(VmfError::invalid(format!(
                    "label {l} out of range for order {order}"
                )));
            }
            q[[i, l]] = 1.0;
        }
        Ok(Responsibilities(q))
    }

    pub fn q(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.ncols()
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// `log Σ exp(v)`, ignoring `-∞` entries; `-∞` if all are.
pub(crate) fn log_sum_exp(v: ArrayView1<'_, f64>) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: f64 = v.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

fn check_dims(mix: &MixtureParams, data: &Dataset) -> Result<()> {
    if data.dim() != mix.dim() {
        return Err(VmfError::DimensionMismatch {
            expected: mix.dim(),
            found: data.dim(),
        });
    }
    Ok(())
}

/// `log α_m + log C_d(κ_m)` for each component.
pub(crate) fn component_offsets(mix: &MixtureParams) -> Result<Array1<f64>> {
    let d = mix.dim();
    mix.components
        .iter()
        .zip(mix.alphas.iter())
        .map(|(c, &a)| Ok(a.ln() + log_norm_const(d, c.kappa())?))
        .collect()
}

/// `N × M` matrix of `log α_m + log p_m(x_i)`.
pub(crate) fn log_joint(mix: &MixtureParams, data: &Dataset) -> Result<Array2<f64>> {
    let offsets = component_offsets(mix)?;
    let mut scaled_mu = Array2::zeros((mix.dim(), mix.order()));
    for (m, c) in mix.components.iter().enumerate() {
        scaled_mu
            .column_mut(m)
            .assign(&c.mu().mapv(|v| v * c.kappa()));
    }
    let mut lj = data.rows().dot(&scaled_mu);
    for mut row in lj.rows_mut() {
        row += &offsets;
    }
    Ok(lj)
}

/// Normalizes each row of a log-joint matrix in place, returning the row log-normalizers.
pub(crate) fn normalize_rows(lj: &mut Array2<f64>) -> Array1<f64> {
    let mut marg = Array1::zeros(lj.nrows());
    for (i, mut row) in lj.rows_mut().into_iter().enumerate() {
        let lse = log_sum_exp(row.view());
        marg[i] = lse;
        row.mapv_inplace(|v| (v - lse).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    marg
}

/// `log p(x) = log Σ α_m p_m(x)`.
pub fn log_marginal(mix: &MixtureParams, x: &UnitVector) -> Result<f64> {
    if x.dim() != mix.dim() {
        return Err(VmfError::DimensionMismatch {
            expected: mix.dim(),
            found: x.dim(),
        });
    }
    let offsets = component_offsets(mix)?;
    let terms: Array1<f64> = mix
        .components
        .iter()
        .zip(offsets.iter())
        .map(|(c, &o)| o + c.kappa() * c.mu().dot(&x.view()))
        .collect();
    Ok(log_sum_exp(terms.view()))
}

/// Per-point `log p(x_i)`.
pub fn log_marginals(mix: &MixtureParams, data: &Dataset) -> Result<Array1<f64>> {
    check_dims(mix, data)?;
    let lj = log_joint(mix, data)?;
    Ok(lj.rows().into_iter().map(log_sum_exp).collect())
}

/// Total log-likelihood `Σ_i log p(x_i)`.
pub fn log_likelihood(mix: &MixtureParams, data: &Dataset) -> Result<f64> {
    Ok(log_marginals(mix, data)?.sum())
}

/// Posterior `q_i(m) = α_m p_m(x_i) / Σ_k α_k p_k(x_i)`.
pub fn e_step(mix: &MixtureParams, data: &Dataset) -> Result<Responsibilities> {
    e_step_with_ll(mix, data).map(|(q, _)| q)
}

/// E-step together with the per-point log marginals.
pub(crate) fn e_step_with_ll(
    mix: &MixtureParams,
    data: &Dataset,
) -> Result<(Responsibilities, Array1<f64>)> {
    if data.is_empty() {
        return Err(VmfError::invalid("dataset is empty"));
    }
    check_dims(mix, data)?;
    let mut lj = log_joint(mix, data)?;
    let marg = normalize_rows(&mut lj);
    if marg.iter().any(|v| !v.is_finite()) {
        return Err(VmfError::numerical(
            "non-finite log marginal in E-step",
            None,
        ));
    }
    Ok((Responsibilities(lj), marg))
}

/// One closed-form component update, or `None` for a collapsed component.
pub(crate) struct ComponentUpdate {
    pub(crate) mass: f64,
    pub(crate) params: Option<VmfParams>,
}

pub(crate) fn m_step_components(
    q: &Responsibilities,
    data: &Dataset,
    min_mass: f64,
    update: KappaUpdate,
) -> Result<Vec<ComponentUpdate>> {
    if q.len() != data.len() {
        return Err(VmfError::DimensionMismatch {
            expected: data.len(),
            found: q.len(),
        });
    }
    if data.is_empty() {
        return Err(VmfError::invalid("dataset is empty"));
    }
    let d = data.dim();
    // column m holds Σ_i q_i(m) x_i
    let sums = data.rows().t().dot(q.q());
    let masses = q.q().sum_axis(Axis(0));
    (0..q.order())
        .map(|m| {
            let mass = masses[m];
            if !(mass >= min_mass) || mass == 0.0 {
                return Ok(ComponentUpdate { mass, params: None });
            }
            let s = sums.column(m);
            let norm = s.dot(&s).sqrt();
            if !(norm > 0.0) {
                // balanced responsibilities: the component is uniform
                let basis = UnitVector::basis(d, 0)?.into_inner();
                return Ok(ComponentUpdate {
                    mass,
                    params: Some(VmfParams::new(basis, 0.0)?),
                });
            }
            let mut r = norm / mass;
            if r >= MAX_RESULTANT {
                log::warn!("component {m}: resultant {r} clamped below 1");
                r = MAX_RESULTANT;
            }
            let kappa = match update {
                KappaUpdate::ClosedForm => invert_bessel_ratio(d, r)?,
                KappaUpdate::Exact => solve_bessel_ratio(d, r)?,
            };
            Ok(ComponentUpdate {
                mass,
                params: Some(VmfParams::from_direction(s, kappa)?),
            })
        })
        .collect()
}

/// Closed-form maximizer of the expected complete-data log-likelihood,
/// with `κ_m = invert_bessel_ratio(d, R_m)`.
pub fn m_step(q: &Responsibilities, data: &Dataset) -> Result<MixtureParams> {
    m_step_with_min_mass(q, data, EmConfig::default().min_component_mass)
}

/// As [`m_step`], signalling a component whose mass falls below `min_mass`.
pub fn m_step_with_min_mass(
    q: &Responsibilities,
    data: &Dataset,
    min_mass: f64,
) -> Result<MixtureParams> {
    let updates = m_step_components(q, data, min_mass, KappaUpdate::ClosedForm)?;
    let n = data.len() as f64;
    let mut alphas = Array1::zeros(updates.len());
    let mut comps = Vec::with_capacity(updates.len());
    for (m, u) in updates.into_iter().enumerate() {
        match u.params {
            Some(p) => comps.push(p),
            None => {
                return Err(VmfError::ComponentCollapse {
                    component: m,
                    reseeds: 0,
                })
            }
        }
        alphas[m] = u.mass / n;
    }
    let total = alphas.sum();
    alphas /= total;
    Ok(MixtureParams::from_parts_unchecked(alphas, comps))
}

#[cfg(test)]
mod tests;
