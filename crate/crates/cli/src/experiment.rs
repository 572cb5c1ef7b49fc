//! Synthetic-data experiment sweeps.

use std::path::PathBuf;

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use vmfkit::cluster::{assign, kmeans, ClusterMetrics, KMeansConfig, LabelVector};
use vmfkit::estimators::{fit_batch, fit_sgd, RelativeErrors, SgdConfig};
use vmfkit::mixture::{
    fit_em, fit_mix_sgd, permutation_matched_error, random_well_separated, sample_mixture,
    EmConfig, MixtureParams,
};
use vmfkit::sampler::{sample_vmf, SamplerConfig};
use vmfkit::vmf::VmfParams;

use crate::error::{CliError, CliResult};
use crate::report::{fixed, sci, Header, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Batch vs SGD single-vMF estimation errors over a (d, κ*) grid.
    Table1,
    /// EM vs SGD recovery of a fixed three-component mixture in five dimensions.
    MixtureSynth,
    /// Mixture clustering vs k-means on well-separated synthetic embeddings.
    Cluster,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Table1 => "table1",
            ExperimentKind::MixtureSynth => "mixture-synth",
            ExperimentKind::Cluster => "cluster",
        }
    }
}

/// A sweep description. `output_dir` is where reports go and is not part of the config hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub dims: Vec<usize>,
    pub kappas: Vec<f64>,
    pub n: usize,
    pub seeds: Vec<u64>,
    /// Mixture order for `mixture-synth` and `cluster`.
    pub order: Option<usize>,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

impl ExperimentSpec {
    /// The protocol defaults for `kind`.
    pub fn defaults(kind: ExperimentKind, seed: u64) -> Self {
        let (dims, kappas, n, order) = match kind {
            ExperimentKind::Table1 => (vec![5, 20, 100], vec![50.0, 500.0], 10_000, None),
            ExperimentKind::MixtureSynth => (vec![5], vec![], 1000, Some(3)),
            ExperimentKind::Cluster => (vec![100], vec![100.0, 400.0], 2000, Some(10)),
        };
        ExperimentSpec {
            kind,
            dims,
            kappas,
            n,
            seeds: vec![seed],
            order,
            output_dir: PathBuf::from("."),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.n == 0 {
            return Err(CliError::usage("n must be >= 1"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::usage("at least one seed is required"));
        }
        if self.order == Some(0) {
            return Err(CliError::usage("order must be >= 1"));
        }
        if self.kappas.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(CliError::usage("concentrations must be finite and > 0"));
        }
        if self.dims.iter().any(|&d| d < 2) {
            return Err(CliError::usage("dimensions must be >= 2"));
        }
        match self.kind {
            ExperimentKind::Table1 => {
                if self.dims.is_empty() || self.kappas.is_empty() {
                    return Err(CliError::usage("table1 needs nonempty --dims and --kappas"));
                }
            }
            ExperimentKind::MixtureSynth => {
                if self.dims != [5] {
                    return Err(CliError::usage(
                        "mixture-synth uses the fixed 5-dimensional model",
                    ));
                }
                if self.order.unwrap_or(3) > 3 {
                    return Err(CliError::usage("mixture-synth order must be 1, 2 or 3"));
                }
            }
            ExperimentKind::Cluster => {
                if self.dims.len() != 1 {
                    return Err(CliError::usage("cluster takes exactly one dimension"));
                }
                if self.kappas.len() != 2 || self.kappas[0] > self.kappas[1] {
                    return Err(CliError::usage("cluster takes --kappas LO,HI"));
                }
            }
        }
        Ok(())
    }
}

/// Header, machine-readable rows, and the text rendering of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport<R> {
    pub header: Header,
    pub config: ExperimentSpec,
    /// False while cells are still being computed.
    pub complete: bool,
    pub rows: Vec<R>,
    #[serde(skip)]
    pub text: String,
}

fn seed_of(spec: &ExperimentSpec) -> u64 {
    spec.seeds[0]
}

/// Runs a sweep, calling `flush` with the partial report after every finished cell.
pub fn run<F>(spec: &ExperimentSpec, flush: F) -> CliResult<()>
where
    F: FnMut(&dyn ErasedReport) -> CliResult<()>,
{
    spec.validate()?;
    match spec.kind {
        ExperimentKind::Table1 => run_table1(spec, flush).map(|_| ()),
        ExperimentKind::MixtureSynth => run_mixture_synth(spec, flush).map(|_| ()),
        ExperimentKind::Cluster => run_cluster(spec, flush).map(|_| ()),
    }
}

/// Object-safe view of a report for writers.
pub trait ErasedReport {
    fn json(&self) -> serde_json::Value;
    fn text(&self) -> &str;
    fn complete(&self) -> bool;
}

impl<R: Serialize> ErasedReport for ExperimentReport<R> {
    fn json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("reports serialize")
    }

    fn text(&self) -> &str {
        &self.text
    }

    fn complete(&self) -> bool {
        self.complete
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table1Row {
    pub d: usize,
    pub kappa: f64,
    pub seed: u64,
    pub batch: RelativeErrors,
    pub sgd: RelativeErrors,
}

/// Uniformly random mean direction on `S^{d-1}`, derived from `seed`.
fn random_direction(d: usize, seed: u64) -> CliResult<Array1<f64>> {
    let uniform = VmfParams::new(Array1::from_vec(unit_e1(d)), 0.0)?;
    let draw = sample_vmf(&uniform, 1, &SamplerConfig::with_seed(seed))?;
    Ok(draw.row(0).to_owned())
}

fn unit_e1(d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[0] = 1.0;
    v
}

/// The ground-truth direction stream is kept apart from the data stream.
const TRUTH_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

fn table1_cell(d: usize, kappa: f64, n: usize, seed: u64) -> CliResult<Table1Row> {
    let mu = random_direction(d, seed.wrapping_add(TRUTH_SEED_OFFSET))?;
    let truth = VmfParams::from_direction(mu.view(), kappa)?;
    let data = sample_vmf(&truth, n, &SamplerConfig::with_seed(seed))?;
    let errs = |r: vmfkit::estimators::FitReport| -> CliResult<RelativeErrors> {
        Ok(r.with_truth(&truth)?.errors().expect("truth supplied"))
    };
    let batch = errs(fit_batch(&data)?)?;
    let sgd = errs(fit_sgd(
        &data,
        &SgdConfig {
            seed,
            ..Default::default()
        },
    )?)?;
    Ok(Table1Row {
        d,
        kappa,
        seed,
        batch,
        sgd,
    })
}

fn table1_text(header: &Header, spec: &ExperimentSpec, rows: &[Table1Row]) -> String {
    let mut t = Table::new([
        "d",
        "kappa*",
        "e_mu batch",
        "e_mu sgd",
        "e_kappa batch",
        "e_kappa sgd",
    ]);
    for &d in &spec.dims {
        for &kappa in &spec.kappas {
            let cell: Vec<&Table1Row> = rows
                .iter()
                .filter(|r| r.d == d && r.kappa == kappa)
                .collect();
            if cell.is_empty() {
                continue;
            }
            let med = |f: fn(&Table1Row) -> f64| sci(median(cell.iter().map(|r| f(r)).collect()));
            t.row([
                d.to_string(),
                kappa.to_string(),
                med(|r| r.batch.e_mu_sq),
                med(|r| r.sgd.e_mu_sq),
                med(|r| r.batch.e_kappa),
                med(|r| r.sgd.e_kappa),
            ]);
        }
    }
    format!(
        "{}# N = {}, medians over {} seed(s); e_mu = ||mu - mu*||^2, e_kappa = |kappa - kappa*| / kappa*\n{}",
        header.text(),
        spec.n,
        spec.seeds.len(),
        t.render()
    )
}

pub fn run_table1<F>(spec: &ExperimentSpec, mut flush: F) -> CliResult<ExperimentReport<Table1Row>>
where
    F: FnMut(&dyn ErasedReport) -> CliResult<()>,
{
    let header = Header::new("experiment table1", spec, seed_of(spec));
    let mut report = ExperimentReport {
        header,
        config: spec.clone(),
        complete: false,
        rows: Vec::new(),
        text: String::new(),
    };
    for &d in &spec.dims {
        for &kappa in &spec.kappas {
            for &seed in &spec.seeds {
                report.rows.push(table1_cell(d, kappa, spec.n, seed)?);
            }
            report.text = table1_text(&report.header, spec, &report.rows);
            flush(&report)?;
        }
    }
    report.complete = true;
    flush(&report)?;
    Ok(report)
}

/// The three-component ground truth in five dimensions.
pub fn reference_mixture() -> MixtureParams {
    let mu1 = Array1::from(vec![0.0889, -0.3556, 0.6815, 0.1185, 0.6222]);
    let mu2 = Array1::from(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    let mu3 = -&mu1;
    let comps = [(mu1, 100.0), (mu2, 50.0), (mu3, 100.0)]
        .into_iter()
        .map(|(mu, k)| VmfParams::from_direction(mu.view(), k).expect("valid ground truth"))
        .collect();
    MixtureParams::new(Array1::from(vec![0.3, 0.4, 0.3]), comps).expect("valid ground truth")
}

/// The reference model restricted to its first `order` components, weights renormalized.
fn truncated_reference(order: usize) -> CliResult<MixtureParams> {
    let full = reference_mixture();
    let alphas = full.alphas().slice(ndarray::s![..order]).to_owned();
    let total = alphas.sum();
    Ok(MixtureParams::new(
        alphas / total,
        full.components()[..order].to_vec(),
    )?)
}

/// Settings of the mixture SGD run: batch 64, 100 epochs, lr 0.1 decaying 0.95 per epoch.
pub fn mixture_sgd_config(seed: u64) -> SgdConfig {
    SgdConfig {
        lr: 0.1,
        lr_decay_per_epoch: 0.95,
        batch_size: 64,
        epochs: 100,
        seed,
        ..Default::default()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct L1Errors {
    pub alpha: f64,
    pub mu: f64,
    pub kappa: f64,
    /// `perm[m]` is the learned component matched to true component `m`.
    pub perm: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureRow {
    pub seed: u64,
    pub em: L1Errors,
    pub em_iterations: usize,
    pub em_converged: bool,
    pub sgd: L1Errors,
}

fn l1(learned: &MixtureParams, truth: &MixtureParams) -> CliResult<L1Errors> {
    let e = permutation_matched_error(learned, truth)?;
    Ok(L1Errors {
        alpha: e.alpha,
        mu: e.mu,
        kappa: e.kappa,
        perm: e.perm,
    })
}

pub fn run_mixture_synth<F>(
    spec: &ExperimentSpec,
    mut flush: F,
) -> CliResult<ExperimentReport<MixtureRow>>
where
    F: FnMut(&dyn ErasedReport) -> CliResult<()>,
{
    let order = spec.order.unwrap_or(3);
    let truth = truncated_reference(order)?;
    let header = Header::new("experiment mixture-synth", spec, seed_of(spec));
    let mut report = ExperimentReport {
        header,
        config: spec.clone(),
        complete: false,
        rows: Vec::new(),
        text: String::new(),
    };
    for &seed in &spec.seeds {
        let (data, _) = sample_mixture(&truth, spec.n, &SamplerConfig::with_seed(seed))?;
        let em = fit_em(
            &data,
            order,
            &EmConfig {
                seed,
                ..Default::default()
            },
        )?;
        let sgd = fit_mix_sgd(&data, order, &mixture_sgd_config(seed))?;
        report.rows.push(MixtureRow {
            seed,
            em: l1(&em.params, &truth)?,
            em_iterations: em.iterations,
            em_converged: em.converged,
            sgd: l1(&sgd.params, &truth)?,
        });
        report.text = mixture_text(&report.header, spec, order, &report.rows);
        flush(&report)?;
    }
    report.complete = true;
    flush(&report)?;
    Ok(report)
}

fn mixture_text(
    header: &Header,
    spec: &ExperimentSpec,
    order: usize,
    rows: &[MixtureRow],
) -> String {
    let mut t = Table::new([
        "seed",
        "em alpha",
        "em mu",
        "em kappa",
        "em iters",
        "sgd alpha",
        "sgd mu",
        "sgd kappa",
    ]);
    for r in rows {
        t.row([
            r.seed.to_string(),
            fixed(r.em.alpha, 4),
            fixed(r.em.mu, 4),
            fixed(r.em.kappa, 3),
            r.em_iterations.to_string(),
            fixed(r.sgd.alpha, 4),
            fixed(r.sgd.mu, 4),
            fixed(r.sgd.kappa, 3),
        ]);
    }
    format!(
        "{}# N = {}, order {order}; summed L1 errors after permutation matching\n{}",
        header.text(),
        spec.n,
        t.render()
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterRow {
    pub seed: u64,
    pub em: ClusterMetrics,
    pub sgd: ClusterMetrics,
    pub kmeans: ClusterMetrics,
}

/// Largest pairwise cosine between ground-truth mean directions.
pub const CLUSTER_MAX_COSINE: f64 = 0.5;

/// Ground-truth streams are offset from the data streams.
const CLUSTER_TRUTH_OFFSET: u64 = 7000;

pub fn run_cluster<F>(
    spec: &ExperimentSpec,
    mut flush: F,
) -> CliResult<ExperimentReport<ClusterRow>>
where
    F: FnMut(&dyn ErasedReport) -> CliResult<()>,
{
    let d = spec.dims[0];
    let order = spec.order.unwrap_or(10);
    if spec.n < order {
        return Err(CliError::usage(format!("need n >= order ({order})")));
    }
    let header = Header::new("experiment cluster", spec, seed_of(spec));
    let mut report = ExperimentReport {
        header,
        config: spec.clone(),
        complete: false,
        rows: Vec::new(),
        text: String::new(),
    };
    for &seed in &spec.seeds {
        let truth = random_well_separated(
            d,
            order,
            (spec.kappas[0], spec.kappas[1]),
            CLUSTER_MAX_COSINE,
            seed.wrapping_add(CLUSTER_TRUTH_OFFSET),
        )?;
        let (data, labels) = sample_mixture(&truth, spec.n, &SamplerConfig::with_seed(seed))?;
        let truth_labels = LabelVector::new(labels, order)?;
        let score = |l: &LabelVector| ClusterMetrics::compare(l, &truth_labels);
        let em = fit_em(
            &data,
            order,
            &EmConfig {
                seed,
                ..Default::default()
            },
        )?;
        let sgd = fit_mix_sgd(
            &data,
            order,
            &SgdConfig {
                seed,
                ..Default::default()
            },
        )?;
        let km = kmeans(
            &data,
            order,
            &KMeansConfig {
                seed,
                ..Default::default()
            },
        )?;
        report.rows.push(ClusterRow {
            seed,
            em: score(&assign(&em.params, &data)?)?,
            sgd: score(&assign(&sgd.params, &data)?)?,
            kmeans: score(&km.labels)?,
        });
        report.text = cluster_text(&report.header, spec, d, order, &report.rows);
        flush(&report)?;
    }
    report.complete = true;
    flush(&report)?;
    Ok(report)
}

fn cluster_text(
    header: &Header,
    spec: &ExperimentSpec,
    d: usize,
    order: usize,
    rows: &[ClusterRow],
) -> String {
    let mut t = Table::new([
        "seed",
        "em ARI",
        "em NMI",
        "sgd ARI",
        "sgd NMI",
        "k-means ARI",
        "k-means NMI",
    ]);
    for r in rows {
        t.row([
            r.seed.to_string(),
            fixed(r.em.ari, 4),
            fixed(r.em.nmi, 4),
            fixed(r.sgd.ari, 4),
            fixed(r.sgd.nmi, 4),
            fixed(r.kmeans.ari, 4),
            fixed(r.kmeans.nmi, 4),
        ]);
    }
    format!(
        "{}# d = {d}, {order} components, N = {}, kappa in [{}, {}], pairwise mean cosine <= {CLUSTER_MAX_COSINE}\n{}",
        header.text(),
        spec.n,
        spec.kappas[0],
        spec.kappas[1],
        t.render()
    )
}
