//! Subcommand implementations.

use serde::Serialize;
use vmfkit::bessel::{bessel_ratio, log_bessel_i, BesselEvalConfig, BesselOrder};
use vmfkit::cluster::{assign, kmeans, ClusterMetrics, KMeansConfig};
use vmfkit::estimators::{fit_batch, fit_sgd, FitReport, SgdConfig};
use vmfkit::mixture::{
    fit_em, fit_mix_sgd, permutation_matched_error, EmConfig, MatchedError, MixtureFit,
    MixtureParams,
};
use vmfkit::sampler::{sample_vmf, SamplerConfig};
use vmfkit::vmf::VmfParams;

use crate::error::{CliError, CliResult};
use crate::experiment::{self, ErasedReport, ExperimentSpec};
use crate::io;
use crate::report::{fixed, sci, Header, Report, Table};
use crate::{
    BesselArgs, ClusterArgs, ClusterMethod, ExperimentArgs, FitArgs, FitMethod, FitMixArgs,
    MixMethod, SampleArgs,
};

fn vector_text(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn sample(a: &SampleArgs) -> CliResult<()> {
    if a.n == 0 {
        return Err(CliError::usage("--n must be >= 1"));
    }
    if a.dim < 2 {
        return Err(CliError::usage("--dim must be >= 2"));
    }
    let mu = match &a.mu_file {
        Some(path) => {
            let m = io::read_matrix(path, false)?;
            if m.nrows() != 1 || m.ncols() != a.dim {
                return Err(CliError::parse(
                    path,
                    format!(
                        "expected one row of {} values, found {}x{}",
                        a.dim,
                        m.nrows(),
                        m.ncols()
                    ),
                ));
            }
            m.row(0).to_owned()
        }
        None => {
            let mut e1 = ndarray::Array1::zeros(a.dim);
            e1[0] = 1.0;
            e1
        }
    };
    let params = VmfParams::from_direction(mu.view(), a.kappa)?;
    let data = sample_vmf(&params, a.n, &SamplerConfig::with_seed(a.seed.seed))?;
    io::write_matrix(&a.out, &data.rows().to_owned(), a.csv.header)?;
    if let Some(path) = &a.params_out {
        io::write_json(path, &params)?;
    }
    println!(
        "wrote {} samples in d = {} to {}",
        a.n,
        a.dim,
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct FitConfig {
    method: &'static str,
    data_sha256: String,
    n: usize,
    d: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    sgd: Option<SgdConfig>,
}

pub fn fit(a: &FitArgs) -> CliResult<()> {
    let data = io::read_dataset(&a.data, a.csv.header, a.normalize)?;
    let truth: Option<VmfParams> = a.truth.as_deref().map(io::read_json).transpose()?;
    if let Some(t) = &truth {
        if t.dim() != data.dim() {
            return Err(CliError::usage(format!(
                "truth has d = {} but data has d = {}",
                t.dim(),
                data.dim()
            )));
        }
    }
    let seed = a.seed.seed;
    let (method, sgd) = match a.method {
        FitMethod::Batch => ("batch", None),
        FitMethod::Sgd => ("sgd", Some(a.sgd.config(seed))),
    };
    let mut result: FitReport = match &sgd {
        None => fit_batch(&data)?,
        Some(cfg) => fit_sgd(&data, cfg)?,
    };
    if let Some(t) = &truth {
        result = result.with_truth(t)?;
    }
    io::write_json(&a.out, &result.params)?;
    let config = FitConfig {
        method,
        data_sha256: io::file_sha256(&a.data)?,
        n: data.len(),
        d: data.dim(),
        sgd,
    };
    let report = Report::new("fit", config, seed, result);
    if let Some(path) = &a.report {
        io::write_json(path, &report)?;
    }
    print!("{}", fit_text(&report.header, &report.result));
    Ok(())
}

fn fit_text(header: &Header, r: &FitReport) -> String {
    let mut t = Table::new(["quantity", "value"]);
    t.row(["kappa".to_string(), r.params.kappa().to_string()]);
    t.row([
        "mu".to_string(),
        vector_text(r.params.mu().as_slice().unwrap_or(&[])),
    ]);
    t.row(["iterations".to_string(), r.iterations.to_string()]);
    if let Some(ll) = r.ll_trace.last() {
        t.row(["mean log-likelihood".to_string(), ll.to_string()]);
    }
    if let Some(e) = r.errors() {
        t.row(["||mu - mu*||".to_string(), sci(e.e_mu)]);
        t.row(["||mu - mu*||^2".to_string(), sci(e.e_mu_sq)]);
        t.row(["|kappa - kappa*| / kappa*".to_string(), sci(e.e_kappa)]);
    }
    format!("{}{}", header.text(), t.render())
}

#[derive(Debug, Serialize)]
struct FitMixConfig {
    method: &'static str,
    data_sha256: String,
    n: usize,
    d: usize,
    order: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    em: Option<EmConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sgd: Option<SgdConfig>,
}

#[derive(Debug, Serialize)]
struct FitMixResult {
    #[serde(flatten)]
    fit: MixtureFit,
    #[serde(skip_serializing_if = "Option::is_none")]
    matched_error: Option<MatchedError>,
}

pub fn fit_mix(a: &FitMixArgs) -> CliResult<()> {
    if a.order == 0 {
        return Err(CliError::usage("--order must be >= 1"));
    }
    let data = io::read_dataset(&a.data, a.csv.header, a.normalize)?;
    let truth: Option<MixtureParams> = a.truth.as_deref().map(io::read_json).transpose()?;
    if let Some(t) = &truth {
        if t.order() != a.order || t.dim() != data.dim() {
            return Err(CliError::usage(format!(
                "truth has {} components in d = {}, fit asks for {} in d = {}",
                t.order(),
                t.dim(),
                a.order,
                data.dim()
            )));
        }
    }
    let seed = a.seed.seed;
    let (method, em, sgd) = match a.method {
        MixMethod::Em => ("em", Some(a.em.config(seed)), None),
        MixMethod::Sgd => ("sgd", None, Some(a.sgd.config(seed))),
    };
    let fit = match (&em, &sgd) {
        (Some(cfg), _) => fit_em(&data, a.order, cfg)?,
        (_, Some(cfg)) => fit_mix_sgd(&data, a.order, cfg)?,
        _ => unreachable!("one method is always selected"),
    };
    let matched_error = truth
        .as_ref()
        .map(|t| permutation_matched_error(&fit.params, t))
        .transpose()?;
    io::write_json(&a.out, &fit.params)?;
    let config = FitMixConfig {
        method,
        data_sha256: io::file_sha256(&a.data)?,
        n: data.len(),
        d: data.dim(),
        order: a.order,
        em,
        sgd,
    };
    let report = Report::new("fit-mix", config, seed, FitMixResult { fit, matched_error });
    if let Some(path) = &a.report {
        io::write_json(path, &report)?;
    }
    print!("{}", fit_mix_text(&report.header, &report.result));
    Ok(())
}

fn fit_mix_text(header: &Header, r: &FitMixResult) -> String {
    let mut t = Table::new(["component", "alpha", "kappa", "mu"]);
    for (m, c) in r.fit.params.components().iter().enumerate() {
        t.row([
            m.to_string(),
            fixed(r.fit.params.alphas()[m], 6),
            fixed(c.kappa(), 4),
            vector_text(c.mu().as_slice().unwrap_or(&[])),
        ]);
    }
    let mut out = header.text();
    out += &format!(
        "# iterations {}, converged {}, final log-likelihood {}\n",
        r.fit.iterations,
        r.fit.converged,
        r.fit.ll_trace.last().copied().unwrap_or(f64::NAN)
    );
    out += &t.render();
    if let Some(e) = &r.matched_error {
        let mut m = Table::new(["L1 error", "value"]);
        m.row(["alpha".to_string(), sci(e.alpha)]);
        m.row(["mu".to_string(), sci(e.mu)]);
        m.row(["kappa".to_string(), sci(e.kappa)]);
        out += "\n";
        out += &m.render();
    }
    out
}

#[derive(Debug, Serialize)]
struct ClusterConfig {
    method: &'static str,
    data_sha256: String,
    labels_sha256: String,
    n: usize,
    d: usize,
    k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    em: Option<EmConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sgd: Option<SgdConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kmeans: Option<KMeansConfig>,
}

#[derive(Debug, Serialize)]
struct ClusterResult {
    #[serde(flatten)]
    metrics: ClusterMetrics,
    reference_clusters: usize,
}

pub fn cluster(a: &ClusterArgs) -> CliResult<()> {
    if a.k == 0 {
        return Err(CliError::usage("--k must be >= 1"));
    }
    let data = io::read_dataset(&a.data, a.csv.header, a.normalize)?;
    let truth = io::read_labels(&a.labels, a.csv.header)?;
    if truth.len() != data.len() {
        return Err(CliError::usage(format!(
            "{} labels for {} embeddings",
            truth.len(),
            data.len()
        )));
    }
    let seed = a.seed.seed;
    let mut config = ClusterConfig {
        method: "",
        data_sha256: io::file_sha256(&a.data)?,
        labels_sha256: io::file_sha256(&a.labels)?,
        n: data.len(),
        d: data.dim(),
        k: a.k,
        em: None,
        sgd: None,
        kmeans: None,
    };
    let predicted = match a.method {
        ClusterMethod::Em => {
            let cfg = a.em.config(seed);
            config.method = "em";
            config.em = Some(cfg);
            assign(&fit_em(&data, a.k, &cfg)?.params, &data)?
        }
        ClusterMethod::Sgd => {
            let cfg = a.sgd.config(seed);
            config.method = "sgd";
            config.sgd = Some(cfg);
            assign(&fit_mix_sgd(&data, a.k, &cfg)?.params, &data)?
        }
        ClusterMethod::Kmeans => {
            let mut cfg = KMeansConfig {
                seed,
                ..Default::default()
            };
            if let Some(n) = a.n_init {
                cfg.n_init = n;
            }
            config.method = "kmeans";
            config.kmeans = Some(cfg);
            kmeans(&data, a.k, &cfg)?.labels
        }
    };
    let metrics = ClusterMetrics::compare(&predicted, &truth)?;
    if let Some(path) = &a.assignments_out {
        io::write_labels(path, &predicted, a.csv.header)?;
    }
    let report = Report::new(
        "cluster",
        config,
        seed,
        ClusterResult {
            metrics,
            reference_clusters: truth.k(),
        },
    );
    if let Some(path) = &a.report {
        io::write_json(path, &report)?;
    }
    let mut t = Table::new(["metric", "value"]);
    t.row(["ARI".to_string(), fixed(metrics.ari, 6)]);
    t.row(["NMI".to_string(), fixed(metrics.nmi, 6)]);
    print!("{}{}", report.header.text(), t.render());
    Ok(())
}

pub fn bessel(a: &BesselArgs) -> CliResult<()> {
    let order = BesselOrder::new(a.order)?;
    let cfg = BesselEvalConfig::default();
    let value = if a.ratio {
        bessel_ratio(order, a.arg, &cfg)?
    } else {
        log_bessel_i(order, a.arg, &cfg)?
    };
    println!("{value}");
    Ok(())
}

pub fn experiment(a: &ExperimentArgs) -> CliResult<()> {
    let mut spec = ExperimentSpec::defaults(a.kind, a.seed.seed);
    if let Some(v) = &a.dims {
        spec.dims = v.clone();
    }
    if let Some(v) = &a.kappas {
        spec.kappas = v.clone();
    }
    if let Some(v) = a.n {
        spec.n = v;
    }
    if let Some(v) = &a.seeds {
        spec.seeds = v.clone();
    }
    if a.order.is_some() {
        spec.order = a.order;
    }
    spec.output_dir = a.out_dir.clone();
    let name = a.kind.name();
    let json_path = spec.output_dir.join(format!("{name}.json"));
    let text_path = spec.output_dir.join(format!("{name}.txt"));
    experiment::run(&spec, |r: &dyn ErasedReport| {
        io::write_json(&json_path, &r.json())?;
        io::write_text(&text_path, r.text())?;
        if r.complete() {
            print!("{}", r.text());
        }
        Ok(())
    })
}
