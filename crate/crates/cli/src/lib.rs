//! Command-line front end for `vmfkit`.
//!
//! `main.rs` only parses arguments and maps errors to exit codes; the
//! subcommands live in [`commands`] so they can be driven from tests.

pub mod commands;
pub mod error;
pub mod experiment;
pub mod io;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vmfkit::estimators::{KappaParam, SgdConfig};
use vmfkit::mixture::{EmConfig, KappaUpdate};
use vmfkit::optim::Optimizer;

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "vmfkit",
    version,
    about = "von Mises-Fisher sampling, estimation, mixtures and clustering"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw samples from a vMF distribution into a CSV file.
    Sample(SampleArgs),
    /// Fit a single vMF distribution.
    Fit(FitArgs),
    /// Fit a vMF mixture.
    FitMix(FitMixArgs),
    /// Cluster embeddings and score them against reference labels.
    Cluster(ClusterArgs),
    /// Evaluate log I_s(x), or the ratio I_{s+1}(x)/I_s(x).
    Bessel(BesselArgs),
    /// Run a synthetic experiment sweep.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, Args)]
pub struct SeedArg {
    /// Random seed.
    #[arg(long, env = "VMFKIT_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct CsvArgs {
    /// Input and output CSV files carry a header row.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("mean").required(true).args(["mu_file", "mu_e1"])))]
pub struct SampleArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: f64,
    /// CSV file holding the mean direction as one row; it is normalized.
    #[arg(long)]
    pub mu_file: Option<PathBuf>,
    /// Use the first standard basis vector as the mean direction.
    #[arg(long)]
    pub mu_e1: bool,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the generating parameters as JSON.
    #[arg(long)]
    pub params_out: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMethod {
    Batch,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    PlainSgd,
    AdaptiveMoment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KappaParamArg {
    Log,
    Direct,
}

#[derive(Debug, Clone, Args)]
pub struct SgdArgs {
    /// Initial learning rate [default: 0.01].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Multiplicative learning-rate decay per epoch [default: 0.95].
    #[arg(long)]
    pub lr_decay: Option<f64>,
    /// Minibatch size [default: 128].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Passes over the data [default: 100].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: adaptive-moment]
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    /// Coordinate the optimizer steps κ in [default: log].
    #[arg(long, value_enum)]
    pub kappa_param: Option<KappaParamArg>,
    #[arg(long)]
    pub kappa_floor: Option<f64>,
    #[arg(long)]
    pub kappa_ceiling: Option<f64>,
}

impl SgdArgs {
    pub fn config(&self, seed: u64) -> SgdConfig {
        let mut c = SgdConfig {
            seed,
            ..Default::default()
        };
        if let Some(v) = self.lr {
            c.lr = v;
        }
        if let Some(v) = self.lr_decay {
            c.lr_decay_per_epoch = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.optimizer {
            c.optimizer = match v {
                OptimizerArg::PlainSgd => Optimizer::PlainSgd,
                OptimizerArg::AdaptiveMoment => Optimizer::AdaptiveMoment,
            };
        }
        if let Some(v) = self.kappa_param {
            c.kappa_param = match v {
                KappaParamArg::Log => KappaParam::Log,
                KappaParamArg::Direct => KappaParam::Direct,
            };
        }
        if let Some(v) = self.kappa_floor {
            c.kappa_floor = v;
        }
        if let Some(v) = self.kappa_ceiling {
            c.kappa_ceiling = v;
        }
        c
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub method: FitMethod,
    /// CSV of unit vectors, one per row.
    #[arg(long)]
    pub data: PathBuf,
    /// Known parameters (JSON) to compute estimation errors against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Where to write the fitted parameters (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the JSON report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Rescale every input row to unit length instead of rejecting non-unit rows.
    #[arg(long)]
    pub normalize: bool,
    #[command(flatten)]
    pub sgd: SgdArgs,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MixMethod {
    Em,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KappaUpdateArg {
    Exact,
    ClosedForm,
}

#[derive(Debug, Clone, Args)]
pub struct EmArgs {
    /// EM iteration cap [default: 100].
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Relative log-likelihood improvement below which EM stops [default: 1e-5].
    #[arg(long)]
    pub tol: Option<f64>,
    /// How the M-step computes κ [default: exact].
    #[arg(long, value_enum)]
    pub kappa_update: Option<KappaUpdateArg>,
}

impl EmArgs {
    pub fn config(&self, seed: u64) -> EmConfig {
        let mut c = EmConfig {
            seed,
            ..Default::default()
        };
        if let Some(v) = self.max_iters {
            c.max_iters = v;
        }
        if let Some(v) = self.tol {
            c.rel_ll_tol = v;
        }
        if let Some(v) = self.kappa_update {
            c.kappa_update = match v {
                KappaUpdateArg::Exact => KappaUpdate::Exact,
                KappaUpdateArg::ClosedForm => KappaUpdate::ClosedForm,
            };
        }
        c
    }
}

#[derive(Debug, Args)]
pub struct FitMixArgs {
    #[arg(long, value_enum)]
    pub method: MixMethod,
    #[arg(long)]
    pub data: PathBuf,
    /// Number of components.
    #[arg(long)]
    pub order: usize,
    /// Known mixture (JSON) to compute permutation-matched errors against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub normalize: bool,
    #[command(flatten)]
    pub em: EmArgs,
    #[command(flatten)]
    pub sgd: SgdArgs,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClusterMethod {
    Em,
    Sgd,
    Kmeans,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// CSV of embeddings, one per row.
    #[arg(long)]
    pub data: PathBuf,
    /// Reference labels, one integer per line.
    #[arg(long)]
    pub labels: PathBuf,
    /// Number of clusters.
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum)]
    pub method: ClusterMethod,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write the predicted labels, one per line.
    #[arg(long)]
    pub assignments_out: Option<PathBuf>,
    #[arg(long)]
    pub normalize: bool,
    /// k-means restarts [default: 10].
    #[arg(long)]
    pub n_init: Option<usize>,
    #[command(flatten)]
    pub em: EmArgs,
    #[command(flatten)]
    pub sgd: SgdArgs,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Args)]
pub struct BesselArgs {
    /// Order s >= 0.
    #[arg(long, allow_negative_numbers = true)]
    pub order: f64,
    /// Argument x >= 0.
    #[arg(long, allow_negative_numbers = true)]
    pub arg: f64,
    /// Print I_{s+1}(x)/I_s(x) instead of log I_s(x).
    #[arg(long)]
    pub ratio: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub kind: experiment::ExperimentKind,
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Comma-separated concentrations (for `cluster`: LO,HI).
    #[arg(long, value_delimiter = ',')]
    pub kappas: Option<Vec<f64>>,
    /// Points per dataset.
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated seeds; defaults to the single seed from --seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Mixture order for `mixture-synth` and `cluster`.
    #[arg(long)]
    pub order: Option<usize>,
    /// Directory receiving `<kind>.json` and `<kind>.txt`.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub seed: SeedArg,
}

/// Dispatches a parsed command line.
pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Sample(a) => commands::sample(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::FitMix(a) => commands::fit_mix(&a),
        Command::Cluster(a) => commands::cluster(&a),
        Command::Bessel(a) => commands::bessel(&a),
        Command::Experiment(a) => commands::experiment(&a),
    }
}
