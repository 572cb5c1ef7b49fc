//! Von Mises–Fisher distributions on the unit hypersphere: numerically stable
//! Bessel evaluation, exact sampling, parameter estimation, mixture models
//! and spherical clustering.

// `!(x > 0.0)` is used on purpose so NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod cluster;
pub mod error;
pub mod estimators;
pub mod mixture;
pub mod optim;
pub mod rng;
pub mod sampler;
pub mod vmf;

pub use error::{Result, VmfError};
pub use sampler::{sample_vmf, SamplerConfig};
pub use vmf::{Dataset, UnitVector, VmfParams};
