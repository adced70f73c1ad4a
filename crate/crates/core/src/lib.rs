//! Time-varying parameter regressions estimated through a thin singular value
//! decomposition of the static-form design, with optional clustering of the
//! coefficient paths.

pub mod banded;
pub mod bench;
pub mod config;
pub mod baselines;
pub mod design;
pub mod dist;
pub mod error;
pub mod forecast;
pub mod ingest;
pub mod mcmc;
pub mod mixture;
pub mod priors;
pub mod rng;
pub mod samplers;
pub mod simulate;

pub use error::{Error, ErrorKind, Result};
