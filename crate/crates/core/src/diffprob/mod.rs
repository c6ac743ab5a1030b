//! Automatic differentiation and variational inference.

pub mod adam;
pub mod tape;
pub mod variational;

use thiserror::Error;

pub use adam::{clip_global_norm, AdamState};
pub use tape::{Gradients, Tape, Var};
pub use variational::{
    elbo_estimate, fit_guide, grad_elbo, grad_elbo_reparam, grad_elbo_score, kl_gaussian, ElboEstimate,
    ElboGradient, Estimator, FitOptions, Guide, Model, Prior, TraceRow, VariationalParameter,
    mix_seed, trace_csv,
};

#[derive(Debug, Error, PartialEq)]
pub enum DiffProbError {
    #[error("shape mismatch: optimizer holds {expected} parameters, got {params} values and {grads} gradients")]
    Shape { expected: usize, params: usize, grads: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("non-finite log-likelihood ({value}) in Monte Carlo sample {sample}; most extreme draw in parameter {parameter}")]
    NonFinite { sample: usize, parameter: String, value: f64 },
    #[error("optimization diverged at step {step}: {source}")]
    AtStep { step: usize, source: Box<DiffProbError> },
}
