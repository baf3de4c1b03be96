//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by state construction, objectives, the solver, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A subgroup's total mass underflowed to zero; renormalization is impossible.
    #[error("subgroup {group} has zero total mass")]
    ZeroMass { group: usize },

    /// An argument fell outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A logarithmic-barrier argument was driven to or past its singularity.
    #[error("barrier violation: {0}")]
    BarrierViolation(String),

    /// A gradient evaluated to NaN or infinity.
    #[error("non-finite gradient at node {node}")]
    NonFiniteGradient { node: usize },

    /// The Baum-Eagon normalizer was non-positive.
    #[error("degenerate eta ({eta}) in subgroup {group}")]
    DegenerateEta { group: usize, eta: f64 },

    /// The solver hit its iteration cap before the convergence test fired.
    #[error("maximum step count {max_steps} exceeded (best cost {best_cost})")]
    MaxStepsExceeded { max_steps: usize, best_cost: f64 },

    /// The reference QP solver failed to reach its KKT tolerance.
    #[error("oracle QP did not converge after {iters} iterations (residual {residual})")]
    NoConvergence { iters: usize, residual: f64 },

    /// A node has no finite LC realization (floating or short-circuit node).
    #[error("node {node} is not resonant: |V| or |I| below threshold")]
    NotResonantNode { node: usize },

    /// A data file failed to parse.
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// A sparse-format feature index was non-positive.
    #[error("index error at {path}:{line}: index {index} (must be >= 1)")]
    Index {
        path: String,
        line: usize,
        index: i64,
    },

    /// A label filter matched no rows.
    #[error("empty selection: no rows with label {label:?} in {path}")]
    EmptySelection { path: String, label: String },

    /// A configuration value was rejected.
    #[error("config error at {field}: {message}")]
    Config { field: String, message: String },

    /// Underlying I/O failure.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Model persistence (de)serialization failure.
    #[error("model serialization: {0}")]
    ModelFormat(String),

    /// A persisted model does not match the dataset it is being applied to.
    #[error("dataset fingerprint mismatch: model {expected:#018x}, data {actual:#018x}")]
    FingerprintMismatch { expected: u64, actual: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: msg.into(),
        }
    }
}
