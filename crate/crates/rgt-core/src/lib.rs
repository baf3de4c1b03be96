//! Simplex-constrained minimization by complex growth-transform dynamics.
//!
//! Optimization variables live on an electrical network: every node carries
//! a voltage phasor, a current phasor and a relative phase angle, with the
//! squared magnitudes conserved per subgroup (`sum |V|^2 + |I|^2 = 1`). The
//! solver evolves the masses by multiplicative growth-transform updates and
//! the phases by a bounded relaxation, descending an objective
//! `L = H + h*Psi + beta*D` whose regularizer `D` is the network's active
//! power dissipation. Converged states are self-sustained resonant limit
//! cycles: every energized node ends in voltage/current quadrature.
//!
//! The crate also ships the resonant one-class SVM built on this solver,
//! synthetic and file-based dataset handling, beta-annealing schedules,
//! power instrumentation, and brute-force oracles for validation.

pub mod data;
pub mod dynamics;
pub mod error;
pub mod objective;
pub mod oracle;
pub mod phasor;
pub mod power;
pub mod rng;
pub mod schedule;
pub mod svm;

pub use data::{gen_disc, gen_gmm, load_delimited, load_sparse_indexed, Dataset, DenseMatrix};
pub use dynamics::{
    apply_global_phase, apply_relative_phase, compute_lambda, continuous_step, discrete_step,
    phase_step, sigma, solve, LambdaPolicy, Mode, NullSink, SolveResult, SolverConfig, StepReport,
    Termination, TraceRecord, TraceSink, VecSink,
};
pub use error::{Error, Result};
pub use objective::{DissipationRegularizer, Objective, QuadraticMulti, QuadraticSingle, StepEval};
pub use phasor::{
    bounded_to_simplex, mass_vector, renormalize, NetworkState, NodeState, Phasor,
};
pub use power::{
    equivalent_lc, lc_resonance_check, power_report, power_report_with, PowerConvention,
    PowerReport,
};
pub use rng::SplitRng;
pub use schedule::{BetaSchedule, ScheduleKind};
pub use svm::{
    build_objective, train, ClassifyReport, KernelSpec, OcsvmModel, OcsvmProblem, SvmObjective,
    TrainOutcome,
};
