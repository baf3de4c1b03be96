//! Resonant one-class SVM.
//!
//! The dual objective 1/2 sum_ij alpha_i K_ij alpha_j with simplex constraint
//! sum alpha_i = 1 and box 0 < alpha_i < 1/(nu N) is mapped onto the phasor
//! network through alpha_i = |V_i|^2 + |I_i|^2. The upper bound is enforced
//! by a logarithmic barrier Psi(alpha) = -log(1/(nu N) - alpha) weighted by
//! `h`; the lower bound is implicit in the multiplicative updates (positive
//! masses stay positive). Trained support vectors are the nodes whose alpha
//! stays above 1/(10 N); at convergence with beta > 0 they are the resonant
//! LC tanks of the network while interior points decay toward zero mass.

use crate::data::{fingerprint_matrix, DenseMatrix};
use crate::dynamics::{solve, SolveResult, SolverConfig, TraceSink};
use crate::error::{Error, Result};
use crate::objective::{DissipationRegularizer, Objective, StepEval};
use crate::phasor::{comp_sum, random_phi, NetworkState, NodeState, Phasor};
use crate::rng::SplitRng;
use crate::schedule::BetaSchedule;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

/// Support vectors are nodes with alpha above 1/(SV_THRESHOLD_FACTOR * N).
pub const SV_THRESHOLD_FACTOR: f64 = 10.0;

/// Gram matrices are materialized up to this many rows; beyond it kernel
/// rows are recomputed on the fly to bound memory.
pub const DENSE_GRAM_LIMIT: usize = 5000;

/// PSD construction check is run up to this many rows.
pub const PSD_CHECK_LIMIT: usize = 2000;

/// Kernel function choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    /// K(x, y) = exp(-||x - y||^2 / (2 sigma^2)).
    Gaussian { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub kind: KernelKind,
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::domain("kernel sigma must be > 0"));
        }
        Ok(KernelSpec {
            kind: KernelKind::Gaussian { sigma },
        })
    }

    /// Gaussian kernel with the median pairwise distance as sigma.
    pub fn gaussian_median_heuristic(x: &DenseMatrix) -> Result<Self> {
        Self::gaussian(crate::data::median_pairwise_distance(x))
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Gaussian { sigma } => {
                let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

/// Cached or lazily recomputed Gram matrix.
#[derive(Debug)]
enum GramStore {
    Dense { n: usize, k: Vec<f64> },
    Lazy { data: Arc<DenseMatrix>, kernel: KernelSpec },
}

impl GramStore {
    fn row_dot(&self, i: usize, alphas: &[f64]) -> f64 {
        match self {
            GramStore::Dense { n, k } => k[i * n..(i + 1) * n]
                .iter()
                .zip(alphas)
                .map(|(kij, a)| kij * a)
                .sum(),
            GramStore::Lazy { data, kernel } => (0..data.rows())
                .map(|j| kernel.eval(data.row(i), data.row(j)) * alphas[j])
                .sum(),
        }
    }

    fn dense(&self) -> Option<&[f64]> {
        match self {
            GramStore::Dense { k, .. } => Some(k),
            GramStore::Lazy { .. } => None,
        }
    }
}

/// Lower-triangular Cholesky feasibility probe of k + shift*I.
fn psd_check(k: &[f64], n: usize, shift: f64) -> bool {
    let mut a = k.to_vec();
    for i in 0..n {
        a[i * n + i] += shift;
    }
    for j in 0..n {
        let mut d = a[j * n + j];
        for p in 0..j {
            d -= a[j * n + p] * a[j * n + p];
        }
        if !(d > 0.0) {
            return false;
        }
        let dj = d.sqrt();
        a[j * n + j] = dj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for p in 0..j {
                s -= a[i * n + p] * a[j * n + p];
            }
            a[i * n + j] = s / dj;
        }
    }
    true
}

/// A one-class problem instance: data, nu, kernel and barrier weight.
#[derive(Debug, Clone)]
pub struct OcsvmProblem {
    data: Arc<DenseMatrix>,
    nu: f64,
    kernel: KernelSpec,
    h: f64,
    gram: Arc<GramStore>,
}

impl OcsvmProblem {
    /// Build the problem and cache the Gram matrix. For up to
    /// [`PSD_CHECK_LIMIT`] rows the matrix is verified positive semidefinite
    /// (smallest eigenvalue >= -1e-8 * trace) via a shifted Cholesky probe.
    pub fn new(data: DenseMatrix, nu: f64, kernel: KernelSpec, h: f64) -> Result<Self> {
        let n = data.rows();
        if n < 2 {
            return Err(Error::domain("one-class problem needs N >= 2"));
        }
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::domain("nu must lie in (0, 1)"));
        }
        if !(h > 0.0) {
            return Err(Error::domain("barrier weight h must be > 0"));
        }
        let data = Arc::new(data);
        let gram = if n <= DENSE_GRAM_LIMIT {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = kernel.eval(data.row(i), data.row(j));
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            if n <= PSD_CHECK_LIMIT {
                let trace: f64 = (0..n).map(|i| k[i * n + i]).sum();
                if !psd_check(&k, n, 1e-8 * trace) {
                    return Err(Error::domain(
                        "kernel Gram matrix is not positive semidefinite",
                    ));
                }
            }
            GramStore::Dense { n, k }
        } else {
            GramStore::Lazy {
                data: Arc::clone(&data),
                kernel: kernel.clone(),
            }
        };
        Ok(OcsvmProblem {
            data,
            nu,
            kernel,
            h,
            gram: Arc::new(gram),
        })
    }

    /// With the default barrier weight for this problem size.
    pub fn with_default_barrier(data: DenseMatrix, nu: f64, kernel: KernelSpec) -> Result<Self> {
        let h = crate::objective::default_barrier_weight(data.rows());
        Self::new(data, nu, kernel, h)
    }

    pub fn n(&self) -> usize {
        self.data.rows()
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn data(&self) -> &DenseMatrix {
        &self.data
    }

    pub fn data_arc(&self) -> Arc<DenseMatrix> {
        Arc::clone(&self.data)
    }

    /// The box bound 1/(nu N).
    pub fn alpha_cap(&self) -> f64 {
        1.0 / (self.nu * self.n() as f64)
    }

    /// Materialized Gram matrix, when one was cached.
    pub fn gram_dense(&self) -> Option<&[f64]> {
        self.gram.dense()
    }

    /// 1/2 alpha^T K alpha for an explicit alpha vector.
    pub fn quadratic_form(&self, alphas: &[f64]) -> f64 {
        0.5 * comp_sum((0..alphas.len()).map(|i| alphas[i] * self.gram.row_dot(i, alphas)))
    }
}

/// The barrier-penalized dual objective over phasor masses.
#[derive(Clone)]
pub struct SvmObjective {
    gram: Arc<GramStore>,
    cap: f64,
    h: f64,
    beta: f64,
}

impl SvmObjective {
    fn alphas_checked(&self, state: &NetworkState) -> Result<Vec<f64>> {
        let alphas: Vec<f64> = state.nodes().iter().map(|n| n.mass()).collect();
        for (i, &a) in alphas.iter().enumerate() {
            if a >= self.cap {
                return Err(Error::BarrierViolation(format!(
                    "alpha[{i}] = {a} reached the bound 1/(nu N) = {}",
                    self.cap
                )));
            }
        }
        Ok(alphas)
    }
}

/// Objective for `problem`: 1/2 a^T K a + h sum -log(1/(nu N) - a_i) + beta D.
pub fn build_objective(problem: &OcsvmProblem) -> SvmObjective {
    SvmObjective {
        gram: Arc::clone(&problem.gram),
        cap: problem.alpha_cap(),
        h: problem.h,
        beta: 0.0,
    }
}

impl Objective for SvmObjective {
    fn beta(&self) -> f64 {
        self.beta
    }

    fn set_beta(&mut self, beta: f64) -> Result<()> {
        if !(beta >= 0.0) {
            return Err(Error::domain("beta must be >= 0"));
        }
        self.beta = beta;
        Ok(())
    }

    fn loss(&self, state: &NetworkState) -> Result<f64> {
        let alphas = self.alphas_checked(state)?;
        Ok(0.5 * comp_sum((0..alphas.len()).map(|i| alphas[i] * self.gram.row_dot(i, &alphas))))
    }

    fn penalty(&self, state: &NetworkState) -> Result<f64> {
        let alphas = self.alphas_checked(state)?;
        Ok(self.h * comp_sum(alphas.iter().map(|&a| -(self.cap - a).ln())))
    }

    fn smooth_grad_v2(&self, state: &NetworkState, i: usize) -> Result<f64> {
        let alphas = self.alphas_checked(state)?;
        Ok(self.gram.row_dot(i, &alphas) + self.h / (self.cap - alphas[i]))
    }

    fn smooth_grad_i2(&self, state: &NetworkState, i: usize) -> Result<f64> {
        self.smooth_grad_v2(state, i)
    }

    fn eval_all(&self, state: &NetworkState) -> Result<StepEval> {
        let alphas = self.alphas_checked(state)?;
        let n = alphas.len();
        let scores: Vec<f64> = (0..n).map(|i| self.gram.row_dot(i, &alphas)).collect();
        let loss = 0.5 * comp_sum((0..n).map(|i| alphas[i] * scores[i]));
        let penalty = self.h * comp_sum(alphas.iter().map(|&a| -(self.cap - a).ln()));
        let d = DissipationRegularizer::value(state);
        let mut grad_v2 = Vec::with_capacity(n);
        let mut grad_i2 = Vec::with_capacity(n);
        let mut grad_phi = Vec::with_capacity(n);
        for i in 0..n {
            let smooth = scores[i] + self.h / (self.cap - alphas[i]);
            grad_v2.push(smooth + self.beta * DissipationRegularizer::grad_v2(state, i));
            grad_i2.push(smooth + self.beta * DissipationRegularizer::grad_i2(state, i));
            grad_phi.push(self.beta * DissipationRegularizer::grad_phi(state, i));
        }
        Ok(StepEval {
            value: loss + penalty + self.beta * d,
            loss,
            penalty,
            grad_v2,
            grad_i2,
            grad_phi,
        })
    }
}

/// Classification counts over a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub correct: usize,
    pub outliers: usize,
    pub sv_count: usize,
}

/// A trained one-class model.
#[derive(Debug, Clone)]
pub struct OcsvmModel {
    pub alphas: Vec<f64>,
    pub sv_indices: Vec<usize>,
    pub rho: f64,
    pub kernel: KernelSpec,
    pub nu: f64,
    pub fingerprint: u64,
    data: Arc<DenseMatrix>,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    alphas: Vec<f64>,
    sv_indices: Vec<usize>,
    rho: f64,
    kernel: KernelSpec,
    nu: f64,
    fingerprint: u64,
}

impl OcsvmModel {
    fn from_alphas(problem: &OcsvmProblem, alphas: Vec<f64>) -> Self {
        let n = alphas.len();
        let threshold = 1.0 / (SV_THRESHOLD_FACTOR * n as f64);
        let sv_indices: Vec<usize> = (0..n).filter(|&i| alphas[i] > threshold).collect();
        let mut sv_scores: Vec<f64> = sv_indices
            .iter()
            .map(|&i| problem.gram.row_dot(i, &alphas))
            .collect();
        sv_scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rho = if sv_scores.is_empty() {
            0.0
        } else if sv_scores.len() % 2 == 1 {
            sv_scores[sv_scores.len() / 2]
        } else {
            0.5 * (sv_scores[sv_scores.len() / 2 - 1] + sv_scores[sv_scores.len() / 2])
        };
        OcsvmModel {
            alphas,
            sv_indices,
            rho,
            kernel: problem.kernel.clone(),
            nu: problem.nu,
            fingerprint: fingerprint_matrix(&problem.data),
            data: problem.data_arc(),
        }
    }

    /// Kernel expansion score sum_j alpha_j K(x_j, x) without the offset.
    pub fn score(&self, x: &[f64]) -> f64 {
        comp_sum(
            (0..self.alphas.len())
                .map(|j| self.alphas[j] * self.kernel.eval(self.data.row(j), x)),
        )
    }

    /// Decision function f(x) = score(x) - rho; f >= 0 inside the region.
    pub fn decision_function(&self, x: &[f64]) -> f64 {
        self.score(x) - self.rho
    }

    /// Count correct points, outliers (f < 0) and support vectors on `data`.
    pub fn classify_dataset(&self, data: &DenseMatrix) -> ClassifyReport {
        let outliers = (0..data.rows())
            .filter(|&i| self.decision_function(data.row(i)) < 0.0)
            .count();
        ClassifyReport {
            correct: data.rows() - outliers,
            outliers,
            sv_count: self.sv_indices.len(),
        }
    }

    /// Serialize to a JSON document. Numeric fields use decimal shortest
    /// round-trip form, so loading restores them bit-exactly.
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            alphas: self.alphas.clone(),
            sv_indices: self.sv_indices.clone(),
            rho: self.rho,
            kernel: self.kernel.clone(),
            nu: self.nu,
            fingerprint: self.fingerprint,
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Parse a JSON document and re-attach the training data, verifying its
    /// fingerprint.
    pub fn from_json(text: &str, data: Arc<DenseMatrix>) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let actual = fingerprint_matrix(&data);
        if actual != doc.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: doc.fingerprint,
                actual,
            });
        }
        Ok(OcsvmModel {
            alphas: doc.alphas,
            sv_indices: doc.sv_indices,
            rho: doc.rho,
            kernel: doc.kernel,
            nu: doc.nu,
            fingerprint: doc.fingerprint,
            data,
        })
    }

    pub fn load(path: impl AsRef<Path>, data: Arc<DenseMatrix>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, data)
    }
}

/// Feasible random initialization: every alpha_i starts at 1/N, the mass is
/// split between |V|^2 and |I|^2 uniformly at random and phi is drawn from
/// [-pi, pi] outside the exclusion band.
pub fn initial_state(problem: &OcsvmProblem, rng: &mut SplitRng) -> Result<NetworkState> {
    let n = problem.n();
    let alpha0 = 1.0 / n as f64;
    if alpha0 >= problem.alpha_cap() {
        return Err(Error::domain(
            "uniform start infeasible: 1/N >= 1/(nu N) requires nu < 1",
        ));
    }
    let nodes = (0..n)
        .map(|_| {
            let split = rng.next_open01();
            let phi = random_phi(rng);
            NodeState::new(
                Phasor::from_polar((alpha0 * split).sqrt(), 0.0),
                Phasor::from_polar((alpha0 * (1.0 - split)).sqrt(), phi),
                phi,
            )
        })
        .collect();
    NetworkState::single_group(nodes)
}

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: OcsvmModel,
    pub solve: SolveResult,
}

/// Train on `problem` with the growth-transform solver.
///
/// Fails with `MaxStepsExceeded` when the run does not converge; the trace
/// sink still receives every step that ran.
pub fn train<S: TraceSink + ?Sized>(
    problem: &OcsvmProblem,
    config: &SolverConfig,
    schedule: &BetaSchedule,
    seed: u64,
    sink: &mut S,
) -> Result<TrainOutcome> {
    let mut rng = SplitRng::with_stream(seed, 0x0C5F);
    let initial = initial_state(problem, &mut rng)?;
    let objective = build_objective(problem);
    let result = solve(&objective, &initial, config, schedule, sink)?;
    if !result.converged() {
        return Err(Error::MaxStepsExceeded {
            max_steps: config.max_steps,
            best_cost: result.report.cost,
        });
    }
    let alphas: Vec<f64> = result.report.state.nodes().iter().map(|n| n.mass()).collect();
    let model = OcsvmModel::from_alphas(problem, alphas);
    Ok(TrainOutcome {
        model,
        solve: result,
    })
}
