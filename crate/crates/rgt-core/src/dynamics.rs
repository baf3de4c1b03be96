//! The growth-transform solver.
//!
//! Discrete mode applies the multiplicative Baum-Eagon update to the mass
//! coordinates: |V_i|^2 <- |V_i|^2 * sigma_v^2 with
//! sigma^2 = (-dL/dm + lambda) / eta_k, where eta_k is the subgroup
//! normalizer. The update preserves each subgroup simplex by construction
//! and descends L for lambda large enough; lambda is re-chosen every step
//! from the current gradients plus a margin.
//!
//! Continuous mode integrates the phasor flow
//! dV/dt = j*omega*sigma_V*V - (1 - sigma_V)*V (and the current analogue
//! with angular rate omega + omega_phi). Each Euler step is split into a
//! real magnitude factor (1 - dt*(1 - sigma)) and an exact rotation by
//! dt*omega*sigma, so rotation never perturbs the masses and the
//! conservation constraint is independent of omega or any imposed phase
//! rates.
//!
//! Relative phases follow the first-order relaxation
//! phi <- phi + (dt/tau)*(g_phi - phi) of tau*omega_phi + phi = g_phi with
//! g_phi = pi*(lambda*phi - pi*dL/dphi) / (lambda*pi - phi*dL/dphi).

use crate::error::{Error, Result};
use crate::objective::{Objective, StepEval};
use crate::phasor::{comp_sum, NetworkState};
use crate::schedule::BetaSchedule;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A run with final beta > 0 only counts as converged once the total
/// active-power magnitude sum |V||I||cos phi| falls below this.
pub const DISSIPATION_STOP_TOL: f64 = 1e-3;

/// Consecutive small-|delta L| steps required before stopping.
pub const CONVERGENCE_RUN: usize = 10;

/// Integration flavor of the dynamical system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Discrete,
    Continuous,
}

/// Solver parameters. `omega` is per subgroup; `tau` holds either one entry
/// (broadcast) or one per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub mode: Mode,
    pub omega: Vec<f64>,
    /// Additive margin of the lambda policy, > 0.
    pub lambda_margin: f64,
    /// Phase time-constant(s) tau_i, each >= dt.
    pub tau: Vec<f64>,
    /// Time increment per step (integration step in continuous mode,
    /// trace-time bookkeeping in discrete mode).
    pub dt: f64,
    pub max_steps: usize,
    /// |delta L| threshold of the convergence test.
    pub tol_cost: f64,
    /// Scale s0 of the per-node phase-update shift
    /// lambda_phi = s0 * beta * |V|^2|I|^2 + |dL/dphi|; s0 >= 3*pi/2 keeps
    /// the relaxation non-overshooting for dt/tau <= 1.
    pub phase_lambda_scale: f64,
    /// Global phase rate omega_phi_g added to every angular rate.
    pub global_phase_rate: f64,
    /// Per-node external (voltage, current) phase rates.
    pub relative_phase_rates: Option<Vec<(f64, f64)>>,
}

impl SolverConfig {
    pub fn discrete(omega: Vec<f64>, max_steps: usize) -> Self {
        SolverConfig {
            mode: Mode::Discrete,
            omega,
            lambda_margin: 2.0,
            tau: vec![0.02],
            dt: 0.01,
            max_steps,
            tol_cost: 1e-10,
            phase_lambda_scale: 10.0,
            global_phase_rate: 0.0,
            relative_phase_rates: None,
        }
    }

    pub fn continuous(omega: Vec<f64>, max_steps: usize) -> Self {
        SolverConfig {
            mode: Mode::Continuous,
            ..Self::discrete(omega, max_steps)
        }
    }

    /// Phase time-constant of node `i`.
    pub fn tau_of(&self, i: usize) -> f64 {
        if self.tau.len() == 1 {
            self.tau[0]
        } else {
            self.tau[i]
        }
    }

    pub fn validate(&self, state: &NetworkState) -> Result<()> {
        let n = state.len();
        if self.omega.len() != state.groups().len() {
            return Err(Error::config(
                "solver.omega",
                format!(
                    "need one omega per subgroup ({} != {})",
                    self.omega.len(),
                    state.groups().len()
                ),
            ));
        }
        if !(self.lambda_margin > 0.0) {
            return Err(Error::config("solver.lambda_margin", "must be > 0"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config("solver.dt", "must be > 0"));
        }
        if self.tau.len() != 1 && self.tau.len() != n {
            return Err(Error::config(
                "solver.tau",
                "need a single value or one per node",
            ));
        }
        for &tau in &self.tau {
            if !(tau > 0.0) {
                return Err(Error::config("solver.tau", "must be > 0"));
            }
            if self.dt / tau > 1.0 + 1e-12 {
                return Err(Error::config("solver.tau", "need dt/tau <= 1"));
            }
        }
        if !(self.phase_lambda_scale >= 1.5 * PI) {
            return Err(Error::config(
                "solver.phase_lambda_scale",
                "must be >= 3*pi/2",
            ));
        }
        if self.max_steps == 0 {
            return Err(Error::config("solver.max_steps", "must be >= 1"));
        }
        if !(self.tol_cost > 0.0) {
            return Err(Error::config("solver.tol_cost", "must be > 0"));
        }
        for &w in &self.omega {
            if !w.is_finite() {
                return Err(Error::config("solver.omega", "must be finite"));
            }
            if self.mode == Mode::Continuous && self.dt * w.abs() >= 0.1 {
                return Err(Error::config(
                    "solver.dt",
                    "continuous mode needs dt*omega < 0.1",
                ));
            }
        }
        if let Some(rates) = &self.relative_phase_rates {
            if rates.len() != n {
                return Err(Error::config(
                    "solver.relative_phase_rates",
                    "need one pair per node",
                ));
            }
        }
        Ok(())
    }
}

/// Variant of `config` with a global phase rate imposed on all phasors.
/// Mass trajectories are unchanged; only the common rotation shifts.
pub fn apply_global_phase(config: &SolverConfig, phi_g_rate: f64) -> SolverConfig {
    SolverConfig {
        global_phase_rate: config.global_phase_rate + phi_g_rate,
        ..config.clone()
    }
}

/// Variant of `config` with per-node external (voltage, current) phase
/// rates. Conservation still holds; the phasor trajectories change.
pub fn apply_relative_phase(config: &SolverConfig, rates: Vec<(f64, f64)>) -> SolverConfig {
    SolverConfig {
        relative_phase_rates: Some(rates),
        ..config.clone()
    }
}

/// Chooses the multiplier shift lambda each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaPolicy {
    /// Additive margin; the shifted gradients -dL/dm + lambda stay >= margin.
    pub margin: f64,
}

impl LambdaPolicy {
    pub fn new(margin: f64) -> Result<Self> {
        if !(margin > 0.0) {
            return Err(Error::domain("lambda margin must be > 0"));
        }
        Ok(LambdaPolicy { margin })
    }
}

fn lambda_from_grads(eval: &StepEval, margin: f64) -> Result<f64> {
    let mut max_grad = 0.0f64;
    for i in 0..eval.grad_v2.len() {
        let (gv, gi, gp) = (eval.grad_v2[i], eval.grad_i2[i], eval.grad_phi[i]);
        if !gv.is_finite() || !gi.is_finite() || !gp.is_finite() {
            return Err(Error::NonFiniteGradient { node: i });
        }
        max_grad = max_grad.max(gv).max(gi).max(gp.abs());
    }
    Ok(max_grad + margin)
}

/// lambda = max(0, max_i max(dL/d|V_i|^2, dL/d|I_i|^2, |dL/dphi_i|)) + margin.
///
/// The phase gradient is folded into the candidate set so the same shift is
/// also valid for the phi+/phi- split of the phase update. The stepping
/// functions may still enlarge this base value transiently; see
/// `step_with_backtracking`.
pub fn compute_lambda<O: Objective>(
    obj: &O,
    state: &NetworkState,
    policy: &LambdaPolicy,
) -> Result<f64> {
    let eval = obj.eval_all(state)?;
    lambda_from_grads(&eval, policy.margin)
}

/// Baum-Eagon normalizer of each subgroup:
/// eta_k = sum_{j in k} [ |V_j|^2 (-dL/d|V_j|^2 + lambda)
///                      + |I_j|^2 (-dL/d|I_j|^2 + lambda) ].
fn group_etas(state: &NetworkState, eval: &StepEval, lambda: f64) -> Result<Vec<f64>> {
    let mut etas = Vec::with_capacity(state.groups().len());
    for (k, group) in state.groups().iter().enumerate() {
        let eta = comp_sum(group.iter().map(|&j| {
            let (mv, mi) = state.nodes()[j].masses();
            mv * (-eval.grad_v2[j] + lambda) + mi * (-eval.grad_i2[j] + lambda)
        }));
        if !(eta > 0.0) {
            return Err(Error::DegenerateEta { group: k, eta });
        }
        etas.push(eta);
    }
    Ok(etas)
}

/// Growth-transform ratios (sigma_v, sigma_i) for node `i` at shift `lambda`:
/// sigma_v^2 = (-dL/d|V_i|^2 + lambda) / eta_k.
pub fn sigma<O: Objective>(
    obj: &O,
    state: &NetworkState,
    i: usize,
    lambda: f64,
) -> Result<(f64, f64)> {
    let eval = obj.eval_all(state)?;
    let etas = group_etas(state, &eval, lambda)?;
    let k = state.group_of()[i];
    let sv2 = (-eval.grad_v2[i] + lambda) / etas[k];
    let si2 = (-eval.grad_i2[i] + lambda) / etas[k];
    if !(sv2 > 0.0) || !(si2 > 0.0) {
        return Err(Error::domain(format!(
            "non-positive growth ratio at node {i}; lambda too small"
        )));
    }
    Ok((sv2.sqrt(), si2.sqrt()))
}

/// Phase-update target g_phi for the given shift:
/// g_phi = pi*(lambda*phi - pi*grad_phi) / (lambda*pi - phi*grad_phi).
pub fn phase_target(phi: f64, grad_phi: f64, lambda: f64) -> f64 {
    PI * (lambda * phi - PI * grad_phi) / (lambda * PI - phi * grad_phi)
}

/// Shift used by the solver for node phases:
/// lambda_phi = s0 * beta * |V|^2|I|^2 + |dL/dphi| + floor.
///
/// |dL/dphi| <= beta*|V|^2|I|^2 for the dissipation regularizer, so this
/// always satisfies the positivity requirement of the phi+/phi- split, and
/// scaling with the node's own phase curvature keeps the relaxation rate
/// uniform across nodes of very different mass.
fn phase_lambda(beta: f64, mv: f64, mi: f64, grad_phi: f64, scale: f64) -> f64 {
    scale * beta * mv * mi + grad_phi.abs() + 1e-30
}

/// One relaxation step of the phase dynamics for node `i` at shift `lambda`:
/// phi <- clamp(phi + (dt/tau_i)*(g_phi - phi), [-pi, pi]).
pub fn phase_step<O: Objective>(
    obj: &O,
    state: &NetworkState,
    i: usize,
    lambda: f64,
    config: &SolverConfig,
) -> Result<f64> {
    let phi = state.nodes()[i].phi;
    let g = phase_target(phi, obj.grad_phi(state, i)?, lambda);
    let next = phi + (config.dt / config.tau_of(i)) * (g - phi);
    Ok(next.clamp(-PI, PI))
}

/// Per-step summary returned by the stepping functions and by `solve`.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub state: NetworkState,
    /// L at the post-step state (at the beta used for the step).
    pub cost: f64,
    /// sum_i |V_i||I_i||cos phi_i| at the post-step state.
    pub dissipation: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub lambda_used: f64,
    pub step_index: usize,
    pub time: f64,
    /// |group mass sum - 1| right after the raw update, before renormalization.
    pub raw_residual: f64,
}

/// Snapshot emitted once per step (plus one for the initial state).
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub step: usize,
    pub time: f64,
    pub beta: f64,
    /// L = H + h*Psi + beta*D.
    pub cost: f64,
    /// H alone.
    pub loss_h: f64,
    /// D under the phase-aware convention.
    pub dissipation_d: f64,
    /// sum_i |V_i||I_i||cos phi_i|.
    pub total_active_abs: f64,
    /// Residual of the recorded (renormalized) state.
    pub conservation_residual: f64,
    /// Per-node (|V_i|, |I_i|, phi_i).
    pub nodes: Vec<(f64, f64, f64)>,
}

/// Consumer of per-step trace records. Must not mutate solver state
/// (it only ever sees an immutable snapshot).
pub trait TraceSink {
    fn record(&mut self, rec: &TraceRecord);
}

/// Sink that drops everything.
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _rec: &TraceRecord) {}
}

impl<F: FnMut(&TraceRecord)> TraceSink for F {
    fn record(&mut self, rec: &TraceRecord) {
        self(rec)
    }
}

/// Sink that collects records in memory.
#[derive(Default)]
pub struct VecSink(pub Vec<TraceRecord>);

impl TraceSink for VecSink {
    fn record(&mut self, rec: &TraceRecord) {
        self.0.push(rec.clone());
    }
}

/// How a solve run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// |delta L| stayed below tol_cost for the required run of steps (and
    /// the dissipation gate passed when final beta > 0).
    Converged,
    /// The step cap was reached first; the report holds the last state.
    MaxSteps,
}

/// Result of a full solve run.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub report: StepReport,
    pub termination: Termination,
    pub steps: usize,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

fn total_active_abs(state: &NetworkState) -> f64 {
    comp_sum(
        state
            .nodes()
            .iter()
            .map(|n| (n.v.magnitude() * n.i.magnitude() * n.phi.cos()).abs()),
    )
}

fn dissipation_d(state: &NetworkState) -> f64 {
    comp_sum(state.nodes().iter().map(|n| {
        let (mv, mi) = n.masses();
        let c = n.phi.cos();
        mv * mi * c * c
    }))
}

/// A slack of this size is tolerated by the per-step descent test, covering
/// floating-point rounding of the cost sums.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Outcome of one accepted update.
struct AppliedStep {
    /// Evaluation of the post-step state (reused as the next step's input).
    eval: StepEval,
    sigma_min: f64,
    sigma_max: f64,
    lambda: f64,
    raw_residual: f64,
}

/// Apply one update in place, backtracking on lambda.
///
/// The multiplicative update with a gradient-sized lambda can jump past a
/// log-barrier singularity or overshoot where the objective's curvature
/// dwarfs its gradient. Lambda is only constrained from below, so whenever
/// the trial step leaves the objective's domain or increases L, it is
/// redone with lambda doubled; the update contracts toward the identity as
/// lambda grows, so this terminates at a feasible, non-increasing step.
/// Steps that descend at the base lambda pay no extra cost: the acceptance
/// probe doubles as the next step's evaluation.
fn step_with_backtracking<O: Objective>(
    obj: &O,
    state: &mut NetworkState,
    eval: &StepEval,
    config: &SolverConfig,
    group_of: &[usize],
) -> Result<AppliedStep> {
    let mut lambda = lambda_from_grads(eval, config.lambda_margin)?;
    for _attempt in 0..120 {
        let mut trial = state.clone();
        let stats = apply_with_lambda(obj, &mut trial, eval, config, group_of, lambda)?;
        match obj.eval_all(&trial) {
            Ok(next_eval) => {
                if next_eval.value <= eval.value + MONOTONE_SLACK {
                    *state = trial;
                    return Ok(AppliedStep {
                        eval: next_eval,
                        sigma_min: stats.0,
                        sigma_max: stats.1,
                        lambda: stats.2,
                        raw_residual: stats.3,
                    });
                }
                lambda *= 2.0;
            }
            Err(Error::BarrierViolation(_)) => lambda *= 2.0,
            Err(other) => return Err(other),
        }
    }
    Err(Error::BarrierViolation(
        "lambda backtracking exhausted without a feasible descending step".to_string(),
    ))
}

fn apply_with_lambda<O: Objective>(
    obj: &O,
    state: &mut NetworkState,
    eval: &StepEval,
    config: &SolverConfig,
    group_of: &[usize],
    lambda: f64,
) -> Result<(f64, f64, f64, f64)> {
    let etas = group_etas(state, eval, lambda)?;
    let beta = obj.beta();
    let mut sigma_min = f64::INFINITY;
    let mut sigma_max = f64::NEG_INFINITY;

    let n = state.len();
    let mut new_phis = Vec::with_capacity(n);
    for i in 0..n {
        let node = &state.nodes()[i];
        let (mv, mi) = node.masses();
        let lam_phi = phase_lambda(beta, mv, mi, eval.grad_phi[i], config.phase_lambda_scale);
        let g = phase_target(node.phi, eval.grad_phi[i], lam_phi);
        let next = node.phi + (config.dt / config.tau_of(i)) * (g - node.phi);
        new_phis.push(next.clamp(-PI, PI));
    }

    for i in 0..n {
        let k = group_of[i];
        let sv2 = (-eval.grad_v2[i] + lambda) / etas[k];
        let si2 = (-eval.grad_i2[i] + lambda) / etas[k];
        if !(sv2 > 0.0) || !(si2 > 0.0) {
            return Err(Error::domain(format!(
                "non-positive growth ratio at node {i}; increase lambda margin"
            )));
        }
        let (sv, si) = (sv2.sqrt(), si2.sqrt());
        sigma_min = sigma_min.min(sv).min(si);
        sigma_max = sigma_max.max(sv).max(si);

        let node = &mut state.nodes_mut()[i];
        match config.mode {
            Mode::Discrete => {
                // Pure Baum-Eagon jump; phasor angles are left untouched.
                node.v = node.v.scaled(sv);
                node.i = node.i.scaled(si);
            }
            Mode::Continuous => {
                // Split Euler step: real contraction by (1 - dt*(1 - sigma)),
                // exact rotation by dt * rate * sigma.
                let (rel_v, rel_i) = config
                    .relative_phase_rates
                    .as_ref()
                    .map_or((0.0, 0.0), |r| r[i]);
                let omega_k = config.omega[k] + config.global_phase_rate;
                let omega_phi = (phase_target(
                    node.phi,
                    eval.grad_phi[i],
                    phase_lambda(beta, node.v.mag2(), node.i.mag2(), eval.grad_phi[i], config.phase_lambda_scale),
                ) - node.phi)
                    / config.tau_of(i);
                let fv = 1.0 - config.dt * (1.0 - sv);
                let fi = 1.0 - config.dt * (1.0 - si);
                node.v = node.v.scaled(fv).rotated(config.dt * (omega_k + rel_v) * sv);
                node.i = node
                    .i
                    .scaled(fi)
                    .rotated(config.dt * (omega_k + rel_i + omega_phi) * si);
            }
        }
        node.phi = new_phis[i];
    }

    let raw_residual = state.conservation_residual();
    state.renormalize()?;
    Ok((sigma_min, sigma_max, lambda, raw_residual))
}

fn make_report(
    state: &NetworkState,
    cost: f64,
    step_index: usize,
    time: f64,
    sigma_min: f64,
    sigma_max: f64,
    lambda: f64,
    raw_residual: f64,
) -> StepReport {
    StepReport {
        state: state.clone(),
        cost,
        dissipation: total_active_abs(state),
        sigma_min,
        sigma_max,
        lambda_used: lambda,
        step_index,
        time,
        raw_residual,
    }
}

/// One Baum-Eagon step in discrete mode (beta is taken from `obj` as-is).
pub fn discrete_step<O: Objective>(
    obj: &O,
    state: &NetworkState,
    config: &SolverConfig,
) -> Result<StepReport> {
    let cfg = SolverConfig {
        mode: Mode::Discrete,
        ..config.clone()
    };
    one_step(obj, state, &cfg)
}

/// One integration step of the continuous phasor flow.
pub fn continuous_step<O: Objective>(
    obj: &O,
    state: &NetworkState,
    config: &SolverConfig,
) -> Result<StepReport> {
    let cfg = SolverConfig {
        mode: Mode::Continuous,
        ..config.clone()
    };
    one_step(obj, state, &cfg)
}

fn one_step<O: Objective>(
    obj: &O,
    state: &NetworkState,
    config: &SolverConfig,
) -> Result<StepReport> {
    config.validate(state)?;
    let group_of = state.group_of();
    let mut next = state.clone();
    let eval = obj.eval_all(&next)?;
    let applied = step_with_backtracking(obj, &mut next, &eval, config, &group_of)?;
    Ok(make_report(
        &next,
        applied.eval.value,
        1,
        config.dt,
        applied.sigma_min,
        applied.sigma_max,
        applied.lambda,
        applied.raw_residual,
    ))
}

fn emit<S: TraceSink + ?Sized>(
    sink: &mut S,
    step: usize,
    time: f64,
    beta: f64,
    eval: &StepEval,
    state: &NetworkState,
) {
    sink.record(&TraceRecord {
        step,
        time,
        beta,
        cost: eval.value,
        loss_h: eval.loss,
        dissipation_d: dissipation_d(state),
        total_active_abs: total_active_abs(state),
        conservation_residual: state.conservation_residual(),
        nodes: state
            .nodes()
            .iter()
            .map(|n| (n.v.magnitude(), n.i.magnitude(), n.phi))
            .collect(),
    });
}

/// Run the dynamical system from `initial` until convergence or `max_steps`.
///
/// beta follows `schedule` with time t = step * dt; before the schedule's
/// start time the system idles (phasors rotate in continuous mode, masses
/// and phases hold). One trace record is emitted for the initial state and
/// one per performed step. Convergence requires the schedule to have
/// settled, |delta L| < tol_cost for [`CONVERGENCE_RUN`] consecutive steps,
/// and, when the schedule's final beta is positive, total active power
/// below [`DISSIPATION_STOP_TOL`].
pub fn solve<O: Objective, S: TraceSink + ?Sized>(
    obj: &O,
    initial: &NetworkState,
    config: &SolverConfig,
    schedule: &BetaSchedule,
    sink: &mut S,
) -> Result<SolveResult> {
    config.validate(initial)?;
    schedule.validate()?;
    let group_of = initial.group_of();
    let mut state = initial.clone();
    state.renormalize()?;
    let mut work = obj.clone();

    let final_beta = schedule.final_beta();
    let mut consec = 0usize;
    let mut prev_cost: Option<f64> = None;
    let mut performed = 0usize;

    let mut beta = schedule.beta_at(0.0);
    work.set_beta(beta)?;
    let mut eval = work.eval_all(&state)?;
    let mut last = AppliedStep {
        eval: eval.clone(),
        sigma_min: 1.0,
        sigma_max: 1.0,
        lambda: 0.0,
        raw_residual: 0.0,
    };

    for step in 0..=config.max_steps {
        let t = step as f64 * config.dt;
        let new_beta = schedule.beta_at(t);
        if new_beta != beta {
            // the smooth parts are beta-independent, so the evaluation can
            // be shifted analytically instead of recomputed
            rebeta(&mut eval, &state, new_beta - beta);
            work.set_beta(new_beta)?;
            beta = new_beta;
        }
        emit(sink, step, t, beta, &eval, &state);

        let active = t >= schedule.start_time;
        if active {
            if let Some(prev) = prev_cost {
                if (eval.value - prev).abs() < config.tol_cost {
                    consec += 1;
                } else {
                    consec = 0;
                }
            }
            prev_cost = Some(eval.value);
            let dissipation_ok =
                final_beta == 0.0 || total_active_abs(&state) < DISSIPATION_STOP_TOL;
            if schedule.settled_at(t) && consec >= CONVERGENCE_RUN && dissipation_ok {
                let report = make_report(
                    &state,
                    eval.value,
                    step,
                    t,
                    last.sigma_min,
                    last.sigma_max,
                    last.lambda,
                    last.raw_residual,
                );
                return Ok(SolveResult {
                    report,
                    termination: Termination::Converged,
                    steps: performed,
                });
            }
        }

        if step == config.max_steps {
            let report = make_report(
                &state,
                eval.value,
                step,
                t,
                last.sigma_min,
                last.sigma_max,
                last.lambda,
                last.raw_residual,
            );
            return Ok(SolveResult {
                report,
                termination: Termination::MaxSteps,
                steps: performed,
            });
        }

        if active {
            last = step_with_backtracking(&work, &mut state, &eval, config, &group_of)?;
            eval = last.eval.clone();
        } else if config.mode == Mode::Continuous {
            // Pre-onset idle: pure rotation at the subgroup frequencies.
            // Masses and phases are untouched, so `eval` stays valid.
            for (i, node) in state.nodes_mut().iter_mut().enumerate() {
                let k = group_of[i];
                let w = config.omega[k] + config.global_phase_rate;
                node.v = node.v.rotated(config.dt * w);
                node.i = node.i.rotated(config.dt * w);
            }
        }
        performed += 1;
    }
    unreachable!("loop always returns at step == max_steps");
}

/// Shift an evaluation from beta to beta + delta in place. Only the
/// dissipation term depends on beta, and linearly so.
fn rebeta(eval: &mut StepEval, state: &NetworkState, delta: f64) {
    eval.value += delta * dissipation_d(state);
    for i in 0..state.len() {
        eval.grad_v2[i] += delta * crate::objective::DissipationRegularizer::grad_v2(state, i);
        eval.grad_i2[i] += delta * crate::objective::DissipationRegularizer::grad_i2(state, i);
        eval.grad_phi[i] += delta * crate::objective::DissipationRegularizer::grad_phi(state, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{Objective, QuadraticSingle};
    use crate::phasor::NetworkState;
    use crate::rng::SplitRng;

    fn single(mv: f64, mi: f64, phi: f64) -> NetworkState {
        NetworkState::from_masses_unchecked(&[(mv, mi)], &[phi], vec![vec![0]])
    }

    /// Objective with constant slope on every mass coordinate.
    #[derive(Clone)]
    struct LinearMass {
        slope: f64,
        beta: f64,
    }

    impl Objective for LinearMass {
        fn beta(&self) -> f64 {
            self.beta
        }
        fn set_beta(&mut self, beta: f64) -> crate::error::Result<()> {
            self.beta = beta;
            Ok(())
        }
        fn loss(&self, state: &NetworkState) -> crate::error::Result<f64> {
            Ok(self.slope
                * state
                    .nodes()
                    .iter()
                    .map(|n| n.mass())
                    .sum::<f64>())
        }
        fn smooth_grad_v2(&self, _: &NetworkState, _: usize) -> crate::error::Result<f64> {
            Ok(self.slope)
        }
        fn smooth_grad_i2(&self, _: &NetworkState, _: usize) -> crate::error::Result<f64> {
            Ok(self.slope)
        }
    }

    #[test]
    fn lambda_examples() {
        // gradients (2, -2) at |V|^2 = 1: lambda = 2 + margin
        let obj = QuadraticSingle::new(1.0).unwrap();
        let state = single(1.0, 0.0, 0.4);
        let lambda = compute_lambda(&obj, &state, &LambdaPolicy::new(1.0).unwrap()).unwrap();
        assert!((lambda - 3.0).abs() < 1e-12);

        // all-zero gradients: lambda = margin
        let flat = LinearMass {
            slope: 0.0,
            beta: 0.0,
        };
        let lambda = compute_lambda(&flat, &state, &LambdaPolicy::new(0.5).unwrap()).unwrap();
        assert!((lambda - 0.5).abs() < 1e-15);

        // negative gradients clamp at zero before the margin
        let down = LinearMass {
            slope: -3.0,
            beta: 0.0,
        };
        let lambda = compute_lambda(&down, &state, &LambdaPolicy::new(1.0).unwrap()).unwrap();
        assert!((lambda - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sigma_flat_objective_is_one() {
        let flat = LinearMass {
            slope: 0.7,
            beta: 0.0,
        };
        let state = single(0.3, 0.7, 1.0);
        let (sv, si) = sigma(&flat, &state, 0, 2.0).unwrap();
        assert!((sv - 1.0).abs() < 1e-12);
        assert!((si - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sigma_quadratic_example() {
        let obj = QuadraticSingle::new(0.0).unwrap();
        let state = single(0.25, 0.75, 1.0);
        let (sv, si) = sigma(&obj, &state, 0, 3.0).unwrap();
        assert!((sv * sv - 1.6).abs() < 1e-12, "sigma_v^2 {}", sv * sv);
        assert!((si * si - 0.8).abs() < 1e-12, "sigma_i^2 {}", si * si);
    }

    #[test]
    fn discrete_step_quadratic_example() {
        // masses (0.25, 0.75) with lambda = 3 move to (0.4, 0.6); H: 0.25 -> 0.04
        let obj = QuadraticSingle::new(0.0).unwrap();
        let state = single(0.25, 0.75, 1.0);
        let mut config = SolverConfig::discrete(vec![0.0], 10);
        config.lambda_margin = 2.0; // grads (-1, 1): max + margin = 3
        let report = discrete_step(&obj, &state, &config).unwrap();
        let (mv, mi) = report.state.nodes()[0].masses();
        assert!((mv - 0.4).abs() < 1e-12, "mv {mv}");
        assert!((mi - 0.6).abs() < 1e-12, "mi {mi}");
        assert!((obj.loss(&report.state).unwrap() - 0.04).abs() < 1e-12);
        assert!(report.raw_residual < 1e-12);
    }

    #[test]
    fn discrete_step_fixed_point() {
        let obj = QuadraticSingle::new(1.0).unwrap();
        let state = single(0.5, 0.5, PI / 2.0);
        let config = SolverConfig::discrete(vec![0.0], 10);
        let report = discrete_step(&obj, &state, &config).unwrap();
        let (mv, mi) = report.state.nodes()[0].masses();
        assert!((mv - 0.5).abs() < 1e-14);
        assert!((mi - 0.5).abs() < 1e-14);
        assert!((report.state.nodes()[0].phi - PI / 2.0).abs() < 1e-14);
        assert!((report.sigma_min - 1.0).abs() < 1e-12);
        assert!((report.sigma_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_coordinate_is_invariant() {
        let obj = QuadraticSingle::new(0.0).unwrap();
        let state = single(1.0, 0.0, 1.0);
        let config = SolverConfig::discrete(vec![0.0], 10);
        let report = discrete_step(&obj, &state, &config).unwrap();
        let (mv, mi) = report.state.nodes()[0].masses();
        assert_eq!(mi, 0.0);
        assert!((mv - 1.0).abs() < 1e-14);
    }

    #[test]
    fn phase_target_examples() {
        // dL/dphi = 0 leaves any phi fixed
        assert!((phase_target(PI / 2.0, 0.0, 2.0) - PI / 2.0).abs() < 1e-15);
        assert_eq!(phase_target(0.0, 0.0, 1.0), 0.0);
        // worked value: beta=1, masses (0.5, 0.5), phi = pi/4, lambda = 1
        let g = phase_target(PI / 4.0, -0.25, 1.0);
        assert!((g - 1.4784).abs() < 1e-4, "g_phi {g}");
        assert!(g > PI / 4.0);
    }

    #[test]
    fn phase_step_moves_toward_quadrature() {
        let obj = QuadraticSingle::new(1.0).unwrap();
        let config = SolverConfig::discrete(vec![0.0], 10);
        let state = single(0.5, 0.5, PI / 4.0);
        let next = phase_step(&obj, &state, 0, 1.0, &config).unwrap();
        assert!(next > PI / 4.0 && next < PI / 2.0);
        // negative side mirrors to -pi/2
        let state = single(0.5, 0.5, -PI / 4.0);
        let next = phase_step(&obj, &state, 0, 1.0, &config).unwrap();
        assert!(next < -PI / 4.0 && next > -PI / 2.0);
    }

    #[test]
    fn solve_quadratic_single_reaches_resonant_minimum() {
        let obj = QuadraticSingle::new(1.0).unwrap();
        let mut rng = SplitRng::new(5);
        let initial = NetworkState::random(&[1], &mut rng).unwrap();
        let config = SolverConfig::discrete(vec![PI / 10.0], 20_000);
        let schedule = BetaSchedule::constant(1.0).unwrap();
        let result = solve(&obj, &initial, &config, &schedule, &mut NullSink).unwrap();
        assert!(result.converged(), "did not converge");
        let report = &result.report;
        assert!(report.cost < 1e-8, "cost {}", report.cost);
        let (mv, mi) = report.state.nodes()[0].masses();
        assert!((mv - 0.5).abs() < 1e-4, "mv {mv}");
        assert!((mi - 0.5).abs() < 1e-4);
        let phi = report.state.nodes()[0].phi;
        assert!(
            (phi.abs() - PI / 2.0).abs() < 1e-3,
            "phi {phi} not at quadrature"
        );
        assert!(report.dissipation < DISSIPATION_STOP_TOL);
    }

    #[test]
    fn solve_degenerate_constant_objective_is_static() {
        let obj = LinearMass {
            slope: 0.0,
            beta: 0.0,
        };
        let mut rng = SplitRng::new(9);
        let initial = NetworkState::random(&[1], &mut rng).unwrap();
        let config = SolverConfig::continuous(vec![1.0], 400);
        let schedule = BetaSchedule::constant(0.0).unwrap();
        let result = solve(&obj, &initial, &config, &schedule, &mut NullSink).unwrap();
        let before = initial.nodes()[0].masses();
        let after = result.report.state.nodes()[0].masses();
        assert!((before.0 - after.0).abs() < 1e-9, "mass moved");
        assert!((before.1 - after.1).abs() < 1e-9);
        // phasor rotated away from the initial angle
        assert!(
            (result.report.state.nodes()[0].v.phase() - initial.nodes()[0].v.phase()).abs() > 0.1
        );
    }

    #[test]
    fn trace_is_emitted_per_step() {
        let obj = QuadraticSingle::new(0.0).unwrap();
        let state = single(0.25, 0.75, 1.0);
        let config = SolverConfig::discrete(vec![0.0], 25);
        let schedule = BetaSchedule::constant(0.0).unwrap().with_start_time(0.0).unwrap();
        let mut sink = VecSink::default();
        let result = solve(&obj, &state, &config, &schedule, &mut sink).unwrap();
        assert_eq!(sink.0.len(), result.steps + 1);
        assert_eq!(sink.0[0].step, 0);
        for w in sink.0.windows(2) {
            assert_eq!(w[1].step, w[0].step + 1);
            assert!(w[1].conservation_residual < 1e-12);
        }
    }
}
