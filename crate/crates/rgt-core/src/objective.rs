//! Objective functions L = H + h*Psi + beta*D over network states.
//!
//! `H` and the weighted penalty `h*Psi` depend only on the squared magnitudes
//! (the mass coordinates); the active-power dissipation regularizer
//! `D = sum_i |V_i|^2 |I_i|^2 cos^2(phi_i)` carries all phase dependence.
//! Gradients are taken with respect to `|V_i|^2`, `|I_i|^2` and `phi_i`;
//! the complex Wirtinger gradient factors through these real partials.

use crate::error::{Error, Result};
use crate::phasor::{comp_sum, NetworkState};

/// Default barrier steepness for penalty terms, scaled by problem size.
pub fn default_barrier_weight(n: usize) -> f64 {
    1e-3 / n.max(1) as f64
}

/// The active-power dissipation regularizer D and its partials.
pub struct DissipationRegularizer;

impl DissipationRegularizer {
    /// D = sum_i |V_i|^2 |I_i|^2 cos^2(phi_i), always >= 0.
    pub fn value(state: &NetworkState) -> f64 {
        comp_sum(state.nodes().iter().map(|n| {
            let (mv, mi) = n.masses();
            let c = n.phi.cos();
            mv * mi * c * c
        }))
    }

    /// dD/d|V_i|^2 = |I_i|^2 cos^2(phi_i).
    pub fn grad_v2(state: &NetworkState, i: usize) -> f64 {
        let n = &state.nodes()[i];
        let c = n.phi.cos();
        n.i.mag2() * c * c
    }

    /// dD/d|I_i|^2 = |V_i|^2 cos^2(phi_i).
    pub fn grad_i2(state: &NetworkState, i: usize) -> f64 {
        let n = &state.nodes()[i];
        let c = n.phi.cos();
        n.v.mag2() * c * c
    }

    /// dD/dphi_i = -|V_i|^2 |I_i|^2 sin(2 phi_i).
    pub fn grad_phi(state: &NetworkState, i: usize) -> f64 {
        let n = &state.nodes()[i];
        let (mv, mi) = n.masses();
        -mv * mi * (2.0 * n.phi).sin()
    }
}

/// Value, loss, penalty and every partial of L at one state.
#[derive(Debug, Clone)]
pub struct StepEval {
    pub value: f64,
    pub loss: f64,
    pub penalty: f64,
    pub grad_v2: Vec<f64>,
    pub grad_i2: Vec<f64>,
    pub grad_phi: Vec<f64>,
}

/// Cost function with analytic partials against the mass and phase coordinates.
///
/// Implementors provide the phase-independent smooth parts (`loss` = H and
/// `penalty` = h*Psi); `value` and the full gradients compose the beta-weighted
/// dissipation term on top.
pub trait Objective: Clone + Send + Sync {
    /// Current regularization weight beta >= 0.
    fn beta(&self) -> f64;

    /// Replace beta in place.
    fn set_beta(&mut self, beta: f64) -> Result<()>;

    /// Copy of this objective with a different regularization weight.
    fn with_beta(&self, beta: f64) -> Result<Self>
    where
        Self: Sized,
    {
        let mut out = self.clone();
        out.set_beta(beta)?;
        Ok(out)
    }

    /// H: the problem loss, a function of the mass coordinates only.
    fn loss(&self, state: &NetworkState) -> Result<f64>;

    /// h*Psi: weighted penalty/barrier term; zero unless overridden.
    fn penalty(&self, _state: &NetworkState) -> Result<f64> {
        Ok(0.0)
    }

    /// d(H + h*Psi)/d|V_i|^2.
    fn smooth_grad_v2(&self, state: &NetworkState, i: usize) -> Result<f64>;

    /// d(H + h*Psi)/d|I_i|^2.
    fn smooth_grad_i2(&self, state: &NetworkState, i: usize) -> Result<f64>;

    /// d(H + h*Psi)/dphi_i; zero for every objective in this crate.
    fn smooth_grad_phi(&self, _state: &NetworkState, _i: usize) -> Result<f64> {
        Ok(0.0)
    }

    /// L = H + h*Psi + beta*D.
    fn value(&self, state: &NetworkState) -> Result<f64> {
        Ok(self.loss(state)?
            + self.penalty(state)?
            + self.beta() * DissipationRegularizer::value(state))
    }

    /// dL/d|V_i|^2.
    fn grad_v2(&self, state: &NetworkState, i: usize) -> Result<f64> {
        Ok(self.smooth_grad_v2(state, i)? + self.beta() * DissipationRegularizer::grad_v2(state, i))
    }

    /// dL/d|I_i|^2.
    fn grad_i2(&self, state: &NetworkState, i: usize) -> Result<f64> {
        Ok(self.smooth_grad_i2(state, i)? + self.beta() * DissipationRegularizer::grad_i2(state, i))
    }

    /// dL/dphi_i.
    fn grad_phi(&self, state: &NetworkState, i: usize) -> Result<f64> {
        Ok(self.smooth_grad_phi(state, i)?
            + self.beta() * DissipationRegularizer::grad_phi(state, i))
    }

    /// Everything the solver needs at one state, in a single call.
    ///
    /// The default loops the per-node accessors; objectives with shared
    /// intermediate work (kernel scores) override it with a batched pass.
    fn eval_all(&self, state: &NetworkState) -> Result<StepEval> {
        let n = state.len();
        let mut grad_v2 = Vec::with_capacity(n);
        let mut grad_i2 = Vec::with_capacity(n);
        let mut grad_phi = Vec::with_capacity(n);
        for i in 0..n {
            grad_v2.push(self.grad_v2(state, i)?);
            grad_i2.push(self.grad_i2(state, i)?);
            grad_phi.push(self.grad_phi(state, i)?);
        }
        Ok(StepEval {
            value: self.value(state)?,
            loss: self.loss(state)?,
            penalty: self.penalty(state)?,
            grad_v2,
            grad_i2,
            grad_phi,
        })
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0) {
        return Err(Error::domain(format!("beta must be >= 0, got {beta}")));
    }
    Ok(())
}

/// Single-variable quadratic H(x) = x^2 with x = |V|^2 - |I|^2.
///
/// The bound |x| <= 1 of the original problem is implied by the equality
/// |V|^2 + |I|^2 = 1 of the mass simplex.
#[derive(Debug, Clone)]
pub struct QuadraticSingle {
    beta: f64,
}

impl QuadraticSingle {
    pub fn new(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(QuadraticSingle { beta })
    }
}

impl Objective for QuadraticSingle {
    fn beta(&self) -> f64 {
        self.beta
    }

    fn set_beta(&mut self, beta: f64) -> Result<()> {
        check_beta(beta)?;
        self.beta = beta;
        Ok(())
    }

    fn loss(&self, state: &NetworkState) -> Result<f64> {
        let (mv, mi) = state.nodes()[0].masses();
        let x = mv - mi;
        Ok(x * x)
    }

    fn smooth_grad_v2(&self, state: &NetworkState, i: usize) -> Result<f64> {
        let (mv, mi) = state.nodes()[i].masses();
        Ok(2.0 * (mv - mi))
    }

    fn smooth_grad_i2(&self, state: &NetworkState, i: usize) -> Result<f64> {
        let (mv, mi) = state.nodes()[i].masses();
        Ok(-2.0 * (mv - mi))
    }
}

/// N-variable extension: H = sum_i (|V_i|^2 - |I_i|^2)^2.
#[derive(Debug, Clone)]
pub struct QuadraticMulti {
    n: usize,
    beta: f64,
}

impl QuadraticMulti {
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("node count must be >= 1"));
        }
        check_beta(beta)?;
        Ok(QuadraticMulti { n, beta })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }
}

impl Objective for QuadraticMulti {
    fn beta(&self) -> f64 {
        self.beta
    }

    fn set_beta(&mut self, beta: f64) -> Result<()> {
        check_beta(beta)?;
        self.beta = beta;
        Ok(())
    }

    fn loss(&self, state: &NetworkState) -> Result<f64> {
        Ok(comp_sum(state.nodes().iter().map(|n| {
            let (mv, mi) = n.masses();
            let x = mv - mi;
            x * x
        })))
    }

    fn smooth_grad_v2(&self, state: &NetworkState, i: usize) -> Result<f64> {
        let (mv, mi) = state.nodes()[i].masses();
        Ok(2.0 * (mv - mi))
    }

    fn smooth_grad_i2(&self, state: &NetworkState, i: usize) -> Result<f64> {
        let (mv, mi) = state.nodes()[i].masses();
        Ok(-2.0 * (mv - mi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::NetworkState;
    use std::f64::consts::PI;

    fn single(mv: f64, mi: f64, phi: f64) -> NetworkState {
        NetworkState::from_masses_unchecked(&[(mv, mi)], &[phi], vec![vec![0]])
    }

    #[test]
    fn eval_quadratic_single_at_minimum() {
        let obj = QuadraticSingle::new(1.0).unwrap();
        let v = obj.value(&single(0.5, 0.5, PI / 2.0)).unwrap();
        assert!(v.abs() < 1e-15, "value {v}");
    }

    #[test]
    fn eval_quadratic_single_at_corner() {
        let obj = QuadraticSingle::new(1.0).unwrap();
        for phi in [0.0, 0.7, -2.0] {
            let v = obj.value(&single(1.0, 0.0, phi)).unwrap();
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn eval_quadratic_single_in_phase() {
        let obj = QuadraticSingle::new(1.0).unwrap();
        let v = obj.value(&single(0.5, 0.5, 0.0)).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gradients_quadratic_single() {
        let obj = QuadraticSingle::new(1.0).unwrap();
        let state = single(0.25, 0.75, PI / 2.0);
        assert!((obj.grad_v2(&state, 0).unwrap() - (-1.0)).abs() < 1e-15);
        assert!((obj.grad_i2(&state, 0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grad_phi_vanishes_at_quadrature() {
        let obj = QuadraticSingle::new(3.0).unwrap();
        let state = single(0.3, 0.7, PI / 2.0);
        assert!(obj.grad_phi(&state, 0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn grad_phi_midway() {
        let obj = QuadraticSingle::new(1.0).unwrap();
        let state = single(0.5, 0.5, PI / 4.0);
        assert!((obj.grad_phi(&state, 0).unwrap() - (-0.25)).abs() < 1e-15);
    }

    #[test]
    fn with_beta_semantics() {
        let obj = QuadraticSingle::new(2.0).unwrap();
        let state = single(0.5, 0.5, 0.0);
        let b0 = obj.with_beta(0.0).unwrap();
        assert!((b0.value(&state).unwrap() - b0.loss(&state).unwrap()).abs() < 1e-15);
        let b1 = obj.with_beta(1.0).unwrap();
        assert!((b1.value(&state).unwrap() - 0.25).abs() < 1e-15);
        let chained = obj.with_beta(5.0).unwrap().with_beta(1.0).unwrap();
        assert_eq!(chained.beta(), 1.0);
        assert!(obj.with_beta(-0.5).is_err());
    }

    #[test]
    fn dissipation_nonnegative_and_zero_at_quadrature() {
        let state = NetworkState::from_masses_unchecked(
            &[(0.3, 0.2), (0.25, 0.25)],
            &[PI / 2.0, -PI / 2.0],
            vec![vec![0, 1]],
        );
        let d = DissipationRegularizer::value(&state);
        assert!(d.abs() < 1e-30);
        let state2 = NetworkState::from_masses_unchecked(
            &[(0.3, 0.2), (0.25, 0.25)],
            &[0.3, -1.2],
            vec![vec![0, 1]],
        );
        assert!(DissipationRegularizer::value(&state2) > 0.0);
    }

    #[test]
    fn quadratic_multi_zero_iff_balanced() {
        let obj = QuadraticMulti::new(3, 1.0).unwrap();
        let balanced = NetworkState::from_masses_unchecked(
            &[(1.0 / 6.0, 1.0 / 6.0); 3],
            &[PI / 2.0; 3],
            vec![vec![0, 1, 2]],
        );
        assert!(obj.value(&balanced).unwrap().abs() < 1e-15);
        let skew = NetworkState::from_masses_unchecked(
            &[(0.3, 0.1), (0.2, 0.2), (0.1, 0.1)],
            &[PI / 2.0; 3],
            vec![vec![0, 1, 2]],
        );
        assert!(obj.value(&skew).unwrap() > 0.0);
    }
}
