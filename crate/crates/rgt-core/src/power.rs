//! Electrical interpretation of a network state.
//!
//! Per-node active power |V||I|cos(phi) is the dissipation rate and reactive
//! power |V||I|sin(phi) the stored-energy exchange rate. The non-resonant
//! convention drops the phase factor entirely (a beta = 0 network has no
//! phase dynamics, so its dissipation is reported as |V||I| and its
//! regularizer as |V|^2|I|^2), which is how the two model variants are
//! compared on equal footing.

use crate::error::{Error, Result};
use crate::phasor::{comp_sum, NetworkState};

/// Which dissipation convention a report uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerConvention {
    /// Phase-aware metrics: P = |V||I|cos(phi), Q = |V||I|sin(phi).
    Resonant,
    /// Phase-ignoring metrics for beta = 0 baselines: P = |V||I|, Q = 0.
    NonResonant,
}

/// Snapshot of the power metrics of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerReport {
    /// Per-node active power.
    pub per_node_active: Vec<f64>,
    /// Per-node reactive power.
    pub per_node_reactive: Vec<f64>,
    /// sum_i |P_i| -- the true dissipation magnitude.
    pub total_active_abs: f64,
    /// The regularizer value: sum |V|^2|I|^2 cos^2(phi) (resonant convention)
    /// or sum |V|^2|I|^2 (non-resonant).
    pub dissipation_d: f64,
    /// Largest per-subgroup |mass sum - 1|.
    pub conservation_residual: f64,
}

/// Compute the power metrics of `state` under the phase-aware convention.
pub fn power_report(state: &NetworkState) -> PowerReport {
    power_report_with(state, PowerConvention::Resonant)
}

/// Compute the power metrics of `state` under an explicit convention.
pub fn power_report_with(state: &NetworkState, convention: PowerConvention) -> PowerReport {
    let n = state.len();
    let mut active = Vec::with_capacity(n);
    let mut reactive = Vec::with_capacity(n);
    for node in state.nodes() {
        let vi = node.v.magnitude() * node.i.magnitude();
        match convention {
            PowerConvention::Resonant => {
                active.push(vi * node.phi.cos());
                reactive.push(vi * node.phi.sin());
            }
            PowerConvention::NonResonant => {
                active.push(vi);
                reactive.push(0.0);
            }
        }
    }
    let total_active_abs = comp_sum(active.iter().map(|p| p.abs()));
    let dissipation_d = comp_sum(state.nodes().iter().map(|node| {
        let (mv, mi) = node.masses();
        match convention {
            PowerConvention::Resonant => {
                let c = node.phi.cos();
                mv * mi * c * c
            }
            PowerConvention::NonResonant => mv * mi,
        }
    }));
    PowerReport {
        per_node_active: active,
        per_node_reactive: reactive,
        total_active_abs,
        dissipation_d,
        conservation_residual: state.conservation_residual(),
    }
}

/// Residual |omega * sqrt(LC) - 1| of the LC resonance condition
/// omega = 1/sqrt(LC); zero exactly at resonance.
pub fn lc_resonance_check(inductance: f64, capacitance: f64, omega: f64) -> Result<f64> {
    if !(inductance > 0.0) || !(capacitance > 0.0) || !(omega > 0.0) {
        return Err(Error::domain(
            "lc_resonance_check needs positive L, C and omega",
        ));
    }
    Ok((omega * (inductance * capacitance).sqrt() - 1.0).abs())
}

/// The unique positive (L, C) pair that realizes node `i` as an LC tank
/// resonant at `omega`: C = |I|/(omega |V|), L = |V|/(omega |I|).
///
/// The stored-energy split then matches the node's mass split and
/// omega = 1/sqrt(LC) holds by construction.
pub fn equivalent_lc(state: &NetworkState, i: usize, omega: f64) -> Result<(f64, f64)> {
    if !(omega > 0.0) {
        return Err(Error::domain("equivalent_lc needs omega > 0"));
    }
    let node = &state.nodes()[i];
    let v = node.v.magnitude();
    let c = node.i.magnitude();
    if v < 1e-12 || c < 1e-12 {
        return Err(Error::NotResonantNode { node: i });
    }
    Ok((v / (omega * c), c / (omega * v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::NetworkState;
    use std::f64::consts::PI;

    fn state(masses: &[(f64, f64)], phis: &[f64]) -> NetworkState {
        let groups = vec![(0..masses.len()).collect()];
        NetworkState::from_masses_unchecked(masses, phis, groups)
    }

    #[test]
    fn quadrature_has_zero_active_power() {
        let s = state(&[(0.3, 0.2), (0.25, 0.25)], &[PI / 2.0, -PI / 2.0]);
        let r = power_report(&s);
        assert!(r.total_active_abs < 1e-15);
        assert!(r.dissipation_d < 1e-30);
        assert!(r.per_node_reactive.iter().all(|q| q.abs() > 0.0));
    }

    #[test]
    fn in_phase_node_metrics() {
        let s = state(&[(0.5, 0.5)], &[0.0]);
        let r = power_report(&s);
        assert!((r.per_node_active[0] - 0.5).abs() < 1e-15);
        assert!(r.per_node_reactive[0].abs() < 1e-15);
    }

    #[test]
    fn quarter_phase_node_metrics() {
        let s = state(&[(0.5, 0.5)], &[PI / 4.0]);
        let r = power_report(&s);
        let expect = 0.5 * (2.0f64.sqrt() / 2.0);
        assert!((r.per_node_active[0] - expect).abs() < 1e-12);
        assert!((r.per_node_reactive[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn non_resonant_convention_ignores_phase() {
        let s = state(&[(0.5, 0.5)], &[PI / 2.0]);
        let r = power_report_with(&s, PowerConvention::NonResonant);
        assert!((r.per_node_active[0] - 0.5).abs() < 1e-15);
        assert_eq!(r.per_node_reactive[0], 0.0);
        assert!((r.dissipation_d - 0.25).abs() < 1e-15);
    }

    #[test]
    fn lc_resonance_examples() {
        assert_eq!(lc_resonance_check(1.0, 1.0, 1.0).unwrap(), 0.0);
        assert!(lc_resonance_check(4.0, 1.0, 0.5).unwrap() < 1e-15);
        assert!((lc_resonance_check(1.0, 1.0, 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(lc_resonance_check(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn equivalent_lc_matches_resonance() {
        // |V| = |I|: L = C = 1 at omega = 1
        let s = state(&[(0.5, 0.5)], &[PI / 2.0]);
        let (l, c) = equivalent_lc(&s, 0, 1.0).unwrap();
        assert!((l - 1.0).abs() < 1e-12 && (c - 1.0).abs() < 1e-12);

        // |V| = 2|I|: L = 2, C = 0.5
        let s2 = state(&[(0.8, 0.2)], &[PI / 2.0]);
        let (l2, c2) = equivalent_lc(&s2, 0, 1.0).unwrap();
        assert!((l2 - 2.0).abs() < 1e-12 && (c2 - 0.5).abs() < 1e-12);
        assert!(lc_resonance_check(l2, c2, 1.0).unwrap() < 1e-12);

        // floating node has no LC realization
        let s3 = state(&[(1.0, 0.0)], &[PI / 2.0]);
        assert!(matches!(
            equivalent_lc(&s3, 0, 1.0),
            Err(Error::NotResonantNode { node: 0 })
        ));
    }
}
