//! Complex phasors, per-node state, and the normalized network state.
//!
//! A network of `N` nodes carries a voltage phasor, a current phasor and a
//! relative phase angle per node. Nodes are partitioned into subgroups; each
//! subgroup's total mass `sum(|v|^2 + |i|^2)` is held at 1, which is the
//! probability-simplex view the growth-transform updates act on. The single
//! global constraint is the one-subgroup special case.

use crate::error::{Error, Result};
use crate::rng::SplitRng;
use serde::{Deserialize, Serialize};

/// Tolerance accepted at construction for each subgroup mass sum.
pub const MASS_TOL: f64 = 1e-9;

/// Initial relative phases are drawn from [-pi, pi] excluding this band
/// around zero; phi = 0 is an unstable fixed point of the phase dynamics.
pub const PHI_EXCLUSION: f64 = 1e-3;

/// Neumaier compensated sum; keeps subgroup sums honest at the 1e-12 level.
pub(crate) fn comp_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// A dimensionless complex phasor stored in Cartesian form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phasor {
    pub re: f64,
    pub im: f64,
}

impl Phasor {
    pub fn new(re: f64, im: f64) -> Self {
        Phasor { re, im }
    }

    /// Phasor with the given magnitude and phase angle.
    pub fn from_polar(magnitude: f64, phase: f64) -> Self {
        Phasor {
            re: magnitude * phase.cos(),
            im: magnitude * phase.sin(),
        }
    }

    pub fn zero() -> Self {
        Phasor { re: 0.0, im: 0.0 }
    }

    /// Squared magnitude |z|^2.
    pub fn mag2(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn magnitude(&self) -> f64 {
        self.mag2().sqrt()
    }

    /// Phase in (-pi, pi]. A zero phasor has phase 0 by convention.
    pub fn phase(&self) -> f64 {
        if self.re == 0.0 && self.im == 0.0 {
            0.0
        } else {
            self.im.atan2(self.re)
        }
    }

    /// Scale by a real factor (keeps the phase).
    pub fn scaled(&self, k: f64) -> Self {
        Phasor {
            re: self.re * k,
            im: self.im * k,
        }
    }

    /// Rotate by `angle` radians (exactly unit-modulus up to rounding).
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Phasor {
            re: self.re * c - self.im * s,
            im: self.re * s + self.im * c,
        }
    }
}

/// Per-node state: voltage phasor, current phasor, relative phase angle.
///
/// `phi` is evolved by its own dynamics and is the canonical phase difference
/// between current and voltage; the current phasor's instantaneous angle also
/// carries the shared rotation, so the identity `phase(i) - phase(v) = phi`
/// is enforced when a snapshot is taken, not per arithmetic operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub v: Phasor,
    pub i: Phasor,
    pub phi: f64,
}

impl NodeState {
    pub fn new(v: Phasor, i: Phasor, phi: f64) -> Self {
        NodeState { v, i, phi }
    }

    /// Total stored mass |v|^2 + |i|^2.
    pub fn mass(&self) -> f64 {
        self.v.mag2() + self.i.mag2()
    }

    /// Simplex coordinates (|v|^2, |i|^2).
    pub fn masses(&self) -> (f64, f64) {
        (self.v.mag2(), self.i.mag2())
    }

    /// Re-aim the current phasor so that phase(i) = phase(v) + phi, keeping |i|.
    pub fn sync_current_phase(&mut self) {
        self.i = Phasor::from_polar(self.i.magnitude(), self.v.phase() + self.phi);
    }
}

/// Ordered nodes plus a partition of node indices into subgroups.
///
/// Invariant: every subgroup's mass sum is 1 within [`MASS_TOL`] and the
/// partition covers each node index exactly once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    nodes: Vec<NodeState>,
    groups: Vec<Vec<usize>>,
}

impl NetworkState {
    /// Validating constructor.
    pub fn new(nodes: Vec<NodeState>, groups: Vec<Vec<usize>>) -> Result<Self> {
        let state = NetworkState { nodes, groups };
        state.validate()?;
        Ok(state)
    }

    /// Single-subgroup constructor (the global conservation constraint).
    pub fn single_group(nodes: Vec<NodeState>) -> Result<Self> {
        let groups = vec![(0..nodes.len()).collect()];
        Self::new(nodes, groups)
    }

    /// Constructor that skips the mass-sum check. Used by perturbation
    /// analysis (finite differences) and grid search, which must evaluate
    /// objectives slightly off the simplex.
    pub fn new_unchecked(nodes: Vec<NodeState>, groups: Vec<Vec<usize>>) -> Self {
        NetworkState { nodes, groups }
    }

    fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::domain("network needs at least one node"));
        }
        let mut seen = vec![false; self.nodes.len()];
        for group in &self.groups {
            for &idx in group {
                if idx >= self.nodes.len() || seen[idx] {
                    return Err(Error::domain(format!(
                        "partition must cover each node exactly once (index {idx})"
                    )));
                }
                seen[idx] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::domain("partition does not cover all nodes"));
        }
        for k in 0..self.groups.len() {
            let sum = self.group_mass(k);
            if (sum - 1.0).abs() > MASS_TOL {
                return Err(Error::domain(format!(
                    "subgroup {k} mass sum {sum} deviates from 1 beyond {MASS_TOL}"
                )));
            }
        }
        for node in &self.nodes {
            if !node.mass().is_finite() || node.mass() < 0.0 {
                return Err(Error::domain("node mass must be finite and non-negative"));
            }
            if node.phi.abs() > std::f64::consts::PI + 1e-12 {
                return Err(Error::domain("|phi| must not exceed pi"));
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn nodes_mut(&mut self) -> &mut [NodeState] {
        &mut self.nodes
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Compensated mass sum of subgroup `k`.
    pub fn group_mass(&self, k: usize) -> f64 {
        comp_sum(self.groups[k].iter().map(|&i| self.nodes[i].mass()))
    }

    /// Largest |group mass - 1| over all subgroups.
    pub fn conservation_residual(&self) -> f64 {
        (0..self.groups.len())
            .map(|k| (self.group_mass(k) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Subgroup index of each node.
    pub fn group_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.nodes.len()];
        for (k, group) in self.groups.iter().enumerate() {
            for &i in group {
                out[i] = k;
            }
        }
        out
    }

    /// Build a state from explicit mass coordinates and phase angles.
    ///
    /// Voltage phasors start on the real axis and current phasors at angle
    /// `phi`, matching the snapshot convention.
    pub fn from_masses(
        masses: &[(f64, f64)],
        phis: &[f64],
        groups: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if masses.len() != phis.len() {
            return Err(Error::domain("masses and phis length mismatch"));
        }
        let nodes = masses
            .iter()
            .zip(phis)
            .map(|(&(mv, mi), &phi)| {
                NodeState::new(
                    Phasor::from_polar(mv.max(0.0).sqrt(), 0.0),
                    Phasor::from_polar(mi.max(0.0).sqrt(), phi),
                    phi,
                )
            })
            .collect();
        Self::new(nodes, groups)
    }

    /// Unchecked variant of [`NetworkState::from_masses`] for off-simplex states.
    pub fn from_masses_unchecked(
        masses: &[(f64, f64)],
        phis: &[f64],
        groups: Vec<Vec<usize>>,
    ) -> Self {
        let nodes = masses
            .iter()
            .zip(phis)
            .map(|(&(mv, mi), &phi)| {
                NodeState::new(
                    Phasor::from_polar(mv.max(0.0).sqrt(), 0.0),
                    Phasor::from_polar(mi.max(0.0).sqrt(), phi),
                    phi,
                )
            })
            .collect();
        NetworkState {
            nodes,
            groups,
        }
    }

    /// Random feasible state: per subgroup, masses are drawn flat-Dirichlet
    /// (normalized exponentials); each phi is uniform in [-pi, pi] outside
    /// the exclusion band, with the current phasor initially at angle phi.
    pub fn random(group_sizes: &[usize], rng: &mut SplitRng) -> Result<Self> {
        let n: usize = group_sizes.iter().sum();
        if n == 0 {
            return Err(Error::domain("network needs at least one node"));
        }
        let mut masses = Vec::with_capacity(n);
        let mut groups = Vec::with_capacity(group_sizes.len());
        let mut base = 0;
        for &size in group_sizes {
            let draws: Vec<f64> = (0..2 * size).map(|_| -rng.next_open01().ln()).collect();
            let total: f64 = comp_sum(draws.iter().copied());
            for pair in draws.chunks(2) {
                masses.push((pair[0] / total, pair[1] / total));
            }
            groups.push((base..base + size).collect());
            base += size;
        }
        let phis: Vec<f64> = (0..n).map(|_| random_phi(rng)).collect();
        let mut state = Self::from_masses(&masses, &phis, groups)?;
        state.renormalize()?;
        Ok(state)
    }

    /// Rescale every subgroup so its mass sum is exactly 1.
    ///
    /// Phases and within-subgroup mass ratios are untouched; an already
    /// normalized subgroup (sum == 1.0) is left bitwise unchanged.
    pub fn renormalize(&mut self) -> Result<()> {
        for k in 0..self.groups.len() {
            let sum = self.group_mass(k);
            if !(sum > 0.0) {
                return Err(Error::ZeroMass { group: k });
            }
            let scale = 1.0 / sum.sqrt();
            if scale != 1.0 {
                for &i in &self.groups[k] {
                    self.nodes[i].v = self.nodes[i].v.scaled(scale);
                    self.nodes[i].i = self.nodes[i].i.scaled(scale);
                }
            }
        }
        Ok(())
    }
}

/// Uniform phi in [-pi, pi] excluding the +/-[`PHI_EXCLUSION`] band around 0.
pub fn random_phi(rng: &mut SplitRng) -> f64 {
    loop {
        let phi = rng.next_range(-std::f64::consts::PI, std::f64::consts::PI);
        if phi.abs() >= PHI_EXCLUSION {
            return phi;
        }
    }
}

/// Squared-magnitude pairs (|v|^2, |i|^2) of every node, in node order.
pub fn mass_vector(state: &NetworkState) -> Vec<(f64, f64)> {
    state.nodes().iter().map(|n| n.masses()).collect()
}

/// Renormalizing copy; see [`NetworkState::renormalize`].
pub fn renormalize(state: &NetworkState) -> Result<NetworkState> {
    let mut out = state.clone();
    out.renormalize()?;
    Ok(out)
}

/// Map a bounded variable x in [-1, 1] to simplex coordinates
/// (x_plus, x_minus) with x_plus - x_minus = x and x_plus + x_minus = 1.
pub fn bounded_to_simplex(x: f64) -> Result<(f64, f64)> {
    if !(x.abs() <= 1.0) {
        return Err(Error::domain(format!("|x| must be <= 1, got {x}")));
    }
    Ok(((1.0 + x) / 2.0, (1.0 - x) / 2.0))
}
