//! Independent reference implementations used to validate the solver:
//! exhaustive grid search for one- and two-node problems, an accelerated
//! projected-gradient solver for the box-and-simplex QP, and central-
//! difference gradient checking. Nothing here shares code with the
//! growth-transform path it cross-checks.

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::phasor::{comp_sum, NetworkState};
use crate::svm::OcsvmProblem;
use std::f64::consts::PI;

/// Exhaustive scan over the mass simplex x phase grid for tiny problems.
///
/// `resolution` is the number of grid points per mass axis. The phase axis
/// uses 181 points for one node (so +/- pi/2 lie exactly on the grid) and 37
/// per node for two nodes. Returns the best grid state and its value.
pub fn grid_minimize<O: Objective>(
    obj: &O,
    n_nodes: usize,
    resolution: usize,
) -> Result<(NetworkState, f64)> {
    if resolution < 2 {
        return Err(Error::domain("grid resolution must be >= 2"));
    }
    let mut best_value = f64::INFINITY;
    let mut best_state = None;
    match n_nodes {
        1 => {
            let phis = linspace(-PI, PI, 181);
            for a in 0..resolution {
                let mv = a as f64 / (resolution - 1) as f64;
                let mi = 1.0 - mv;
                for &phi in &phis {
                    let state =
                        NetworkState::from_masses_unchecked(&[(mv, mi)], &[phi], vec![vec![0]]);
                    let value = obj.value(&state)?;
                    if value < best_value {
                        best_value = value;
                        best_state = Some(state);
                    }
                }
            }
        }
        2 => {
            let phis = linspace(-PI, PI, 37);
            let r = resolution - 1;
            for a in 0..=r {
                for b in 0..=(r - a) {
                    for c in 0..=(r - a - b) {
                        let d = r - a - b - c;
                        let masses = [
                            (a as f64 / r as f64, b as f64 / r as f64),
                            (c as f64 / r as f64, d as f64 / r as f64),
                        ];
                        for &p0 in &phis {
                            for &p1 in &phis {
                                let state = NetworkState::from_masses_unchecked(
                                    &masses,
                                    &[p0, p1],
                                    vec![vec![0, 1]],
                                );
                                let value = obj.value(&state)?;
                                if value < best_value {
                                    best_value = value;
                                    best_state = Some(state);
                                }
                            }
                        }
                    }
                }
            }
        }
        _ => {
            return Err(Error::domain(
                "grid_minimize handles at most 2 nodes (the grid is exponential)",
            ))
        }
    }
    Ok((best_state.expect("grid always visits at least one point"), best_value))
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Exact Euclidean projection onto {a : sum a_i = 1, 0 <= a_i <= ub}.
///
/// Water-filling: a_i = clamp(y_i - theta, 0, ub) with theta chosen so the
/// coordinates sum to 1. The sum is a non-increasing piecewise-linear
/// function of theta whose breakpoints are {y_i, y_i - ub}; a bracketing
/// scan over the sorted breakpoints followed by one linear solve gives the
/// exact theta in O(N log N).
pub fn project_simplex_box(y: &[f64], ub: f64) -> Result<Vec<f64>> {
    let n = y.len();
    if n == 0 || !(ub > 0.0) {
        return Err(Error::domain("projection needs n >= 1 and ub > 0"));
    }
    if (n as f64) * ub < 1.0 {
        return Err(Error::domain("infeasible: n * ub < 1"));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let prefix: Vec<f64> = std::iter::once(0.0)
        .chain(sorted.iter().scan(0.0, |acc, &v| {
            *acc += v;
            Some(*acc)
        }))
        .collect();

    // mass(theta) = ub * #capped + sum_{active} (y_i - theta)
    let mass = |theta: f64| -> f64 {
        // capped: y_i - theta >= ub; active: 0 < y_i - theta < ub
        let first_active = sorted.partition_point(|&v| v <= theta);
        let first_capped = sorted.partition_point(|&v| v < theta + ub);
        let active = first_capped - first_active;
        let capped = n - first_capped;
        let active_sum = prefix[first_capped] - prefix[first_active];
        ub * capped as f64 + active_sum - theta * active as f64
    };

    let mut breakpoints: Vec<f64> = Vec::with_capacity(2 * n);
    breakpoints.extend(sorted.iter().map(|&v| v - ub));
    breakpoints.extend(sorted.iter().copied());
    breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // mass is non-increasing and continuous; find the bracket
    // [bp[idx-1], bp[idx]] where it crosses 1, then solve the linear piece.
    // Counts are constant only on the open segment, so they are taken at
    // its midpoint rather than at an endpoint.
    let idx = breakpoints.partition_point(|&bp| mass(bp) >= 1.0);
    let theta = if idx == 0 {
        // everything capped; feasible only when n*ub == 1
        breakpoints[0] - 1.0
    } else if idx == breakpoints.len() {
        breakpoints[idx - 1]
    } else {
        let lo = breakpoints[idx - 1];
        let hi = breakpoints[idx];
        let mid = 0.5 * (lo + hi);
        let first_active = sorted.partition_point(|&v| v <= mid);
        let first_capped = sorted.partition_point(|&v| v < mid + ub);
        let active = (first_capped - first_active) as f64;
        if active > 0.0 {
            mid + (mass(mid) - 1.0) / active
        } else {
            lo
        }
    };
    Ok(y.iter().map(|&v| (v - theta).clamp(0.0, ub)).collect())
}

/// Reference solver for the dual QP min 1/2 a^T K a over the simplex-box,
/// ignoring the barrier. Accelerated projected gradient (FISTA with
/// function-value restart) run to an infinity-norm KKT residual below
/// `tol`; deterministic from the uniform start.
pub fn projected_gradient_qp(problem: &OcsvmProblem) -> Result<Vec<f64>> {
    projected_gradient_qp_with(problem, 1e-10, 2_000_000)
}

pub fn projected_gradient_qp_with(
    problem: &OcsvmProblem,
    tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>> {
    let n = problem.n();
    if n > 2000 {
        return Err(Error::domain("QP oracle is limited to N <= 2000"));
    }
    let k = problem
        .gram_dense()
        .ok_or_else(|| Error::domain("QP oracle needs a materialized Gram matrix"))?;
    let ub = problem.alpha_cap();

    let matvec = |a: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.extend((0..n).map(|i| comp_sum(k[i * n..(i + 1) * n].iter().zip(a).map(|(kij, aj)| kij * aj))));
    };
    let fval = |a: &[f64], ka: &[f64]| 0.5 * comp_sum(a.iter().zip(ka).map(|(ai, kai)| ai * kai));

    // Lipschitz bound: infinity norm of the symmetric PSD matrix
    let lipschitz = (0..n)
        .map(|i| k[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let step = 1.0 / lipschitz;

    let mut x = project_simplex_box(&vec![1.0 / n as f64; n], ub)?;
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut kx = Vec::with_capacity(n);
    let mut kz = Vec::with_capacity(n);
    matvec(&x, &mut kx);
    let mut fx = fval(&x, &kx);

    let mut residual = f64::INFINITY;
    for iter in 0..max_iters {
        if iter % 8 == 0 {
            let shifted: Vec<f64> = x.iter().zip(&kx).map(|(xi, g)| xi - g).collect();
            let proj = project_simplex_box(&shifted, ub)?;
            residual = x
                .iter()
                .zip(&proj)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if residual < tol {
                return Ok(x);
            }
        }

        matvec(&z, &mut kz);
        let candidate: Vec<f64> = z.iter().zip(&kz).map(|(zi, g)| zi - step * g).collect();
        let mut x_new = project_simplex_box(&candidate, ub)?;
        let mut kx_new = Vec::with_capacity(n);
        matvec(&x_new, &mut kx_new);
        let mut f_new = fval(&x_new, &kx_new);

        if f_new > fx {
            // momentum overshot: take a plain projected-gradient step from x
            // (non-increasing up to rounding) and restart the momentum
            let fallback: Vec<f64> = x.iter().zip(&kx).map(|(xi, g)| xi - step * g).collect();
            x_new = project_simplex_box(&fallback, ub)?;
            matvec(&x_new, &mut kx_new);
            f_new = fval(&x_new, &kx_new);
            z = x_new.clone();
            t = 1.0;
        } else {
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_new;
            z = x_new
                .iter()
                .zip(&x)
                .map(|(xn, xo)| xn + momentum * (xn - xo))
                .collect();
            t = t_new;
        }
        x = x_new;
        kx = kx_new;
        fx = f_new;
    }
    Err(Error::NoConvergence {
        iters: max_iters,
        residual,
    })
}

/// Max relative deviation between analytic partials and central finite
/// differences of `obj.value` over all coordinates of `state`.
///
/// Deviation per partial is |analytic - fd| / max(1, |analytic|). The state
/// is perturbed off-simplex; objectives are functions of the mass and phase
/// coordinates, so this probes exactly the partials the solver consumes.
pub fn finite_diff_check<O: Objective>(obj: &O, state: &NetworkState, step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::domain("finite-difference step must be > 0"));
    }
    let n = state.len();
    let masses: Vec<(f64, f64)> = state.nodes().iter().map(|nd| nd.masses()).collect();
    let phis: Vec<f64> = state.nodes().iter().map(|nd| nd.phi).collect();
    let groups = state.groups().to_vec();

    let eval = |masses: &[(f64, f64)], phis: &[f64]| -> Result<f64> {
        let s = NetworkState::from_masses_unchecked(masses, phis, groups.clone());
        obj.value(&s)
    };

    let mut worst = 0.0f64;
    for i in 0..n {
        for coord in 0..3usize {
            let mut m_plus = masses.clone();
            let mut m_minus = masses.clone();
            let mut p_plus = phis.clone();
            let mut p_minus = phis.clone();
            let analytic = match coord {
                0 => {
                    m_plus[i].0 += step;
                    m_minus[i].0 -= step;
                    obj.grad_v2(state, i)?
                }
                1 => {
                    m_plus[i].1 += step;
                    m_minus[i].1 -= step;
                    obj.grad_i2(state, i)?
                }
                _ => {
                    p_plus[i] += step;
                    p_minus[i] -= step;
                    obj.grad_phi(state, i)?
                }
            };
            let fd = (eval(&m_plus, &p_plus)? - eval(&m_minus, &p_minus)?) / (2.0 * step);
            let dev = (analytic - fd).abs() / analytic.abs().max(1.0);
            worst = worst.max(dev);
        }
    }
    Ok(worst)
}

/// Wrapper that adds a constant bump to one voltage-mass partial; the
/// negative control for gradient checking.
#[derive(Clone)]
pub struct CorruptGradient<O> {
    pub inner: O,
    pub node: usize,
    pub bump: f64,
}

impl<O: Objective> Objective for CorruptGradient<O> {
    fn beta(&self) -> f64 {
        self.inner.beta()
    }
    fn set_beta(&mut self, beta: f64) -> Result<()> {
        self.inner.set_beta(beta)
    }
    fn loss(&self, state: &NetworkState) -> Result<f64> {
        self.inner.loss(state)
    }
    fn penalty(&self, state: &NetworkState) -> Result<f64> {
        self.inner.penalty(state)
    }
    fn smooth_grad_v2(&self, state: &NetworkState, i: usize) -> Result<f64> {
        let g = self.inner.smooth_grad_v2(state, i)?;
        Ok(if i == self.node { g + self.bump } else { g })
    }
    fn smooth_grad_i2(&self, state: &NetworkState, i: usize) -> Result<f64> {
        self.inner.smooth_grad_i2(state, i)
    }
    fn smooth_grad_phi(&self, state: &NetworkState, i: usize) -> Result<f64> {
        self.inner.smooth_grad_phi(state, i)
    }
}
