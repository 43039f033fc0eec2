//! Post-hoc checks of the convergence guarantees against a recorded trajectory.
//!
//! Every check returns a [`CheckEntry`] whose `worst_margin` is the largest
//! value of a quantity that the theory says is nonpositive; the check passes
//! iff `worst_margin <= tolerance`.
//!
//! | check | quantity |
//! |---|---|
//! | `sign-condition` | `u_i·(A x)_i` |
//! | `energy-monotone` | `V(x_{k+1}) - V(x_k)` |
//! | `minmax-monotone` | growth of `max_j y_j`, decay of `min_j y_j` |
//! | `hull-containment` | distance of `x_i` outside `p_i + [min y(0), max y(0)]` |
//! | `residual-bounds` | `|Σ_j a_ij (x*_j - x*_i - D_ji)| - 2 d(i) w̄` |
//! | `chain-bounds` | `|x*_{ℓ} - x*_{ℓ-1} - D| - bound(ℓ)` |

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::controller::ControllerKind;
use crate::energy::QuadraticEnergy;
use crate::error::{Error, Result};
use crate::graph::{DesiredOffsets, ReferencePositions, SensingGraph};
use crate::simulate::{ConvergenceVerdict, Scenario, Status, Trajectory};

pub const SIGN_TOL: f64 = 1e-12;
pub const PATHWISE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckEntry {
    pub name: &'static str,
    pub passed: bool,
    pub worst_margin: f64,
    pub worst_time: Option<f64>,
    pub worst_index: Option<usize>,
    pub tolerance: f64,
    /// Whether the check counts toward the overall verdict.
    pub enforced: bool,
}

impl CheckEntry {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            passed: true,
            worst_margin: f64::NEG_INFINITY,
            worst_time: None,
            worst_index: None,
            tolerance,
            enforced: true,
        }
    }

    fn observe(&mut self, margin: f64, time: Option<f64>, index: Option<usize>) {
        if margin > self.worst_margin || self.worst_margin.is_nan() {
            self.worst_margin = margin;
            self.worst_time = time;
            self.worst_index = index;
        }
    }

    fn finish(mut self) -> Self {
        if self.worst_margin == f64::NEG_INFINITY {
            self.worst_margin = 0.0;
        }
        self.passed = self.worst_margin <= self.tolerance;
        self
    }
}

impl fmt::Display for CheckEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} margin={:e} tol={:e}",
            self.name,
            if self.passed { "pass" } else { "fail" },
            self.worst_margin,
            self.tolerance
        )?;
        if let Some(t) = self.worst_time {
            write!(f, " t={t}")?;
        }
        if let Some(i) = self.worst_index {
            write!(f, " agent={}", i + 1)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CertificationReport {
    pub entries: Vec<CheckEntry>,
    /// Velocities were reconstructed by finite differences.
    pub finite_difference: bool,
    /// Checks that were skipped, with the reason.
    pub skipped: Vec<(&'static str, String)>,
}

impl CertificationReport {
    /// All enforced checks passed.
    pub fn passed(&self) -> bool {
        self.entries.iter().filter(|e| e.enforced).all(|e| e.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// `y = x - p` along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DisagreementCoordinates {
    pub y: Vec<DVector<f64>>,
    pub p: DVector<f64>,
}

impl DisagreementCoordinates {
    pub fn reconstruct(&self) -> Vec<DVector<f64>> {
        self.y.iter().map(|y| y + &self.p).collect()
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

pub fn to_disagreement(traj: &Trajectory, p: &ReferencePositions) -> Result<DisagreementCoordinates> {
    let p = p.as_vector();
    let y = traj
        .states
        .iter()
        .map(|x| {
            check_len(p.len(), x.len())?;
            Ok(x - p)
        })
        .collect::<Result<_>>()?;
    Ok(DisagreementCoordinates { y, p: p.clone() })
}

fn require_samples(traj: &Trajectory, needed: usize) -> Result<()> {
    if traj.len() < needed {
        return Err(Error::TooFewSamples {
            needed,
            have: traj.len(),
        });
    }
    Ok(())
}

/// Largest `ẋ_i·(A x)_i` over all samples, using recorded controls when
/// present and forward differences otherwise.
pub fn check_sign_condition(traj: &Trajectory, a: &DMatrix<f64>, tol: f64) -> Result<CheckEntry> {
    require_samples(traj, if traj.controls.is_some() { 1 } else { 2 })?;
    let velocities = traj.velocities()?;
    let mut entry = CheckEntry::new("sign-condition", tol);
    for ((t, x), v) in traj.times.iter().zip(&traj.states).zip(&velocities) {
        check_len(a.nrows(), x.len())?;
        let ax = a * x;
        for i in 0..x.len() {
            entry.observe(v[i] * ax[i], Some(*t), Some(i));
        }
    }
    Ok(entry.finish())
}

/// Largest increase of `½xᵀAx` between consecutive samples.
pub fn check_energy_monotone(traj: &Trajectory, a: &DMatrix<f64>, tol: f64) -> Result<CheckEntry> {
    require_samples(traj, 2)?;
    let mut entry = CheckEntry::new("energy-monotone", tol);
    let mut prev: Option<f64> = None;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        check_len(a.nrows(), x.len())?;
        let v = 0.5 * x.dot(&(a * x));
        if let Some(p) = prev {
            entry.observe(v - p, Some(*t), None);
        }
        prev = Some(v);
    }
    Ok(entry.finish())
}

/// `max_j x_j` must not grow and `min_j x_j` must not shrink.
pub fn check_minmax_monotone(traj: &Trajectory, tol: f64) -> CheckEntry {
    let mut entry = CheckEntry::new("minmax-monotone", tol);
    for k in 1..traj.len() {
        let (prev, cur) = (&traj.states[k - 1], &traj.states[k]);
        if cur.is_empty() {
            continue;
        }
        let t = Some(traj.times[k]);
        entry.observe(cur.max() - prev.max(), t, Some(cur.imax()));
        entry.observe(prev.min() - cur.min(), t, Some(cur.imin()));
    }
    entry.finish()
}

/// `p_i + min_j y_j(0) - tol <= x_i(t) <= p_i + max_j y_j(0) + tol`.
pub fn check_hull_containment(
    traj: &Trajectory,
    p: &ReferencePositions,
    tol: f64,
) -> Result<CheckEntry> {
    require_samples(traj, 1)?;
    let y = to_disagreement(traj, p)?.y;
    let (lo, hi) = (y[0].min(), y[0].max());
    let mut entry = CheckEntry::new("hull-containment", tol);
    for (t, yk) in traj.times.iter().zip(&y) {
        for (i, &v) in yk.iter().enumerate() {
            entry.observe((lo - v).max(v - hi), Some(*t), Some(i));
        }
    }
    Ok(entry.finish())
}

/// Per-node residuals `|Σ_j a_ij (x*_j - x*_i - D_ji)|`.
pub fn residuals(
    x_star: &DVector<f64>,
    graph: &SensingGraph,
    offsets: &DesiredOffsets,
) -> Result<DVector<f64>> {
    check_len(graph.n(), x_star.len())?;
    Ok(DVector::from_iterator(
        graph.n(),
        (0..graph.n()).map(|i| {
            graph
                .neighbors(i)
                .iter()
                .map(|&(j, a)| a * (x_star[j] - x_star[i] - offsets.get(j, i).unwrap_or(0.0)))
                .sum::<f64>()
                .abs()
        }),
    ))
}

/// `r_i <= 2 d(i) w̄ + slack` for every node.
pub fn check_residual_bounds(
    x_star: &DVector<f64>,
    graph: &SensingGraph,
    offsets: &DesiredOffsets,
    w_bar: f64,
    slack: f64,
) -> Result<CheckEntry> {
    let r = residuals(x_star, graph, offsets)?;
    let mut entry = CheckEntry::new("residual-bounds", slack);
    for i in 0..graph.n() {
        let bound = 2.0 * graph.weighted_degree(i)? * w_bar;
        entry.observe(r[i] - bound, None, Some(i));
    }
    Ok(entry.finish())
}

/// Bound on `|x*_ℓ - x*_{ℓ-1} - D_{ℓ(ℓ-1)}|` for `ℓ = 2..=n` (1-based), i.e.
/// `min(4ℓ - 6, 4n - 4ℓ + 2)·w̄`. Entry `k` of the result is edge `ℓ = k + 2`.
pub fn chain_error_bounds(n: usize, w_bar: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("chain needs n >= 2, got {n}")));
    }
    if !(w_bar >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "w_bar must be nonnegative, got {w_bar}"
        )));
    }
    let n = n as i64;
    Ok((2..=n)
        .map(|l| (4 * l - 6).min(4 * n - 4 * l + 2) as f64 * w_bar)
        .collect())
}

/// Per-edge chain errors against [`chain_error_bounds`]. Requires a
/// unit-weight chain `0 - 1 - ... - (n-1)`.
pub fn check_chain_errors(
    x_star: &DVector<f64>,
    graph: &SensingGraph,
    offsets: &DesiredOffsets,
    w_bar: f64,
    slack: f64,
) -> Result<CheckEntry> {
    if !graph.is_chain() || !graph.is_unit_weighted() {
        return Err(Error::NotAChain);
    }
    check_len(graph.n(), x_star.len())?;
    let bounds = chain_error_bounds(graph.n(), w_bar)?;
    let mut entry = CheckEntry::new("chain-bounds", slack);
    for (k, bound) in bounds.iter().enumerate() {
        let d = offsets.get(k + 1, k).ok_or(Error::MissingOffset { a: k, b: k + 1 })?;
        let e = (x_star[k + 1] - x_star[k] - d).abs();
        entry.observe(e - bound, None, Some(k + 1));
    }
    Ok(entry.finish())
}

/// Tolerances used by [`certify_scenario_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub sign: f64,
    /// Hull and min/max tolerance, before the Euler overshoot allowance.
    pub pathwise: f64,
    /// `None` derives `10·k²·n·dt²·‖L‖·V(y(0))`.
    pub energy: Option<f64>,
    /// `None` uses the scenario's detection tolerance.
    pub converged_slack: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            sign: SIGN_TOL,
            pathwise: PATHWISE_TOL,
            energy: None,
            converged_slack: None,
        }
    }
}

impl Tolerances {
    /// Tolerances for a trajectory whose values were rounded to relative
    /// precision `rel` (e.g. `5e-9` for 9 significant digits). Rounding
    /// errors in `x` and in the recorded or differenced velocities are
    /// propagated through `L` into the sign, energy and path-wise checks.
    pub fn for_rounded(s: &Scenario, traj: &Trajectory, rel: f64) -> Result<Self> {
        require_samples(traj, 2)?;
        let p = s.reference_positions()?;
        let l = s.graph.laplacian();
        let l_inf = l.row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max);
        let max_abs = |vs: &[DVector<f64>]| vs.iter().map(|v| v.amax()).fold(0.0, f64::max);
        let dx = rel * max_abs(&traj.states);
        let dt = traj.times[1] - traj.times[0];
        let velocities = traj.velocities()?;
        let dv = match traj.controls {
            Some(_) => rel * max_abs(&velocities),
            None => 2.0 * dx / dt,
        };
        let ly = traj
            .states
            .iter()
            .map(|x| (&l * (x - p.as_vector())).amax())
            .fold(0.0, f64::max);
        let y_max = traj
            .states
            .iter()
            .map(|x| (x - p.as_vector()).amax())
            .fold(0.0, f64::max);
        let sign = 2.0 * (max_abs(&velocities) * l_inf * 2.0 * dx + ly * dv);
        let l_norm = QuadraticEnergy::new(l.clone())?.norm();
        let y0 = traj.states[0].clone() - p.as_vector();
        let v0 = 0.5 * y0.dot(&(&l * &y0));
        let energy = energy_tolerance(s.controller.gain, s.graph.n(), dt, l_norm, v0)
            + 4.0 * s.graph.n() as f64 * l_inf * y_max * 2.0 * dx;
        Ok(Self {
            sign: SIGN_TOL.max(sign),
            pathwise: PATHWISE_TOL.max(4.0 * dx),
            energy: Some(energy),
            converged_slack: None,
        })
    }
}

/// `k·dt·max_i Σ_j a_ij sup|w_ji|`: how far one Euler step can carry an agent
/// past a neighbor, and so past the running extremes of `y`.
pub fn euler_overshoot(s: &Scenario, dt: f64) -> f64 {
    let w = s.effective_disturbances();
    let worst = (0..s.graph.n())
        .map(|i| {
            s.graph
                .neighbors(i)
                .iter()
                .map(|&(j, a)| a * w.get(j, i).max_abs_bound())
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    s.controller.gain * dt * worst
}

/// `10·k²·n·dt²·‖L‖·V(y(0))`, the allowance for the second-order Euler term.
pub fn energy_tolerance(gain: f64, n: usize, dt: f64, l_norm: f64, v0: f64) -> f64 {
    10.0 * gain * gain * n as f64 * dt * dt * l_norm * v0
}

pub fn certify_scenario(
    s: &Scenario,
    traj: &Trajectory,
    verdict: &ConvergenceVerdict,
) -> Result<CertificationReport> {
    certify_scenario_with(s, traj, verdict, &Tolerances::default())
}

/// Runs every applicable check in disagreement coordinates. Checks count
/// toward [`CertificationReport::passed`] only for node-deadzone runs, the
/// law covered by the theory.
pub fn certify_scenario_with(
    s: &Scenario,
    traj: &Trajectory,
    verdict: &ConvergenceVerdict,
    tol: &Tolerances,
) -> Result<CertificationReport> {
    require_samples(traj, 2)?;
    let p = s.reference_positions()?;
    let l = s.graph.laplacian();
    let y_traj = traj.map_states(|x| x - p.as_vector());
    let enforced = s.controller.kind == ControllerKind::NodeDeadzone;
    let mut report = CertificationReport {
        finite_difference: traj.controls.is_none(),
        ..Default::default()
    };

    let dt = traj.times[1] - traj.times[0];
    let energy_tol = match tol.energy {
        Some(e) => e,
        None => {
            let l_norm = QuadraticEnergy::new(l.clone())?.norm();
            let y0 = &y_traj.states[0];
            let v0 = 0.5 * y0.dot(&(&l * y0));
            energy_tolerance(s.controller.gain, s.graph.n(), dt, l_norm, v0)
        }
    };
    report.entries.push(check_sign_condition(&y_traj, &l, tol.sign)?);
    report.entries.push(check_energy_monotone(&y_traj, &l, energy_tol)?);
    let pathwise = tol.pathwise + euler_overshoot(s, dt);
    report.entries.push(check_minmax_monotone(&y_traj, pathwise));
    report.entries.push(check_hull_containment(traj, &p, pathwise)?);

    let slack = tol.converged_slack.unwrap_or(s.detection.tol);
    match (&verdict.status, &verdict.x_star) {
        (Status::Converged, Some(x_star)) => {
            report.entries.push(check_residual_bounds(
                x_star,
                &s.graph,
                &s.offsets,
                s.controller.w_bar,
                slack,
            )?);
            if s.graph.is_chain() && s.graph.is_unit_weighted() {
                report.entries.push(check_chain_errors(
                    x_star,
                    &s.graph,
                    &s.offsets,
                    s.controller.w_bar,
                    slack,
                )?);
            } else {
                report.skipped.push(("chain-bounds", "not a unit-weight chain".into()));
            }
        }
        _ => {
            let why = format!("verdict is {}", verdict.status);
            report.skipped.push(("residual-bounds", why.clone()));
            report.skipped.push(("chain-bounds", why));
        }
    }
    for e in &mut report.entries {
        e.enforced = enforced;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn traj(states: Vec<Vec<f64>>, controls: Option<Vec<Vec<f64>>>) -> Trajectory {
        let times = (0..states.len()).map(|k| k as f64 * 0.1).collect();
        Trajectory {
            times,
            energy: vec![0.0; states.len()],
            states: states.into_iter().map(DVector::from_vec).collect(),
            controls: controls.map(|c| c.into_iter().map(DVector::from_vec).collect()),
        }
    }

    fn chain6() -> (SensingGraph, DesiredOffsets, ReferencePositions) {
        let g = SensingGraph::chain(6).unwrap();
        let d = DesiredOffsets::uniform_chain(&g, 1.0).unwrap();
        let p = crate::graph::solve_reference_positions(&g, &d, 1e-9).unwrap();
        (g, d, p)
    }

    #[test]
    fn disagreement_of_six_agent_start() {
        let (_, _, p) = chain6();
        let t = traj(vec![vec![0.0, 0.5, 1.4, 2.2, 3.1, 4.1]], None);
        let y = to_disagreement(&t, &p).unwrap();
        let expected = [0.0, -0.5, -0.6, -0.8, -0.9, -0.9];
        for (a, b) in y.y[0].iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert_eq!(y.reconstruct(), t.states);
    }

    #[test]
    fn disagreement_dimension_mismatch() {
        let (_, _, p) = chain6();
        let t = traj(vec![vec![0.0; 3]], None);
        assert!(to_disagreement(&t, &p).is_err());
    }

    #[test]
    fn constant_trajectory_passes_everything() {
        let (g, _, p) = chain6();
        let l = g.laplacian();
        let x = vec![0.0, 0.5, 1.4, 2.2, 3.1, 4.1];
        let t = traj(vec![x.clone(); 5], Some(vec![vec![0.0; 6]; 5]));
        let s = check_sign_condition(&t, &l, 0.0).unwrap();
        assert!(s.passed);
        assert_eq!(s.worst_margin, 0.0);
        assert!(check_energy_monotone(&t, &l, 0.0).unwrap().passed);
        assert!(check_minmax_monotone(&t, 0.0).passed);
        assert!(check_hull_containment(&t, &p, 0.0).unwrap().passed);
    }

    #[test]
    fn gradient_ascent_fails_sign_condition() {
        let l = SensingGraph::chain(2).unwrap().laplacian();
        // L x = (-1, 1) at x = (0, 1); moving along +Lx violates the condition.
        let t = traj(vec![vec![0.0, 1.0], vec![-0.1, 1.1]], None);
        let e = check_sign_condition(&t, &l, 1e-12).unwrap();
        assert!(!e.passed);
        assert!(e.worst_margin > 0.0);
        assert!(!check_energy_monotone(&t, &l, 1e-12).unwrap().passed);
        assert!(!check_minmax_monotone(&t, 1e-12).passed);
    }

    #[test]
    fn hull_escape_is_detected() {
        let (_, _, p) = chain6();
        let x0 = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let mut x1 = x0.clone();
        x1[3] += 0.5;
        let e = check_hull_containment(&traj(vec![x0, x1], None), &p, 1e-6).unwrap();
        assert!(!e.passed);
        assert_eq!(e.worst_index, Some(3));
        assert_abs_diff_eq!(e.worst_margin, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn residuals_at_reference_are_zero() {
        let (g, d, p) = chain6();
        let e = check_residual_bounds(p.as_vector(), &g, &d, 0.1, 1e-3).unwrap();
        assert!(e.passed);
        assert!(e.worst_margin <= -0.2 + 1e-12);
    }

    #[test]
    fn displaced_node_fails_residuals() {
        let (g, d, p) = chain6();
        let mut x = p.as_vector().clone();
        // Interior node, degree 2: displacement 3·2·0.1 gives residual 1.2.
        x[2] += 0.6;
        let e = check_residual_bounds(&x, &g, &d, 0.1, 1e-3).unwrap();
        assert!(!e.passed);
        assert_eq!(e.worst_index, Some(2));
    }

    #[test]
    fn chain_bound_examples() {
        let b = chain_error_bounds(6, 0.1).unwrap();
        assert_eq!(b.len(), 5);
        assert_abs_diff_eq!(b[0], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(b[4], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(b[1], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(chain_error_bounds(2, 0.1).unwrap()[0], 0.2, epsilon = 1e-12);
        assert!(chain_error_bounds(1, 0.1).is_err());
    }

    #[test]
    fn chain_errors_examples() {
        let (g, d, p) = chain6();
        assert!(check_chain_errors(p.as_vector(), &g, &d, 0.1, 1e-3).unwrap().passed);

        let mut x = p.as_vector().clone();
        for k in 2..6 {
            x[k] += 0.7;
        }
        let e = check_chain_errors(&x, &g, &d, 0.1, 1e-3).unwrap();
        assert!(!e.passed);
        assert_eq!(e.worst_index, Some(2));

        let star = SensingGraph::new(3, [(0, 1), (0, 2)]).unwrap();
        let ds = DesiredOffsets::from_positions(&star, &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(
            check_chain_errors(&DVector::zeros(3), &star, &ds, 0.1, 0.0),
            Err(Error::NotAChain)
        );
    }

    #[test]
    fn too_few_samples() {
        let l = SensingGraph::chain(2).unwrap().laplacian();
        let t = traj(vec![vec![0.0, 1.0]], None);
        assert!(matches!(
            check_sign_condition(&t, &l, 0.0),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(check_energy_monotone(&t, &l, 0.0).is_err());
    }
}
