//! Closed-loop integration and convergence detection.
//!
//! The right-hand side is discontinuous in the state (deadzones) and in time
//! (pulses), so integration is fixed-step forward Euler with disturbances
//! sampled at the left end of each step:
//!
//! ```text
//! x_{k+1} = x_k + dt·u(t_k, x_k),   t_k = k·dt
//! ```
//!
//! The recorded control `u_k` is exactly the slope used for the step, which
//! makes the sign checks in [`crate::certify`] exact at sample points.

use std::fmt;

use nalgebra::DVector;

use crate::certify::{self, CertificationReport};
use crate::controller::ControllerSpec;
use crate::disturbance::{BoundWarning, DisturbanceSpec, EdgeDisturbanceMap};
use crate::error::{Error, Result};
use crate::graph::{
    solve_reference_positions, DesiredOffsets, ReferencePositions, SensingGraph,
    REALIZABILITY_TOL,
};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_WINDOW: f64 = 20.0;
pub const DEFAULT_TOL: f64 = 1e-3;
/// Minimum number of tail mean-crossings for an oscillation verdict.
pub const MIN_CROSSINGS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integration {
    pub dt: f64,
    pub horizon: f64,
}

impl Integration {
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub window: f64,
    pub tol: f64,
}

impl Default for Detection {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            tol: DEFAULT_TOL,
        }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub graph: SensingGraph,
    pub offsets: DesiredOffsets,
    pub x0: DVector<f64>,
    pub disturbances: EdgeDisturbanceMap,
    pub controller: ControllerSpec,
    pub integration: Integration,
    pub detection: Detection,
    pub seed: Option<u64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let n = self.graph.n();
        if self.x0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.x0.len(),
            });
        }
        if self.offsets.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.offsets.n(),
            });
        }
        if !self.x0.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("x0 must be finite".into()));
        }
        let Integration { dt, horizon } = self.integration;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let Detection { window, tol } = self.detection;
        if !(window > 0.0 && horizon >= window && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need horizon >= window > 0, got horizon {horizon}, window {window}"
            )));
        }
        if !(tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be nonnegative, got {tol}")));
        }
        self.controller.validate()?;
        self.disturbances.validate(&self.graph)?;
        self.reference_positions().map(|_| ())
    }

    pub fn reference_positions(&self) -> Result<ReferencePositions> {
        solve_reference_positions(&self.graph, &self.offsets, REALIZABILITY_TOL)
    }

    /// Disturbances with every uniform-random seed mixed with the scenario
    /// seed, when one is set.
    pub fn effective_disturbances(&self) -> EdgeDisturbanceMap {
        let Some(master) = self.seed else {
            return self.disturbances.clone();
        };
        let mut out = EdgeDisturbanceMap::new();
        for ((j, i), spec) in self.disturbances.iter() {
            let spec = match *spec {
                DisturbanceSpec::UniformRandom {
                    amplitude,
                    seed,
                    hold_time,
                } => DisturbanceSpec::UniformRandom {
                    amplitude,
                    seed: mix_seed(master, seed, j, i),
                    hold_time,
                },
                other => other,
            };
            out.insert(j, i, spec);
        }
        out
    }

    pub fn bound_warnings(&self) -> Vec<BoundWarning> {
        self.disturbances.bound_warnings(self.controller.w_bar)
    }
}

fn mix_seed(master: u64, seed: u64, j: usize, i: usize) -> u64 {
    let mut h = master ^ seed.rotate_left(17);
    for v in [j as u64, i as u64] {
        h = (h ^ v).wrapping_mul(0x100_0000_01B3);
        h ^= h >> 29;
    }
    h
}

/// Sampled trajectory. `controls[k]` is the velocity used from `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// `None` for externally supplied trajectories without velocities.
    pub controls: Option<Vec<DVector<f64>>>,
    pub energy: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Same times and controls, states transformed by `f`.
    pub fn map_states(&self, f: impl Fn(&DVector<f64>) -> DVector<f64>) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            states: self.states.iter().map(f).collect(),
            controls: self.controls.clone(),
            energy: self.energy.clone(),
        }
    }

    /// Per-edge errors `x_b - x_a - D_ba` (edges in graph order). On a chain
    /// these are the spacing errors `e_k = x_{k+1} - x_k - D_{(k+1)k}`.
    pub fn edge_errors(&self, graph: &SensingGraph, offsets: &DesiredOffsets) -> Trajectory {
        let edges = graph.edges().to_vec();
        let d: Vec<f64> = edges
            .iter()
            .map(|e| offsets.get(e.b, e.a).unwrap_or(0.0))
            .collect();
        let mut out = self.map_states(|x| {
            DVector::from_iterator(
                edges.len(),
                edges.iter().zip(&d).map(|(e, d)| x[e.b] - x[e.a] - d),
            )
        });
        out.controls = None;
        out
    }

    /// Velocities: recorded controls, or forward differences (the last
    /// sample reuses the last difference).
    pub fn velocities(&self) -> Result<Vec<DVector<f64>>> {
        if let Some(c) = &self.controls {
            return Ok(c.clone());
        }
        if self.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                have: self.len(),
            });
        }
        let mut v: Vec<DVector<f64>> = self
            .states
            .windows(2)
            .zip(self.times.windows(2))
            .map(|(s, t)| (&s[1] - &s[0]) / (t[1] - t[0]))
            .collect();
        v.push(v[v.len() - 1].clone());
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    Oscillating,
    Undecided,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Converged => "converged",
            Self::Oscillating => "oscillating",
            Self::Undecided => "undecided",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceVerdict {
    pub status: Status,
    /// Final state, when converged.
    pub x_star: Option<DVector<f64>>,
    /// `max_i (max x_i - min x_i)` over the tail window.
    pub tail_variation: f64,
    /// Half of the largest per-coordinate tail range.
    pub oscillation_amplitude: f64,
}

/// Euler integration of the closed loop.
pub fn integrate(s: &Scenario) -> Result<Trajectory> {
    s.validate()?;
    let p = s.reference_positions()?;
    let disturbances = s.effective_disturbances();
    let steps = s.integration.steps();
    let dt = s.integration.dt;
    let energy_of = |x: &DVector<f64>| {
        let y = x - &p.0;
        0.5 * y.dot(&s.graph.laplacian_apply(&y))
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);
    let mut energy = Vec::with_capacity(steps + 1);
    let mut x = s.x0.clone();
    for k in 0..=steps {
        let t = k as f64 * dt;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { step: k, time: t });
        }
        let u = s
            .controller
            .controls(&x, t, &s.graph, &s.offsets, &disturbances);
        times.push(t);
        energy.push(energy_of(&x));
        let next = &x + &u * dt;
        states.push(x);
        controls.push(u);
        x = next;
    }
    Ok(Trajectory {
        times,
        states,
        controls: Some(controls),
        energy,
    })
}

fn mean_crossings(values: &[f64]) -> usize {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut last = 0.0_f64;
    let mut count = 0;
    for v in values {
        let side = (v - mean).signum();
        if v - mean == 0.0 {
            continue;
        }
        if last != 0.0 && side != last {
            count += 1;
        }
        last = side;
    }
    count
}

/// Classifies the final `window` seconds of a trajectory.
pub fn detect(traj: &Trajectory, window: f64, tol: f64) -> Result<ConvergenceVerdict> {
    let duration = traj.duration();
    if traj.is_empty() || window > duration + 1e-9 {
        return Err(Error::WindowTooLong { window, duration });
    }
    let t_end = *traj.times.last().unwrap();
    let start = traj
        .times
        .iter()
        .position(|&t| t >= t_end - window - 1e-9)
        .unwrap_or(0);
    let tail = &traj.states[start..];
    let n = traj.dim();

    let mut tail_variation = 0.0_f64;
    let mut oscillating = false;
    for c in 0..n {
        let series: Vec<f64> = tail.iter().map(|x| x[c]).collect();
        let (lo, hi) = series
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        tail_variation = tail_variation.max(range);
        if range > tol && mean_crossings(&series) >= MIN_CROSSINGS {
            oscillating = true;
        }
    }

    let status = if tail_variation <= tol {
        Status::Converged
    } else if oscillating {
        Status::Oscillating
    } else {
        Status::Undecided
    };
    Ok(ConvergenceVerdict {
        status,
        x_star: (status == Status::Converged).then(|| traj.states.last().unwrap().clone()),
        tail_variation,
        oscillation_amplitude: tail_variation / 2.0,
    })
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub trajectory: Trajectory,
    pub verdict: ConvergenceVerdict,
    pub certification: CertificationReport,
    pub warnings: Vec<BoundWarning>,
}

/// Integrate, detect, certify.
pub fn run(s: &Scenario) -> Result<SimulationResult> {
    let trajectory = integrate(s)?;
    let verdict = detect(&trajectory, s.detection.window, s.detection.tol)?;
    let certification = certify::certify_scenario(s, &trajectory, &verdict)?;
    Ok(SimulationResult {
        trajectory,
        verdict,
        certification,
        warnings: s.bound_warnings(),
    })
}
