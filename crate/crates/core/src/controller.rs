//! Decentralized control laws driven by noisy relative measurements.
//!
//! Agent `i` senses `Δ̂_ji = x_j - x_i + w_ji` for each neighbor `j` and
//! compares it with the desired offset `D_ji`. The three laws differ in where
//! the deadzone sits:
//!
//! * node deadzone: `u_i = k·T_{d(i)w̄}(Σ_j a_ij (Δ̂_ji - D_ji))`, one threshold
//!   on the aggregated error, widened by the (weighted) degree `d(i)`;
//! * edge deadzone: `u_i = k·Σ_j a_ij T_{w̄}(Δ̂_ji - D_ji)`, one threshold per
//!   measurement;
//! * proportional: `u_i = γ·Σ_j a_ij (Δ̂_ji - D_ji)`, no deadzone.
//!
//! For unit weights `a_ij = 1` and `d(i)` is the plain degree.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::deadzone::ThresholdSpec;
use crate::disturbance::EdgeDisturbanceMap;
use crate::error::{Error, Result};
use crate::graph::{DesiredOffsets, SensingGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    NodeDeadzone,
    EdgeDeadzone,
    Proportional,
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NodeDeadzone => "node-deadzone",
            Self::EdgeDeadzone => "edge-deadzone",
            Self::Proportional => "proportional",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerSpec {
    pub kind: ControllerKind,
    /// `k` for the deadzone laws, `γ` for the proportional law, 1/s.
    pub gain: f64,
    /// Shape of the threshold. Its width is replaced per use site by
    /// `d(i)·w̄` (node) or `w̄` (edge).
    pub threshold: ThresholdSpec,
    /// Declared disturbance bound, meters.
    pub w_bar: f64,
}

impl ControllerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gain must be positive, got {}",
                self.gain
            )));
        }
        if !(self.w_bar >= 0.0 && self.w_bar.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "w_bar must be nonnegative, got {}",
                self.w_bar
            )));
        }
        self.threshold.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub observer: usize,
    pub target: usize,
    /// `Δ̂_ji`, meters.
    pub value: f64,
}

/// Measurements grouped by observer.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    by_observer: Vec<Vec<Measurement>>,
}

impl Measurements {
    pub fn empty(n: usize) -> Self {
        Self {
            by_observer: vec![Vec::new(); n],
        }
    }

    pub fn push(&mut self, m: Measurement) {
        self.by_observer[m.observer].push(m);
    }

    /// Measurements taken by agent `i`.
    pub fn of(&self, i: usize) -> &[Measurement] {
        &self.by_observer[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Measurement> {
        self.by_observer.iter().flatten()
    }
}

/// `Δ̂_ji = x_j - x_i + w_ji(t)` for every directed edge.
pub fn measure_all(
    x: &DVector<f64>,
    graph: &SensingGraph,
    disturbances: &EdgeDisturbanceMap,
    t: f64,
) -> Measurements {
    let mut out = Measurements::empty(graph.n());
    for i in 0..graph.n() {
        for &(j, _) in graph.neighbors(i) {
            out.push(Measurement {
                observer: i,
                target: j,
                value: x[j] - x[i] + disturbances.sample(j, i, t),
            });
        }
    }
    out
}

fn weighted_errors<'a>(
    i: usize,
    meas: &'a Measurements,
    offsets: &'a DesiredOffsets,
    graph: &'a SensingGraph,
) -> impl Iterator<Item = (f64, f64)> + 'a {
    meas.of(i).iter().map(move |m| {
        let d = offsets.get(m.target, i).unwrap_or(0.0);
        let a = graph
            .neighbors(i)
            .iter()
            .find(|&&(k, _)| k == m.target)
            .map_or(0.0, |&(_, w)| w);
        (a, m.value - d)
    })
}

/// `u_i = k·T_{d(i)w̄}(Σ_j a_ij (Δ̂_ji - D_ji))`.
pub fn node_deadzone_control(
    i: usize,
    meas: &Measurements,
    offsets: &DesiredOffsets,
    spec: &ControllerSpec,
    graph: &SensingGraph,
) -> f64 {
    let aggregate: f64 = weighted_errors(i, meas, offsets, graph)
        .map(|(a, e)| a * e)
        .sum();
    let degree: f64 = graph.neighbors(i).iter().map(|&(_, w)| w).sum();
    spec.gain * spec.threshold.eval_with_width(degree * spec.w_bar, aggregate)
}

/// `u_i = k·Σ_j a_ij T_{w̄}(Δ̂_ji - D_ji)`.
pub fn edge_deadzone_control(
    i: usize,
    meas: &Measurements,
    offsets: &DesiredOffsets,
    spec: &ControllerSpec,
    graph: &SensingGraph,
) -> f64 {
    let sum: f64 = weighted_errors(i, meas, offsets, graph)
        .map(|(a, e)| a * spec.threshold.eval_with_width(spec.w_bar, e))
        .sum();
    spec.gain * sum
}

/// `u_i = γ·Σ_j a_ij (Δ̂_ji - D_ji)`.
pub fn proportional_control(
    i: usize,
    meas: &Measurements,
    offsets: &DesiredOffsets,
    spec: &ControllerSpec,
    graph: &SensingGraph,
) -> f64 {
    let sum: f64 = weighted_errors(i, meas, offsets, graph)
        .map(|(a, e)| a * e)
        .sum();
    spec.gain * sum
}

impl ControllerSpec {
    pub fn control(
        &self,
        i: usize,
        meas: &Measurements,
        offsets: &DesiredOffsets,
        graph: &SensingGraph,
    ) -> f64 {
        match self.kind {
            ControllerKind::NodeDeadzone => node_deadzone_control(i, meas, offsets, self, graph),
            ControllerKind::EdgeDeadzone => edge_deadzone_control(i, meas, offsets, self, graph),
            ControllerKind::Proportional => proportional_control(i, meas, offsets, self, graph),
        }
    }

    /// Velocity of every agent at time `t` in state `x`.
    pub fn controls(
        &self,
        x: &DVector<f64>,
        t: f64,
        graph: &SensingGraph,
        offsets: &DesiredOffsets,
        disturbances: &EdgeDisturbanceMap,
    ) -> DVector<f64> {
        let meas = measure_all(x, graph, disturbances, t);
        DVector::from_iterator(
            graph.n(),
            (0..graph.n()).map(|i| self.control(i, &meas, offsets, graph)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disturbance::DisturbanceSpec;
    use approx::assert_abs_diff_eq;

    fn two_agents() -> (SensingGraph, DesiredOffsets) {
        let g = SensingGraph::chain(2).unwrap();
        let d = DesiredOffsets::uniform_chain(&g, 1.0).unwrap();
        (g, d)
    }

    fn spec(kind: ControllerKind, gain: f64, w_bar: f64) -> ControllerSpec {
        ControllerSpec {
            kind,
            gain,
            threshold: ThresholdSpec::hard(w_bar),
            w_bar,
        }
    }

    fn single(observer: usize, target: usize, value: f64, n: usize) -> Measurements {
        let mut m = Measurements::empty(n);
        m.push(Measurement {
            observer,
            target,
            value,
        });
        m
    }

    #[test]
    fn measurements_without_noise() {
        let (g, _) = two_agents();
        let x = DVector::from_vec(vec![0.0, 1.0]);
        let m = measure_all(&x, &g, &EdgeDisturbanceMap::new(), 0.0);
        assert_eq!(m.of(0)[0].value, 1.0);
        assert_eq!(m.of(1)[0].value, -1.0);
    }

    #[test]
    fn measurements_with_constant_noise() {
        let (g, _) = two_agents();
        let mut dist = EdgeDisturbanceMap::new();
        dist.insert(1, 0, DisturbanceSpec::Constant { value: 0.01 });
        let x = DVector::from_vec(vec![0.0, 1.0]);
        let m = measure_all(&x, &g, &dist, 3.0);
        assert_abs_diff_eq!(m.of(0)[0].value, 1.01, epsilon = 1e-15);
        let shifted = measure_all(&x.add_scalar(4.2), &g, &dist, 3.0);
        for (a, b) in m.iter().zip(shifted.iter()) {
            assert_abs_diff_eq!(a.value, b.value, epsilon = 1e-12);
        }
    }

    #[test]
    fn node_deadzone_examples() {
        let (g, d) = two_agents();
        let s = spec(ControllerKind::NodeDeadzone, 3.0, 0.1);
        assert_eq!(node_deadzone_control(0, &single(0, 1, 1.05, 2), &d, &s, &g), 0.0);
        assert_abs_diff_eq!(
            node_deadzone_control(0, &single(0, 1, 1.25, 2), &d, &s, &g),
            0.75,
            epsilon = 1e-12
        );
        let x = DVector::from_vec(vec![0.0, 1.0]);
        let u = s.controls(&x, 0.0, &g, &d, &EdgeDisturbanceMap::new());
        assert_eq!(u, DVector::zeros(2));
    }

    #[test]
    fn edge_deadzone_examples() {
        let (g, d) = two_agents();
        let s = spec(ControllerKind::EdgeDeadzone, 1.0, 0.1);
        assert_eq!(edge_deadzone_control(0, &single(0, 1, 1.05, 2), &d, &s, &g), 0.0);

        // Interior agent 1 of a 3-chain, both edge errors 0.15.
        let g3 = SensingGraph::chain(3).unwrap();
        let d3 = DesiredOffsets::uniform_chain(&g3, 1.0).unwrap();
        let mut m = Measurements::empty(3);
        m.push(Measurement { observer: 1, target: 0, value: -1.0 + 0.15 });
        m.push(Measurement { observer: 1, target: 2, value: 1.0 + 0.15 });
        assert_abs_diff_eq!(edge_deadzone_control(1, &m, &d3, &s, &g3), 0.30, epsilon = 1e-12);

        let exact = single(0, 1, 1.0, 2);
        assert_eq!(edge_deadzone_control(0, &exact, &d, &s, &g), 0.0);
    }

    #[test]
    fn proportional_examples() {
        let (g, d) = two_agents();
        let s = spec(ControllerKind::Proportional, 2.0, 0.0);
        assert_abs_diff_eq!(
            proportional_control(0, &single(0, 1, 1.5, 2), &d, &s, &g),
            1.0,
            epsilon = 1e-12
        );

        let gamma = 1.7;
        let s = spec(ControllerKind::Proportional, gamma, 0.0);
        let mut dist = EdgeDisturbanceMap::new();
        dist.insert(1, 0, DisturbanceSpec::Constant { value: 0.01 });
        for x in [[0.0, 1.0], [-3.0, 2.5], [4.0, 4.0]] {
            let u = s.controls(&DVector::from_row_slice(&x), 0.0, &g, &d, &dist);
            assert_abs_diff_eq!(u.sum(), 0.01 * gamma, epsilon = 1e-12);
        }
        let u = s.controls(&DVector::from_vec(vec![0.0, 1.0]), 0.0, &g, &d, &EdgeDisturbanceMap::new());
        assert_eq!(u, DVector::zeros(2));
    }

    #[test]
    fn spec_validation() {
        assert!(spec(ControllerKind::NodeDeadzone, 0.0, 0.1).validate().is_err());
        assert!(spec(ControllerKind::NodeDeadzone, 1.0, -0.1).validate().is_err());
        assert!(spec(ControllerKind::NodeDeadzone, 1.0, 0.1).validate().is_ok());
    }
}
