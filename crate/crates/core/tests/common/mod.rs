#![allow(dead_code)]

use nalgebra::DVector;
use platoon_core::simulate::{Detection, Integration};
use platoon_core::{
    ControllerKind, ControllerSpec, DesiredOffsets, DisturbanceSpec, EdgeDisturbanceMap,
    PulseSpec, Scenario, SensingGraph, ThresholdSpec,
};
use rand::Rng;

/// Chain with probability 1/2, otherwise a random recursive tree.
pub fn random_tree(n: usize, rng: &mut impl Rng) -> SensingGraph {
    if rng.gen_bool(0.5) {
        return SensingGraph::chain(n).unwrap();
    }
    let edges: Vec<(usize, usize)> = (1..n).map(|b| (rng.gen_range(0..b), b)).collect();
    SensingGraph::new(n, edges).unwrap()
}

/// A disturbance whose supremum does not exceed `w_bar`.
pub fn bounded_disturbance(w_bar: f64, rng: &mut impl Rng) -> DisturbanceSpec {
    match rng.gen_range(0..4) {
        0 => DisturbanceSpec::Zero,
        1 => DisturbanceSpec::Constant {
            value: rng.gen_range(-w_bar..=w_bar),
        },
        2 => {
            let lo = rng.gen_range(-w_bar..=w_bar);
            let hi = rng.gen_range(-w_bar..=w_bar);
            let period = rng.gen_range(0.5..4.0);
            DisturbanceSpec::Pulse(PulseSpec::new(
                hi - lo,
                lo,
                period,
                rng.gen_range(0.1..=1.0) * period,
                rng.gen_range(0.0..period),
            ))
        }
        _ => DisturbanceSpec::UniformRandom {
            amplitude: rng.gen_range(0.0..=w_bar),
            seed: rng.gen(),
            hold_time: rng.gen_range(0.05..2.0),
        },
    }
}

/// Node-deadzone scenario on a random tree with random realizable offsets,
/// hard thresholds and disturbances bounded by `w̄`.
pub fn random_platoon(n: usize, rng: &mut impl Rng) -> Scenario {
    let graph = random_tree(n, rng);
    let mut p = vec![0.0];
    for _ in 1..n {
        let last = *p.last().unwrap();
        p.push(last + rng.gen_range(0.5..2.0));
    }
    let offsets = DesiredOffsets::from_positions(&graph, &p).unwrap();
    let x0 = DVector::from_iterator(n, p.iter().map(|&pi| pi + rng.gen_range(-1.0..1.0)));
    let w_bar = rng.gen_range(0.02..0.2);
    let mut disturbances = EdgeDisturbanceMap::new();
    for (j, i) in graph.directed_edges().collect::<Vec<_>>() {
        disturbances.insert(j, i, bounded_disturbance(w_bar, rng));
    }
    Scenario {
        graph,
        offsets,
        x0,
        disturbances,
        controller: ControllerSpec {
            kind: ControllerKind::NodeDeadzone,
            gain: rng.gen_range(0.5..3.0),
            threshold: ThresholdSpec::hard(w_bar),
            w_bar,
        },
        integration: Integration {
            dt: 1e-2,
            horizon: 40.0,
        },
        detection: Detection {
            window: 10.0,
            tol: 1e-3,
        },
        seed: None,
    }
}
