//! Bounded measurement disturbances `w_ji(t)`.
//!
//! A disturbance is attached to the ordered pair `(j, i)`: the measurement of
//! agent `j` taken by agent `i`. Every generator is a deterministic function of
//! its parameters and time, so simulations are reproducible.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SensingGraph;

/// Periodic rectangular pulse: `bias + magnitude` while on, `bias` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub magnitude: f64,
    pub bias: f64,
    pub period: f64,
    pub pulse_width: f64,
    #[serde(default)]
    pub phase_delay: f64,
}

impl PulseSpec {
    pub fn new(magnitude: f64, bias: f64, period: f64, pulse_width: f64, phase_delay: f64) -> Self {
        Self {
            magnitude,
            bias,
            period,
            pulse_width,
            phase_delay,
        }
    }

    fn is_on(&self, t: f64) -> bool {
        (t - self.phase_delay).rem_euclid(self.period) < self.pulse_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DisturbanceSpec {
    Zero,
    Constant {
        value: f64,
    },
    Pulse(PulseSpec),
    /// Uniform on `[-amplitude, amplitude]`, redrawn every `hold_time` seconds.
    UniformRandom {
        amplitude: f64,
        seed: u64,
        hold_time: f64,
    },
}

impl DisturbanceSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            Self::Zero => Ok(()),
            Self::Constant { value } if value.is_finite() => Ok(()),
            Self::Constant { value } => bad(format!("constant disturbance {value} is not finite")),
            Self::Pulse(p) => {
                if !(p.period > 0.0 && p.period.is_finite()) {
                    bad(format!("pulse period must be positive, got {}", p.period))
                } else if !(p.pulse_width > 0.0 && p.pulse_width <= p.period) {
                    bad(format!(
                        "pulse width must lie in (0, period], got {}",
                        p.pulse_width
                    ))
                } else if !(p.phase_delay >= 0.0) {
                    bad(format!("phase delay must be nonnegative, got {}", p.phase_delay))
                } else if !(p.magnitude.is_finite() && p.bias.is_finite()) {
                    bad("pulse levels must be finite".into())
                } else {
                    Ok(())
                }
            }
            Self::UniformRandom {
                amplitude,
                hold_time,
                ..
            } => {
                if !(amplitude >= 0.0 && amplitude.is_finite()) {
                    bad(format!("amplitude must be nonnegative, got {amplitude}"))
                } else if !(hold_time > 0.0 && hold_time.is_finite()) {
                    bad(format!("hold time must be positive, got {hold_time}"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn sample(&self, t: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Constant { value } => value,
            Self::Pulse(p) => {
                if p.is_on(t) {
                    p.bias + p.magnitude
                } else {
                    p.bias
                }
            }
            Self::UniformRandom {
                amplitude,
                seed,
                hold_time,
            } => {
                if amplitude == 0.0 {
                    return 0.0;
                }
                let window = (t / hold_time).floor().max(0.0) as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(
                    seed ^ window.wrapping_mul(0x9E37_79B9_7F4A_7C15),
                );
                rng.gen_range(-amplitude..=amplitude)
            }
        }
    }

    /// Exact supremum of `|w(t)|` over `t >= 0`.
    pub fn max_abs_bound(&self) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Constant { value } => value.abs(),
            Self::Pulse(p) => p.bias.abs().max((p.bias + p.magnitude).abs()),
            Self::UniformRandom { amplitude, .. } => amplitude,
        }
    }
}

/// A disturbance whose bound exceeds the declared `w̄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundWarning {
    pub j: usize,
    pub i: usize,
    pub bound: f64,
    pub w_bar: f64,
}

/// Disturbances keyed by `(j, i)`; missing pairs are zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeDisturbanceMap {
    entries: BTreeMap<(usize, usize), DisturbanceSpec>,
}

impl EdgeDisturbanceMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, j: usize, i: usize, spec: DisturbanceSpec) -> Option<DisturbanceSpec> {
        self.entries.insert((j, i), spec)
    }

    pub fn get(&self, j: usize, i: usize) -> DisturbanceSpec {
        self.entries.get(&(j, i)).copied().unwrap_or(DisturbanceSpec::Zero)
    }

    pub fn sample(&self, j: usize, i: usize, t: f64) -> f64 {
        self.entries.get(&(j, i)).map_or(0.0, |d| d.sample(t))
    }

    /// Explicitly stored entries.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &DisturbanceSpec)> + '_ {
        self.entries.iter().map(|(&k, v)| (k, v))
    }

    /// Every key must be a directed edge and every spec well-formed.
    pub fn validate(&self, graph: &SensingGraph) -> Result<()> {
        for (&(j, i), spec) in &self.entries {
            if !graph.has_edge(i, j) {
                return Err(Error::DisturbanceOnNonEdge { j, i });
            }
            spec.validate()?;
        }
        Ok(())
    }

    /// Entries whose supremum exceeds `w_bar`.
    pub fn bound_warnings(&self, w_bar: f64) -> Vec<BoundWarning> {
        self.entries
            .iter()
            .filter_map(|(&(j, i), spec)| {
                let bound = spec.max_abs_bound();
                (bound > w_bar + 1e-12).then_some(BoundWarning { j, i, bound, w_bar })
            })
            .collect()
    }

    /// Pulse disturbances for a six-agent chain (agents `0..6`): the leader's
    /// and the tail's forward measurements are clean, the backward
    /// measurements carry a pulse biased at -0.09 m, the forward measurements
    /// from agents 2, 3, 4 carry a pulse biased at 0.01 m, and agent 1's
    /// forward measurement carries the same pulse delayed by one second.
    pub fn six_agent_pulses() -> Self {
        let low = PulseSpec::new(0.1, -0.09, 2.0, 1.0, 0.0);
        let high = PulseSpec::new(0.1, 0.01, 2.0, 1.0, 0.0);
        let delayed = PulseSpec { phase_delay: 1.0, ..high };
        let mut map = Self::new();
        map.insert(1, 0, DisturbanceSpec::Zero);
        map.insert(4, 5, DisturbanceSpec::Zero);
        for (j, i) in [(0, 1), (1, 2), (2, 3), (3, 4)] {
            map.insert(j, i, DisturbanceSpec::Pulse(low));
        }
        for (j, i) in [(3, 2), (4, 3), (5, 4)] {
            map.insert(j, i, DisturbanceSpec::Pulse(high));
        }
        map.insert(2, 1, DisturbanceSpec::Pulse(delayed));
        map
    }
}
