//! Human-editable scenario files (TOML) and the built-in presets.
//!
//! Agents are numbered from 1 in files and from 0 in memory.
//!
//! ```toml
//! seed = 7                                # optional
//! offsets = [[2, 1, 1.0], [3, 2, 1.0]]    # (j, i, D_ji)
//!
//! [graph]
//! type = "chain"               # or "edges", with edges = [[1, 2], [2, 3]]
//! n = 3
//!
//! [initial]
//! x0 = [0.0, 0.8, 2.3]
//!
//! [[disturbances]]
//! edge = [2, 1]                # w_21: agent 2 measured by agent 1
//! kind = "constant"
//! value = 0.01
//!
//! [controller]
//! kind = "node-deadzone"       # edge-deadzone | proportional
//! gain = 3.0
//! w_bar = 0.1
//! threshold = { kind = "hard", w = 0.1 }
//!
//! [integration]
//! dt = 0.001
//! horizon = 30.0
//!
//! [detection]
//! window = 20.0
//! tol = 0.001
//! ```

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::controller::{ControllerKind, ControllerSpec};
use crate::deadzone::{ThresholdKind, ThresholdSpec};
use crate::disturbance::{DisturbanceSpec, EdgeDisturbanceMap};
use crate::error::{Error, Result};
use crate::graph::{DesiredOffsets, SensingGraph};
use crate::simulate::{Detection, Integration, Scenario};

pub const PRESETS: [&str; 3] = ["fig1", "fig2", "two-agent-drift"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// `(j, i, D_ji)` triples; the reverse direction is implied.
    pub offsets: Vec<(usize, usize, f64)>,
    pub graph: GraphSection,
    pub initial: InitialSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disturbances: Vec<DisturbanceEntry>,
    pub controller: ControllerSection,
    pub integration: IntegrationSection,
    pub detection: DetectionSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphType {
    Chain,
    Edges,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    #[serde(rename = "type")]
    pub kind: GraphType,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<(usize, usize)>,
    /// One weight per edge, in edge order; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceEntry {
    /// `[j, i]`: the measurement of `j` taken by `i`.
    pub edge: (usize, usize),
    #[serde(flatten)]
    pub spec: DisturbanceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub kind: ControllerKind,
    pub gain: f64,
    pub w_bar: f64,
    pub threshold: ThresholdSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    pub kind: ThresholdKind,
    /// Must equal `w_bar` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    pub dt: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    pub window: f64,
    pub tol: f64,
}

fn zero_based(n: usize, k: usize, what: &str) -> Result<usize> {
    if k == 0 || k > n {
        return Err(Error::Scenario(format!(
            "{what}: agent {k} is outside 1..={n}"
        )));
    }
    Ok(k - 1)
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files always serialize")
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        let n = self.graph.n;
        let pairs: Vec<(usize, usize)> = match self.graph.kind {
            GraphType::Chain => (0..n.saturating_sub(1)).map(|k| (k, k + 1)).collect(),
            GraphType::Edges => self
                .graph
                .edges
                .iter()
                .map(|&(a, b)| Ok((zero_based(n, a, "graph.edges")?, zero_based(n, b, "graph.edges")?)))
                .collect::<Result<_>>()?,
        };
        if self.graph.kind == GraphType::Chain && !self.graph.edges.is_empty() {
            return Err(Error::Scenario("graph.edges is only allowed with type = \"edges\"".into()));
        }
        let graph = match &self.graph.weights {
            None if self.graph.kind == GraphType::Chain => SensingGraph::chain(n)?,
            None => SensingGraph::new(n, pairs)?,
            Some(w) if w.len() == pairs.len() => SensingGraph::with_weights(
                n,
                pairs.iter().zip(w).map(|(&(a, b), &w)| (a, b, w)),
            )?,
            Some(w) => {
                return Err(Error::Scenario(format!(
                    "graph.weights has {} entries for {} edges",
                    w.len(),
                    pairs.len()
                )))
            }
        };

        let triples = self
            .offsets
            .iter()
            .map(|&(j, i, d)| Ok((zero_based(n, j, "offsets")?, zero_based(n, i, "offsets")?, d)))
            .collect::<Result<Vec<_>>>()?;
        let offsets = DesiredOffsets::new(&graph, triples)?;

        let mut disturbances = EdgeDisturbanceMap::new();
        for e in &self.disturbances {
            let j = zero_based(n, e.edge.0, "disturbances.edge")?;
            let i = zero_based(n, e.edge.1, "disturbances.edge")?;
            if disturbances.insert(j, i, e.spec).is_some() {
                return Err(Error::Scenario(format!(
                    "disturbance for edge [{}, {}] given twice",
                    e.edge.0, e.edge.1
                )));
            }
        }

        let c = &self.controller;
        if let Some(w) = c.threshold.w {
            if w != c.w_bar {
                return Err(Error::Scenario(format!(
                    "controller.threshold.w = {w} differs from controller.w_bar = {}",
                    c.w_bar
                )));
            }
        }
        let threshold = ThresholdSpec {
            kind: c.threshold.kind,
            width: c.w_bar,
            ramp_width: c.threshold.delta_w,
        };
        let scenario = Scenario {
            graph,
            offsets,
            x0: DVector::from_vec(self.initial.x0.clone()),
            disturbances,
            controller: ControllerSpec {
                kind: c.kind,
                gain: c.gain,
                threshold,
                w_bar: c.w_bar,
            },
            integration: Integration {
                dt: self.integration.dt,
                horizon: self.integration.horizon,
            },
            detection: Detection {
                window: self.detection.window,
                tol: self.detection.tol,
            },
            seed: self.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        let g = &s.graph;
        let unit = g.is_unit_weighted();
        let chain = g.is_chain();
        let graph = GraphSection {
            kind: if chain { GraphType::Chain } else { GraphType::Edges },
            n: g.n(),
            edges: if chain {
                Vec::new()
            } else {
                g.edges().iter().map(|e| (e.a + 1, e.b + 1)).collect()
            },
            weights: (!unit).then(|| g.edges().iter().map(|e| e.weight).collect()),
        };
        let offsets = g
            .edges()
            .iter()
            .map(|e| (e.b + 1, e.a + 1, s.offsets.get(e.b, e.a).unwrap_or(0.0)))
            .collect();
        let disturbances = s
            .disturbances
            .iter()
            .map(|((j, i), spec)| DisturbanceEntry {
                edge: (j + 1, i + 1),
                spec: *spec,
            })
            .collect();
        let c = &s.controller;
        Self {
            seed: s.seed,
            offsets,
            graph,
            initial: InitialSection {
                x0: s.x0.iter().copied().collect(),
            },
            disturbances,
            controller: ControllerSection {
                kind: c.kind,
                gain: c.gain,
                w_bar: c.w_bar,
                threshold: ThresholdSection {
                    kind: c.threshold.kind,
                    w: Some(c.w_bar),
                    delta_w: c.threshold.ramp_width,
                },
            },
            integration: IntegrationSection {
                dt: s.integration.dt,
                horizon: s.integration.horizon,
            },
            detection: DetectionSection {
                window: s.detection.window,
                tol: s.detection.tol,
            },
        }
    }
}

fn six_agent(kind: ControllerKind, horizon: f64) -> Scenario {
    let graph = SensingGraph::chain(6).expect("valid chain");
    let offsets = DesiredOffsets::uniform_chain(&graph, 1.0).expect("valid offsets");
    Scenario {
        graph,
        offsets,
        x0: DVector::from_vec(vec![0.0, 0.5, 1.4, 2.2, 3.1, 4.1]),
        disturbances: EdgeDisturbanceMap::six_agent_pulses(),
        controller: ControllerSpec {
            kind,
            gain: 3.0,
            threshold: ThresholdSpec::ramp(0.1, 0.02),
            w_bar: 0.1,
        },
        integration: Integration { dt: 1e-3, horizon },
        detection: Detection {
            window: 20.0,
            tol: 1e-3,
        },
        seed: None,
    }
}

fn two_agent_drift() -> Scenario {
    let graph = SensingGraph::chain(2).expect("valid chain");
    let offsets = DesiredOffsets::uniform_chain(&graph, 1.0).expect("valid offsets");
    let mut disturbances = EdgeDisturbanceMap::new();
    disturbances.insert(1, 0, DisturbanceSpec::Constant { value: 0.01 });
    disturbances.insert(0, 1, DisturbanceSpec::Zero);
    Scenario {
        graph,
        offsets,
        x0: DVector::from_vec(vec![0.0, 1.0]),
        disturbances,
        controller: ControllerSpec {
            kind: ControllerKind::Proportional,
            gain: 1.0,
            threshold: ThresholdSpec::hard(0.01),
            w_bar: 0.01,
        },
        integration: Integration {
            dt: 1e-3,
            horizon: 10.0,
        },
        detection: Detection {
            window: 5.0,
            tol: 1e-3,
        },
        seed: None,
    }
}

/// Built-in scenarios: `fig1` (edge deadzone, 60 s), `fig2` (node deadzone,
/// 30 s) and `two-agent-drift` (proportional law with a biased sensor).
pub fn preset(name: &str) -> Result<Scenario> {
    match name {
        "fig1" => Ok(six_agent(ControllerKind::EdgeDeadzone, 60.0)),
        "fig2" => Ok(six_agent(ControllerKind::NodeDeadzone, 30.0)),
        "two-agent-drift" => Ok(two_agent_drift()),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}
