//! Simulation and certification of decentralized platoon controllers with
//! deadzones, under bounded measurement disturbances.
//!
//! Agents on a line sense relative positions of their neighbors in a
//! [`SensingGraph`]. Each agent moves only when its aggregate measured
//! spacing error exceeds what the disturbances could explain, which makes
//! every velocity component oppose the gradient of the disagreement energy
//! `V(y) = ½yᵀLy`. The crate integrates such systems and checks the
//! consequences on the recorded trajectory.
//!
//! ```
//! use platoon_core::{preset, run, Status};
//!
//! let mut s = preset("fig2").unwrap();
//! s.integration.dt = 1e-2;
//! let result = run(&s).unwrap();
//! assert_eq!(result.verdict.status, Status::Converged);
//! assert!(result.certification.passed());
//! ```

pub mod certify;
pub mod controller;
pub mod deadzone;
pub mod disturbance;
pub mod energy;
pub mod error;
pub mod explore;
pub mod graph;
pub mod io;
pub mod scenario;
pub mod simulate;

pub use certify::{CertificationReport, CheckEntry};
pub use controller::{ControllerKind, ControllerSpec};
pub use deadzone::{ThresholdKind, ThresholdSpec};
pub use disturbance::{DisturbanceSpec, EdgeDisturbanceMap, PulseSpec};
pub use energy::{Classification, QuadraticEnergy};
pub use error::{Error, Result};
pub use graph::{DesiredOffsets, ReferencePositions, SensingGraph};
pub use scenario::{preset, ScenarioFile};
pub use simulate::{
    detect, integrate, run, ConvergenceVerdict, Scenario, SimulationResult, Status, Trajectory,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/energy.md")]
    mod energy {}
    #[doc = include_str!("../../../book/src/thresholds.md")]
    mod thresholds {}
    #[doc = include_str!("../../../book/src/disturbances.md")]
    mod disturbances {}
    #[doc = include_str!("../../../book/src/controllers.md")]
    mod controllers {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/certification.md")]
    mod certification {}
    #[doc = include_str!("../../../book/src/exploration.md")]
    mod exploration {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
