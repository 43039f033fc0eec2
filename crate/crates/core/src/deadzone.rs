//! Threshold (deadzone) nonlinearities.
//!
//! `T_w` outputs zero whenever `|x| <= w`. Three shapes are available:
//!
//! * `hard`: `x` outside the deadzone.
//! * `ramp`: zero up to `w`, then `(|x| - w)·sgn(x)/δ_w` up to `w + δ_w`,
//!   then `x`. When `w + δ_w < 1` the middle branch ends at `±1` while the
//!   outer branch restarts at `±(w + δ_w)`, so the function drops there and
//!   is not monotone. [`check_threshold_validity`] reports this.
//! * `ramp-continuous`: like `ramp` but with the middle slope
//!   `(w + δ_w)/δ_w`, which joins both branches.
//!
//! Inputs exactly at `|x| = w` go to the deadzone.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MONOTONE_TOL: f64 = 1e-12;
const ZERO_TOL: f64 = 1e-12;
/// Grid points this close outside `w` are not required to be nonzero.
const BOUNDARY_TOL: f64 = 1e-9;

pub fn eval_hard(w: f64, x: f64) -> f64 {
    if x.abs() > w {
        x
    } else {
        0.0
    }
}

pub fn eval_ramp(w: f64, delta_w: f64, x: f64) -> f64 {
    let ax = x.abs();
    if ax > w + delta_w {
        x
    } else if ax <= w {
        0.0
    } else {
        (ax - w) * x.signum() / delta_w
    }
}

pub fn eval_ramp_continuous(w: f64, delta_w: f64, x: f64) -> f64 {
    let ax = x.abs();
    if ax > w + delta_w {
        x
    } else if ax <= w {
        0.0
    } else {
        (ax - w) * x.signum() * (w + delta_w) / delta_w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdKind {
    Hard,
    Ramp,
    RampContinuous,
}

impl fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hard => "hard",
            Self::Ramp => "ramp",
            Self::RampContinuous => "ramp-continuous",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSpec {
    pub kind: ThresholdKind,
    /// Deadzone half-width `w`, meters.
    pub width: f64,
    /// Ramp width `δ_w`, meters. Required for the ramp kinds.
    pub ramp_width: Option<f64>,
}

impl ThresholdSpec {
    pub fn hard(width: f64) -> Self {
        Self {
            kind: ThresholdKind::Hard,
            width,
            ramp_width: None,
        }
    }

    pub fn ramp(width: f64, ramp_width: f64) -> Self {
        Self {
            kind: ThresholdKind::Ramp,
            width,
            ramp_width: Some(ramp_width),
        }
    }

    pub fn ramp_continuous(width: f64, ramp_width: f64) -> Self {
        Self {
            kind: ThresholdKind::RampContinuous,
            width,
            ramp_width: Some(ramp_width),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width >= 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "threshold width must be nonnegative, got {}",
                self.width
            )));
        }
        match (self.kind, self.ramp_width) {
            (ThresholdKind::Hard, _) => Ok(()),
            (_, Some(d)) if d > 0.0 && d.is_finite() => Ok(()),
            (kind, d) => Err(Error::InvalidParameter(format!(
                "{kind} threshold needs a positive delta_w, got {d:?}"
            ))),
        }
    }

    /// Same shape with a different deadzone width.
    pub fn with_width(&self, width: f64) -> Self {
        Self { width, ..*self }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_width(self.width, x)
    }

    /// Evaluates this shape with the deadzone width replaced by `width`.
    pub fn eval_with_width(&self, width: f64, x: f64) -> f64 {
        let d = self.ramp_width.unwrap_or(0.0);
        match self.kind {
            ThresholdKind::Hard => eval_hard(width, x),
            ThresholdKind::Ramp => eval_ramp(width, d, x),
            ThresholdKind::RampContinuous => eval_ramp_continuous(width, d, x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub location: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    /// Worst decrease `f(x₁) - f(x₂)` over consecutive grid points `x₁ < x₂`.
    pub monotonicity: Option<Violation>,
    /// Worst nonzero output inside `[-w, w]`, or zero output outside it.
    pub zero_set: Option<Violation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.monotonicity.is_none() && self.zero_set.is_none()
    }
}

fn keep_worst(slot: &mut Option<Violation>, location: f64, magnitude: f64) {
    if slot.is_none_or(|v| magnitude > v.magnitude) {
        *slot = Some(Violation {
            location,
            magnitude,
        });
    }
}

/// Samples `spec` on a uniform grid over `[-range, range]` and reports the
/// worst breach of monotonicity and of the zero-set property.
pub fn check_threshold_validity(
    spec: &ThresholdSpec,
    samples: usize,
    range: f64,
) -> Result<ValidityReport> {
    if samples < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    spec.validate()?;
    Ok(check_function_validity(|x| spec.eval(x), spec.width, samples, range))
}

/// Grid check of an arbitrary threshold-like function with deadzone `width`.
pub(crate) fn check_function_validity(
    f: impl Fn(f64) -> f64,
    width: f64,
    samples: usize,
    range: f64,
) -> ValidityReport {
    let step = 2.0 * range / (samples.max(2) - 1) as f64;
    let mut report = ValidityReport {
        monotonicity: None,
        zero_set: None,
    };
    let mut prev: Option<f64> = None;
    for k in 0..samples {
        let x = -range + step * k as f64;
        let fx = f(x);
        if let Some(fp) = prev {
            if fx < fp - MONOTONE_TOL {
                keep_worst(&mut report.monotonicity, x, fp - fx);
            }
        }
        prev = Some(fx);

        let inside = x.abs() <= width;
        if inside && fx.abs() > ZERO_TOL {
            keep_worst(&mut report.zero_set, x, fx.abs());
        } else if x.abs() > width + BOUNDARY_TOL && fx.abs() <= ZERO_TOL {
            keep_worst(&mut report.zero_set, x, x.abs() - width);
        }
    }
    report
}
