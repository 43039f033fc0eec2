//! Trajectory CSV files and key-value summary documents.
//!
//! CSV header: `t,x_1,…,x_n,u_1,…,u_n,V`. The `u` columns are optional on
//! input. Numbers are written with 9 significant digits and the shortest
//! text that reads back to the rounded value, so output is bit-stable.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DVector;

use crate::certify::CertificationReport;
use crate::disturbance::BoundWarning;
use crate::error::{Error, Result};
use crate::explore::SearchReport;
use crate::simulate::{SimulationResult, Trajectory};

/// `v` rounded to 9 significant digits.
pub fn format_sig9(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let r: f64 = format!("{v:.8e}").parse().expect("float round trip");
    if r == 0.0 {
        "0".to_string()
    } else if (1e-4..1e15).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

pub fn write_trajectory_csv(traj: &Trajectory, out: impl Write) -> Result<()> {
    let n = traj.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    if traj.controls.is_some() {
        header.extend((1..=n).map(|i| format!("u_{i}")));
    }
    header.push("V".into());
    w.write_record(&header).map_err(csv_err)?;

    for k in 0..traj.len() {
        let mut row = vec![format_sig9(traj.times[k])];
        row.extend(traj.states[k].iter().map(|&v| format_sig9(v)));
        if let Some(c) = &traj.controls {
            row.extend(c[k].iter().map(|&v| format_sig9(v)));
        }
        row.push(format_sig9(traj.energy.get(k).copied().unwrap_or(f64::NAN)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse(format!("csv: {e}")))
}

/// Reads a trajectory written by [`write_trajectory_csv`], with or without
/// control columns.
pub fn read_trajectory_csv(input: impl Read) -> Result<Trajectory> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let count = |prefix: &str| header.iter().filter(|h| h.starts_with(prefix)).count();
    let n = count("x_");
    let m = count("u_");
    let has_v = header.last().is_some_and(|h| h == "V");

    let mut expected = vec!["t".to_string()];
    expected.extend((1..=n).map(|i| format!("x_{i}")));
    expected.extend((1..=m).map(|i| format!("u_{i}")));
    if has_v {
        expected.push("V".into());
    }
    if n == 0 || (m != 0 && m != n) || header != expected {
        return Err(Error::Parse(format!(
            "unexpected CSV header `{}`; expected t,x_1..x_n[,u_1..u_n],V",
            header.join(",")
        )));
    }

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        controls: (m == n).then(Vec::new),
        energy: Vec::new(),
    };
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let vals = rec
            .iter()
            .map(|s| {
                f64::from_str(s.trim())
                    .map_err(|_| Error::Parse(format!("row {}: `{s}` is not a number", line + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        traj.times.push(vals[0]);
        traj.states.push(DVector::from_column_slice(&vals[1..=n]));
        if let Some(c) = &mut traj.controls {
            c.push(DVector::from_column_slice(&vals[n + 1..=2 * n]));
        }
        traj.energy.push(if has_v { vals[vals.len() - 1] } else { f64::NAN });
    }
    if traj.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, have: 0 });
    }
    Ok(traj)
}

/// Line-oriented `key = value` document.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl fmt::Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn push_certification(&mut self, report: &CertificationReport) {
        self.push("certification.passed", report.passed());
        self.push("certification.finite_difference", report.finite_difference);
        for e in &report.entries {
            let key = |field: &str| format!("check.{}.{field}", e.name);
            self.push(key("passed"), e.passed);
            self.push(key("enforced"), e.enforced);
            self.push(key("worst_margin"), format_sig9(e.worst_margin));
            self.push(key("tolerance"), format_sig9(e.tolerance));
            if let Some(t) = e.worst_time {
                self.push(key("worst_time"), format_sig9(t));
            }
            if let Some(i) = e.worst_index {
                self.push(key("worst_index"), i + 1);
            }
        }
        for (name, why) in &report.skipped {
            self.push(format!("check.{name}.skipped"), why);
        }
    }

    pub fn push_warnings(&mut self, warnings: &[BoundWarning]) {
        self.push("warnings", warnings.len());
        for (k, w) in warnings.iter().enumerate() {
            self.push(
                format!("warning.{}", k + 1),
                format!(
                    "w_{}{} bound {} exceeds w_bar {}",
                    w.j + 1,
                    w.i + 1,
                    format_sig9(w.bound),
                    format_sig9(w.w_bar)
                ),
            );
        }
    }

    pub fn of_run(result: &SimulationResult) -> Self {
        let mut s = Self::new();
        let v = &result.verdict;
        s.push("verdict", v.status);
        s.push("tail_variation", format_sig9(v.tail_variation));
        s.push("oscillation_amplitude", format_sig9(v.oscillation_amplitude));
        if let Some(x) = &v.x_star {
            s.push("x_star", join(x.iter()));
        }
        s.push("samples", result.trajectory.len());
        s.push_certification(&result.certification);
        s.push_warnings(&result.warnings);
        s
    }

    pub fn of_search(report: &SearchReport) -> Self {
        let mut s = Self::new();
        s.push("family", report.family);
        s.push("trials", report.trials.len());
        for (outcome, count) in &report.tallies {
            s.push(format!("tally.{outcome}"), count);
        }
        s.push("violations", report.violations.len());
        for (k, v) in report.violations.iter().enumerate() {
            s.push(format!("violation.{}", k + 1), v);
        }
        for t in &report.trials {
            s.push(
                format!("trial.{}", t.index),
                format!(
                    "n={} policy={} outcome={} clusters={} kernel_distance={} sign_margin={}",
                    t.n,
                    t.policy,
                    t.outcome,
                    t.clusters,
                    format_sig9(t.kernel_distance),
                    format_sig9(t.sign_margin)
                ),
            );
        }
        for k in &report.kept {
            s.push(format!("kept.{}", k.index), format!("trial-{}.csv", k.index));
        }
        s
    }
}

fn join<'a>(xs: impl Iterator<Item = &'a f64>) -> String {
    xs.map(|&v| format_sig9(v)).collect::<Vec<_>>().join(",")
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

impl FromStr for Summary {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut s = Self::new();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(" = ")
                .ok_or_else(|| Error::Parse(format!("summary line {}: missing ` = `", k + 1)))?;
            s.push(key, value);
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.1), "0.1");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(-0.0), "0");
        assert_eq!(format_sig9(2.0), "2");
        assert_eq!(format_sig9(1.234567891234e-7), "1.23456789e-7");
        assert_eq!(format_sig9(123456.7891), "123456.789");
    }

    fn sample(with_controls: bool) -> Trajectory {
        Trajectory {
            times: vec![0.0, 0.5],
            states: vec![DVector::from_vec(vec![0.0, 1.0]), DVector::from_vec(vec![0.25, 1.0])],
            controls: with_controls.then(|| {
                vec![DVector::from_vec(vec![0.5, 0.0]), DVector::from_vec(vec![0.5, 0.0])]
            }),
            energy: vec![0.0, 0.28125],
        }
    }

    #[test]
    fn csv_round_trip() {
        for controls in [true, false] {
            let t = sample(controls);
            let mut buf = Vec::new();
            write_trajectory_csv(&t, &mut buf).unwrap();
            let text = String::from_utf8(buf.clone()).unwrap();
            let cols = text.lines().next().unwrap().split(',').count();
            assert_eq!(cols, if controls { 6 } else { 4 });
            assert_eq!(read_trajectory_csv(buf.as_slice()).unwrap(), t);
        }
    }

    #[test]
    fn csv_rejects_bad_header() {
        let text = "t,x_1,u_1,u_2,V\n0,0,0,0,0\n";
        assert!(read_trajectory_csv(text.as_bytes()).is_err());
        let text = "t,x_1,V\n0,zero,0\n";
        assert!(matches!(read_trajectory_csv(text.as_bytes()), Err(Error::Parse(_))));
    }

    #[test]
    fn summary_round_trip() {
        let mut s = Summary::new();
        s.push("verdict", "converged");
        s.push("x_star", "0,1");
        let back: Summary = s.to_string().parse().unwrap();
        assert_eq!(back, s);
        assert_eq!(back.get("verdict"), Some("converged"));
    }
}
