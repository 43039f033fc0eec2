//! `platoon`: run scenarios, emit presets, certify trajectories, and search
//! for unusual trajectories of the coordinate-wise descent condition.
//!
//! Exit status: 0 success, 1 certification failure, 2 input error,
//! 3 an exploration result contradicting the theory.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use platoon_core::certify::{certify_scenario_with, Tolerances};
use platoon_core::explore::{search_counterexample, MatrixFamily, SearchConfig};
use platoon_core::io::{read_trajectory_csv, write_trajectory_csv, Summary};
use platoon_core::{detect, preset, run, Scenario, ScenarioFile};

/// Relative precision of values written with 9 significant digits.
const CSV_PRECISION: f64 = 5e-9;

#[derive(Parser)]
#[command(name = "platoon", version, about = "Deadzone platoon simulator and certifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Default)]
struct Overrides {
    /// Master seed for uniform-random disturbances.
    #[arg(long)]
    seed: Option<u64>,
    /// Integration step, seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated duration, seconds.
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario; writes trajectory.csv and summary.txt.
    Run {
        /// Scenario file (TOML).
        #[arg(required_unless_present = "preset", conflicts_with = "preset")]
        scenario: Option<PathBuf>,
        /// Use a built-in scenario instead of a file.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, short, default_value = ".")]
        output: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print a built-in scenario: fig1, fig2, two-agent-drift.
    Preset {
        name: String,
        /// Write to this file instead of standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Check a trajectory CSV against the theory for its scenario.
    Certify {
        trajectory: PathBuf,
        scenario: PathBuf,
        /// Directory for certification.txt; standard output when absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Random search over matrices and sign-feasible policies.
    Explore {
        /// positive-definite, psd-zero-free-kernel, psd-kernel-with-zeros or laplacian.
        #[arg(long, default_value = "psd-zero-free-kernel")]
        family: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short, default_value = ".")]
        output: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn input_error(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: e.to_string(),
    }
}

fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    ScenarioFile::parse(&text)
        .and_then(|f| f.to_scenario())
        .map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn apply_overrides(s: &mut Scenario, o: &Overrides) -> Result<(), Failure> {
    if let Some(seed) = o.seed {
        s.seed = Some(seed);
    }
    if let Some(dt) = o.dt {
        s.integration.dt = dt;
    }
    if let Some(h) = o.horizon {
        s.integration.horizon = h;
    }
    s.validate().map_err(input_error)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| input_error(format!("{}: {e}", dir.display())))
}

fn cmd_run(
    scenario: Option<PathBuf>,
    preset_name: Option<String>,
    output: &Path,
    overrides: &Overrides,
) -> Result<(), Failure> {
    let mut s = match (scenario, preset_name) {
        (_, Some(name)) => preset(&name).map_err(input_error)?,
        (Some(path), None) => load_scenario(&path)?,
        (None, None) => return Err(input_error("no scenario given")),
    };
    apply_overrides(&mut s, overrides)?;
    let canonical = ScenarioFile::from_scenario(&s).to_toml();
    let result = run(&s).map_err(input_error)?;

    create_dir(output)?;
    let mut csv = Vec::new();
    write_trajectory_csv(&result.trajectory, &mut csv).map_err(input_error)?;
    write_file(&output.join("trajectory.csv"), &csv)?;

    let mut summary = Summary::of_run(&result);
    summary.push("input_hash", format!("sha256:{}", hex_sha256(canonical.as_bytes())));
    write_file(&output.join("summary.txt"), summary.to_string().as_bytes())?;
    for w in &result.warnings {
        eprintln!(
            "warning: disturbance w_{}{} reaches {} > w_bar {}",
            w.j + 1,
            w.i + 1,
            w.bound,
            w.w_bar
        );
    }
    println!("{}", result.verdict.status);
    Ok(())
}

fn cmd_preset(name: &str, output: Option<PathBuf>) -> Result<(), Failure> {
    let text = ScenarioFile::from_scenario(&preset(name).map_err(input_error)?).to_toml();
    match output {
        Some(path) => write_file(&path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_certify(trajectory: &Path, scenario: &Path, output: Option<PathBuf>) -> Result<(), Failure> {
    let s = load_scenario(scenario)?;
    let file = fs::File::open(trajectory)
        .map_err(|e| input_error(format!("{}: {e}", trajectory.display())))?;
    let traj = read_trajectory_csv(file)
        .map_err(|e| input_error(format!("{}: {e}", trajectory.display())))?;
    if traj.dim() != s.graph.n() {
        return Err(input_error(format!(
            "trajectory has {} agents, scenario has {}",
            traj.dim(),
            s.graph.n()
        )));
    }
    let verdict = detect(&traj, s.detection.window, s.detection.tol).map_err(input_error)?;
    let tol = Tolerances::for_rounded(&s, &traj, CSV_PRECISION).map_err(input_error)?;
    let report = certify_scenario_with(&s, &traj, &verdict, &tol).map_err(input_error)?;

    let mut summary = Summary::new();
    summary.push("verdict", verdict.status);
    summary.push(
        "velocity_source",
        if report.finite_difference {
            "finite-difference"
        } else {
            "recorded-controls"
        },
    );
    summary.push_certification(&report);
    let text = summary.to_string();
    match output {
        Some(dir) => {
            create_dir(&dir)?;
            write_file(&dir.join("certification.txt"), text.as_bytes())?;
        }
        None => print!("{text}"),
    }
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .entries
            .iter()
            .filter(|e| e.enforced && !e.passed)
            .map(|e| e.name)
            .collect();
        Err(Failure {
            code: 1,
            message: format!("failed checks: {}", failed.join(", ")),
        })
    }
}

fn cmd_explore(
    family: &str,
    trials: usize,
    seed: u64,
    output: &Path,
    dt: Option<f64>,
    horizon: Option<f64>,
) -> Result<(), Failure> {
    let family: MatrixFamily = family.parse().map_err(input_error)?;
    let mut cfg = SearchConfig::new(family, trials, seed);
    if let Some(dt) = dt {
        cfg.dt = dt;
    }
    if let Some(h) = horizon {
        cfg.horizon = h;
        cfg.window = cfg.window.min(h);
    }
    let report = search_counterexample(&cfg).map_err(input_error)?;

    create_dir(output)?;
    for kept in &report.kept {
        let mut csv = Vec::new();
        write_trajectory_csv(&kept.trajectory, &mut csv).map_err(input_error)?;
        write_file(&output.join(format!("trial-{}.csv", kept.index)), &csv)?;
        let rows: Vec<String> = kept
            .matrix
            .row_iter()
            .map(|r| r.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" "))
            .collect();
        write_file(
            &output.join(format!("trial-{}.matrix", kept.index)),
            (rows.join("\n") + "\n").as_bytes(),
        )?;
    }
    let summary = Summary::of_search(&report);
    write_file(&output.join("explore.txt"), summary.to_string().as_bytes())?;
    for (outcome, count) in &report.tallies {
        println!("{outcome}: {count}");
    }
    if report.violations.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: 3,
            message: report.violations.join("\n"),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            scenario,
            preset,
            output,
            overrides,
        } => cmd_run(scenario, preset, &output, &overrides),
        Command::Preset { name, output } => cmd_preset(&name, output),
        Command::Certify {
            trajectory,
            scenario,
            output,
        } => cmd_certify(&trajectory, &scenario, output),
        Command::Explore {
            family,
            trials,
            seed,
            output,
            dt,
            horizon,
        } => cmd_explore(&family, trials, seed, &output, dt, horizon),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
