use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use platoon_core::{preset, ScenarioFile};

fn platoon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platoon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_preset(dir: &Path, name: &str) -> std::path::PathBuf {
    let file = dir.join(format!("{name}.toml"));
    let o = platoon(&["preset", name, "-o", path(&file)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    file
}

#[test]
fn preset_output_parses_back() {
    for name in ["fig1", "fig2", "two-agent-drift"] {
        let o = platoon(&["preset", name]);
        assert_eq!(code(&o), 0);
        let text = String::from_utf8(o.stdout).unwrap();
        let parsed = ScenarioFile::parse(&text).unwrap().to_scenario().unwrap();
        assert_eq!(parsed, preset(name).unwrap());
    }
    assert_eq!(code(&platoon(&["preset", "fig9"])), 2);
}

#[test]
fn fig2_run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_preset(dir.path(), "fig2");
    let out = dir.path().join("out");
    let o = platoon(&["run", path(&scenario), "-o", path(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert_eq!(
        header,
        "t,x_1,x_2,x_3,x_4,x_5,x_6,u_1,u_2,u_3,u_4,u_5,u_6,V"
    );
    assert_eq!(lines.count(), 30001);
    assert!(csv.lines().all(|l| l.split(',').count() == 14));

    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("verdict = converged"));
    assert!(summary.contains("certification.passed = true"));
    assert!(summary.contains("input_hash = sha256:"));
    assert!(summary.contains("warnings = 4"));
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = platoon(&["run", "--preset", "fig2", "--dt", "0.01", "-o", path(out)]);
        assert_eq!(code(&o), 0);
    }
    for f in ["trajectory.csv", "summary.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn overrides_change_the_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let o = platoon(&[
        "run", "--preset", "two-agent-drift", "--dt", "0.01", "--horizon", "6", "-o",
        path(dir.path()),
    ]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 601);
}

#[test]
fn malformed_scenario_exits_2_with_field() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_preset(dir.path(), "fig2");
    let text = fs::read_to_string(&scenario)
        .unwrap()
        .replace("gain = 3.0", "gain = \"three\"");
    fs::write(&scenario, text).unwrap();
    let o = platoon(&["run", path(&scenario), "-o", path(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("gain"));

    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&platoon(&["run", path(&missing)])), 2);
}

#[test]
fn unrealizable_offsets_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("triangle.toml");
    fs::write(
        &file,
        r#"
offsets = [[2, 1, 1.0], [3, 2, 1.0], [3, 1, 5.0]]

[graph]
type = "edges"
n = 3
edges = [[1, 2], [2, 3], [1, 3]]

[initial]
x0 = [0.0, 1.0, 2.0]

[controller]
kind = "node-deadzone"
gain = 1.0
w_bar = 0.1
threshold = { kind = "hard" }

[integration]
dt = 0.01
horizon = 1.0

[detection]
window = 0.5
tol = 0.001
"#,
    )
    .unwrap();
    let o = platoon(&["run", path(&file), "-o", path(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("realiz"));
}

fn fig2_outputs(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let scenario = write_preset(dir, "fig2");
    let out = dir.join("out");
    assert_eq!(code(&platoon(&["run", path(&scenario), "-o", path(&out)])), 0);
    (scenario, out.join("trajectory.csv"))
}

fn rewrite_csv(src: &Path, dst: &Path, f: impl Fn(usize, Vec<String>) -> Vec<String>) {
    let text = fs::read_to_string(src).unwrap();
    let rows: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(k, l)| f(k, l.split(',').map(str::to_string).collect()).join(","))
        .collect();
    fs::write(dst, rows.join("\n") + "\n").unwrap();
}

#[test]
fn certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (scenario, csv) = fig2_outputs(dir.path());

    let o = platoon(&["certify", path(&csv), path(&scenario)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    let escaped = dir.path().join("escaped.csv");
    rewrite_csv(&csv, &escaped, |k, mut row| {
        if k == 500 {
            row[3] = "9.5".into();
        }
        row
    });
    let o = platoon(&["certify", path(&escaped), path(&scenario)]);
    assert_eq!(code(&o), 1);
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("check.hull-containment.passed = false"));

    let no_controls = dir.path().join("positions.csv");
    rewrite_csv(&csv, &no_controls, |_, row| {
        let mut kept = row[..7].to_vec();
        kept.push(row[13].clone());
        kept
    });
    let out = dir.path().join("report");
    let o = platoon(&["certify", path(&no_controls), path(&scenario), "-o", path(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(out.join("certification.txt")).unwrap();
    assert!(report.contains("velocity_source = finite-difference"));

    let garbage = dir.path().join("garbage.csv");
    fs::write(&garbage, "a,b,c\n1,2,3\n").unwrap();
    assert_eq!(code(&platoon(&["certify", path(&garbage), path(&scenario)])), 2);
}

#[test]
fn explore_is_reproducible_and_clean() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = platoon(&[
            "explore", "--family", "positive-definite", "--trials", "20", "--seed", "3",
            "--horizon", "60", "-o", path(out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let report = fs::read_to_string(a.join("explore.txt")).unwrap();
    assert_eq!(report, fs::read_to_string(b.join("explore.txt")).unwrap());
    assert!(report.contains("violations = 0"));
    assert!(report.contains("trials = 20"));

    let o = platoon(&["explore", "--family", "indefinite"]);
    assert_eq!(code(&o), 2);
}
