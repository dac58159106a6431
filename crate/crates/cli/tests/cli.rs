use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mfcorr_core::meanfield::build_simplex_grid;
use mfcorr_core::report::Report;
use mfcorr_core::MeanField;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfcorr"))
}

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/models").join(name)
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.stderr.is_empty() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn solve_contagion(dir: &Path) -> PathBuf {
    let report = dir.join("report.json");
    let out = run(bin()
        .args(["solve-mfe", "--grid-res", "8", "--horizon", "3", "--model"])
        .arg(model("contagion2.json"))
        .arg("--out")
        .arg(&report)
        .arg("--plot-dir")
        .arg(dir.join("plots")));
    assert_eq!(out.status.code(), Some(0));
    report
}

#[test]
fn solve_mfe_matches_golden_values() {
    let dir = tempfile::tempdir().unwrap();
    let report = solve_contagion(dir.path());
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    let golden: Value =
        serde_json::from_str(include_str!("golden/contagion2_mfe_v1.json")).unwrap();
    let got = rep["solution"]["values"][0].as_array().unwrap();
    let want = golden["v1"].as_array().unwrap();
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        for (a, b) in g.as_array().unwrap().iter().zip(w.as_array().unwrap()) {
            assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() <= 1e-12);
        }
    }
    for key in ["model_hash", "config", "version", "wall_clock_secs"] {
        assert!(!rep["meta"][key].is_null(), "meta.{key} missing");
    }
}

#[test]
fn report_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let report = solve_contagion(dir.path());
    let text = std::fs::read_to_string(report).unwrap();
    let parsed = Report::from_json(&text).unwrap();
    assert_eq!(parsed.to_json(), text);
    assert_eq!(Report::from_json(&parsed.to_json()).unwrap(), parsed);
}

#[test]
fn plot_data_row_counts() {
    let dir = tempfile::tempdir().unwrap();
    solve_contagion(dir.path());
    let nodes = build_simplex_grid(4, 8).unwrap().len();
    let count = |f: &str| std::fs::read_to_string(dir.path().join("plots").join(f)).unwrap().lines().count();
    assert_eq!(count("values.csv"), 1 + nodes * 3);
    assert_eq!(count("zpath.csv"), 1 + 4);
    assert_eq!(count("residuals.csv"), 1);
}

#[test]
fn missing_model_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .args(["solve-mfe", "--model", "no/such/model.json", "--out"])
        .arg(dir.path().join("r.json")));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no/such/model.json"));
    assert!(!dir.path().join("r.json").exists());
}

#[test]
fn grid_cap_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .env("MFCORR_GRID_CAP", "10")
        .args(["solve-team", "--grid-res", "8", "--model"])
        .arg(model("contagion2.json"))
        .arg("--out")
        .arg(dir.path().join("r.json")));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds the cap"));
}

#[test]
fn verify_certifies_and_refutes() {
    let dir = tempfile::tempdir().unwrap();
    let report = solve_contagion(dir.path());
    let verdict = dir.path().join("verdict.json");
    let out = run(bin().arg("verify").arg("--report").arg(&report).arg("--out").arg(&verdict));
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&verdict).unwrap()).unwrap();
    assert_eq!(v["verdict"], "CERTIFIED_EPS");

    // replace the stage-1 prescription at the initial node by its opposite
    let mut rep: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let grid = build_simplex_grid(4, 8).unwrap();
    let node = grid.node_index(&MeanField::uniform(4)).unwrap();
    let cell = &mut rep["solution"]["policies"][0][node];
    let flipped: Vec<Vec<f64>> = cell
        .as_array()
        .unwrap()
        .iter()
        .map(|row| row.as_array().unwrap().iter().rev().map(|p| p.as_f64().unwrap()).collect())
        .collect();
    *cell = serde_json::to_value(flipped).unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&rep).unwrap()).unwrap();
    let out = run(bin().arg("verify").arg("--report").arg(&bad).arg("--out").arg(&verdict));
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&verdict).unwrap()).unwrap();
    assert_eq!(v["verdict"], "REFUTED");
    assert!(v["witness"]["gain"].as_f64().unwrap() > 1e-5);
}

#[test]
fn non_convergence_writes_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let out = run(bin()
        .args(["solve-mfe", "--grid-res", "3", "--horizon", "inf", "--max-iter", "3", "--model"])
        .arg(model("contagion2.json"))
        .arg("--out")
        .arg(&report));
    assert_eq!(out.status.code(), Some(2));
    let rep = Report::from_json(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(rep.run().failure.as_deref().unwrap().contains("did not converge"));
    assert_eq!(rep.residual_trace().len(), 3);
}

#[test]
fn simulate_and_assemble_write_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let report = solve_contagion(dir.path());
    let sim = dir.path().join("sim.csv");
    let out = run(bin()
        .arg("simulate")
        .arg("--report")
        .arg(&report)
        .args(["--blocks", "2000", "--seed", "42", "--out"])
        .arg(&sim));
    assert_eq!(out.status.code(), Some(0));
    let first = std::fs::read_to_string(&sim).unwrap();
    assert_eq!(first.lines().next(), Some("t,joint_index,empirical,deterministic,tv"));
    assert_eq!(first.lines().count(), 1 + 4 * 4);
    let out = run(bin()
        .arg("simulate")
        .arg("--report")
        .arg(&report)
        .args(["--blocks", "2000", "--seed", "42", "--out"])
        .arg(&sim));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&sim).unwrap(), first);

    let asm = dir.path().join("asm");
    let out = run(bin()
        .arg("assemble")
        .arg("--report")
        .arg(&report)
        .args(["--z1", "[0.25,0.25,0.25,0.25]", "--T", "2", "--out-dir"])
        .arg(&asm));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(asm.join("zpath.csv")).unwrap().lines().count(), 1 + 3);
    assert_eq!(std::fs::read_to_string(asm.join("prescriptions.csv")).unwrap().lines().count(), 1 + 2 * 2 * 2);
}

#[test]
fn team_and_enumeration_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .args(["solve-team", "--grid-res", "4", "--horizon", "2", "--model"])
        .arg(model("uniform2.json"))
        .arg("--out")
        .arg(dir.path().join("team.json")));
    assert_eq!(out.status.code(), Some(0));
    let out = run(bin()
        .args(["solve-mfe", "--grid-res", "2", "--horizon", "2", "--enumerate-all-pure", "--model"])
        .arg(model("identity1.json"))
        .arg("--out")
        .arg(dir.path().join("game.json")));
    assert_eq!(out.status.code(), Some(0));
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("game.json")).unwrap()).unwrap();
    assert!(rep["solution"]["diagnostics"][0][0]["consistent_pure"].is_array());
}
