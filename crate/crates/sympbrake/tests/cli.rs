use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sympbrake"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sympbrake-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p
}

fn run(args: &[&str]) -> (i32, Value, Output) {
    let out = bin().args(args).output().unwrap();
    let report = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), report, out)
}

fn rotation_doc(tau: f64) -> Value {
    json!({"k": 1, "tau": tau, "kind": "generator",
           "nodes": [{"t": 0.0, "matrix": {"rows": 2, "cols": 2, "data": [1.0, 0.0, 0.0, 1.0]}}]})
}

#[test]
fn index_path_on_a_rotation() {
    let dir = scratch("rotation");
    let input = write(&dir, "rot.json", &rotation_doc(std::f64::consts::PI / 2.0));
    let (code, r, _) = run(&["index-path", input.to_str().unwrap()]);
    assert_eq!(code, 0);
    let res = &r["result"];
    assert_eq!(res["omega"][0]["index"], 1);
    assert_eq!(res["omega"][0]["nullity"], 0);
    assert_eq!(res["l0"], json!({"index": 0, "nullity": 0}));
    assert_eq!(res["theorem21"]["pass"], true);
    assert_eq!(r["seed"], 0);
    assert!(r["tolerances"]["shoot"].is_number());
    assert_eq!(r["config"]["command"], "index-path");

    let input = write(&dir, "half.json", &rotation_doc(std::f64::consts::PI));
    let (code, r, _) = run(&["index-path", input.to_str().unwrap(), "--pretty", "--plot", dir.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(r, Value::Null);
    assert!(dir.join("index_vs_omega.svg").exists());
}

#[test]
fn malformed_paths_exit_1() {
    let dir = scratch("bad");
    let empty = write(&dir, "empty.json", &json!({"k": 1, "tau": 1.0, "kind": "generator", "nodes": []}));
    let (code, _, out) = run(&["index-path", empty.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no nodes"));
    let junk = dir.join("junk.json");
    std::fs::write(&junk, "{").unwrap();
    assert_eq!(run(&["index-path", junk.to_str().unwrap()]).0, 1);
    assert_eq!(run(&["index-path", dir.join("missing.json").to_str().unwrap()]).0, 1);
    assert_eq!(run(&["index-path"]).0, 1);
}

#[test]
fn reports_are_reproducible() {
    let dir = scratch("repro");
    let out = dir.join("report.json");
    let mut texts = Vec::new();
    for _ in 0..2 {
        let (code, _, _) = run(&["verify", "--sweep", "10", "--seed", "42", "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0);
        texts.push(std::fs::read_to_string(&out).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    let r: Value = serde_json::from_str(&texts[0]).unwrap();
    assert_eq!(r["seed"], 42);
    assert_eq!(r["config"]["sweep"]["sp2"], 10);
    assert_eq!(r["result"]["tallies"]["theorem21"]["checked"], 14);
    let (_, other, _) = run(&["verify", "--sweep", "10", "--seed", "43"]);
    assert_ne!(other["result"]["tallies"], Value::Null);
}

#[test]
fn verify_validation_and_fault_injection() {
    assert_eq!(run(&["verify", "--sweep", "0"]).0, 1);
    assert_eq!(run(&["verify", "--sweep", "5", "--tol", "bogus=1"]).0, 1);
    assert_eq!(run(&["verify", "--sweep", "5", "--tol", "shoot"]).0, 1);
    let (code, r, _) = run(&["verify", "--sweep", "20", "--seed", "3", "--inject-fault", "sign-flip"]);
    assert_eq!(code, 3);
    let failure = r["result"]["failures"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["identity"] == "theorem21")
        .expect("a theorem21 failure")
        .clone();
    // the serialized sample is a path document that replays cleanly
    let dir = scratch("replay");
    let sample = write(&dir, "sample.json", &failure["sample"]);
    let (code, replay, _) = run(&["index-path", sample.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(replay["result"]["theorem21"]["sgn_plus"], failure["detail"]["sgn_plus"]);
}

#[test]
fn config_file_and_overrides() {
    let dir = scratch("config");
    let cfg = write(&dir, "cfg.json", &json!({"seed": 9, "sweep": {"sp2": 4, "sp4": 2, "products": 2, "unipotent": 2}}));
    let (code, r, _) = run(&["verify", "--config", cfg.to_str().unwrap(), "--tol", "brake_square=1e-9"]);
    assert_eq!(code, 0);
    assert_eq!(r["seed"], 9);
    assert_eq!(r["tolerances"]["brake_square"], 1e-9);
    assert_eq!(r["result"]["tallies"]["theorem21"]["checked"], 8);
    let bad = write(&dir, "bad.json", &json!({"sead": 1}));
    assert_eq!(run(&["verify", "--config", bad.to_str().unwrap()]).0, 1);
}

#[test]
fn ellipsoid_examples() {
    let (code, r, _) = run(&["ellipsoid", "--radii", "1,1.4142135623", "--tol", "samples=200"]);
    assert_eq!(code, 0);
    let x = &r["result"]["experiment"];
    let orbits = x["orbits"].as_array().unwrap();
    assert_eq!(orbits.len(), 2);
    let pi = std::f64::consts::PI;
    for (o, tau) in orbits.iter().zip([pi, 2.0 * pi]) {
        assert!((o["tau"].as_f64().unwrap() - tau).abs() < 1e-6 * tau);
        assert_eq!(o["symmetric"], true);
        assert!(o["indices"]["l0"].is_object());
    }
    assert_eq!(x["audit"]["status"], "BoundReached");

    let (code, r, _) = run(&["ellipsoid", "--radii", "1,1", "--tol", "samples=200"]);
    assert_eq!(code, 0);
    let x = &r["result"]["experiment"];
    assert!(x["audit"]["degenerate"].as_u64().unwrap() >= 1);
    assert!(x["warnings"].as_array().unwrap().iter().any(|w| w.as_str().unwrap().contains("degenerate")));

    assert_eq!(run(&["ellipsoid", "--radii", "1,-1"]).0, 1);
    assert_eq!(run(&["ellipsoid", "--radii", "1,0"]).0, 1);
    assert_eq!(run(&["ellipsoid"]).0, 1);
}

#[test]
fn hypersurface_documents_and_plots() {
    let dir = scratch("surface");
    let doc = write(&dir, "ell.json", &json!({"type": "ellipsoid", "radii": [1.0, 1.189207115002721, 1.3160740129524924]}));
    let plots = dir.join("plots");
    let out = bin()
        .args(["ellipsoid", doc.to_str().unwrap(), "--pretty", "--tol", "samples=200", "--tol", "k_max=3"])
        .args(["--plot", plots.to_str().unwrap(), "--out", dir.join("r.json").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("distinct 3 (bound 3)"), "{table}");
    for f in ["period_vs_radius.svg", "index_vs_iterate.svg"] {
        assert!(std::fs::read_to_string(plots.join(f)).unwrap().starts_with("<svg"));
    }
    let r: Value = serde_json::from_slice(&std::fs::read(dir.join("r.json")).unwrap()).unwrap();
    assert_eq!(r["result"]["hypersurface"]["type"], "ellipsoid");
    let bad = write(&dir, "bad.json", &json!({"type": "torus"}));
    assert_eq!(run(&["ellipsoid", bad.to_str().unwrap()]).0, 1);
}
