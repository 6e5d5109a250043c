//! End-to-end checks of the binary: exit codes, report round-trips and
//! byte-determinism with `--no-timing`.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bldgraph"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bldgraph-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn emit_fixtures(dir: &Path) {
    let out = bin().args(["fixtures", "--out-dir", dir.to_str().unwrap()]).output().unwrap();
    assert!(out.status.success(), "fixtures: {}", String::from_utf8_lossy(&out.stderr));
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

#[test]
fn check_exit_codes() {
    let dir = workdir("check");
    emit_fixtures(&dir);
    let w2 = dir.join("w2.gm.json");
    let out = run(&["check", "--map", w2.to_str().unwrap(), "--property", "bld", "--L", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let fold = dir.join("fold.gm.json");
    let out = run(&["check", "--map", fold.to_str().unwrap(), "--property", "lq", "--L", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("\"witness\""), "failing checks must carry a witness");

    let cst = dir.join("const.gm.json");
    let out = run(&["check", "--map", cst.to_str().unwrap(), "--property", "coradial", "--L", "1"]);
    assert_eq!(out.status.code(), Some(2), "topology preconditions exit with 2");

    let out = run(&["check", "--map", dir.join("nope.gm.json").to_str().unwrap(), "--property", "bld", "--L", "1"]);
    assert_eq!(out.status.code(), Some(64), "parse failures exit with 64");
}

#[test]
fn characterize_prints_four_constants() {
    let dir = workdir("characterize");
    emit_fixtures(&dir);
    let out = run(&["characterize", "--map", dir.join("speed2.gm.json").to_str().unwrap(), "--no-timing"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["bld", "lq", "radial", "coradial"] {
        assert_eq!(v[key], "2", "{key} constant");
    }
    assert_eq!(v["equivalence"], true);
}

#[test]
fn reports_are_byte_identical_without_timing() {
    let dir = workdir("determinism");
    emit_fixtures(&dir);
    let w3 = dir.join("w3.gm.json");
    let args = ["check", "--map", w3.to_str().unwrap(), "--property", "lq", "--L", "1", "--no-timing"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.status.code(), Some(0));
}

#[test]
fn lift_round_trips_through_files() {
    let dir = workdir("lift");
    emit_fixtures(&dir);
    std::fs::write(
        dir.join("loop.walk.json"),
        serde_json::json!({
            "start": {"vertex": "v0"},
            "segments": [
                {"edge": "e0", "from": "0", "to": "1"},
                {"edge": "e1", "from": "0", "to": "1"},
                {"edge": "e2", "from": "0", "to": "1"}
            ]
        })
        .to_string(),
    )
    .unwrap();
    let out_path = dir.join("lifted.walk.json");
    let out = run(&[
        "lift",
        "--map",
        dir.join("w2.gm.json").to_str().unwrap(),
        "--walk",
        dir.join("loop.walk.json").to_str().unwrap(),
        "--start",
        "v0",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["segments"].as_array().unwrap().len(), 3, "half of C_6 in merged segments");
}

#[test]
fn transport_rejects_branch_image() {
    let dir = workdir("transport");
    emit_fixtures(&dir);
    let tent = dir.join("tent.gm.json");
    let ok = run(&[
        "transport", "--map", tent.to_str().unwrap(),
        "--x", r#"{"edge":"e0","offset":"1/4"}"#,
        "--y", r#"{"edge":"e0","offset":"3/4"}"#,
        "--L", "1",
    ]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let bad = run(&["transport", "--map", tent.to_str().unwrap(), "--x", "v1", "--y", r#"{"edge":"e0","offset":"1/2"}"#, "--L", "1"]);
    assert_eq!(bad.status.code(), Some(2), "branch image endpoints exit with 2");
}

#[test]
fn winding_demo_and_converge_round_trip() {
    let dir = workdir("demo");
    let demo_dir = dir.join("cert");
    let out = run(&[
        "winding-demo", "--k-max", "3", "--m", "4",
        "--out-dir", demo_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cert = demo_dir.join("winding.cert.json");
    let out = run(&[
        "converge", "--cert", cert.to_str().unwrap(),
        "--lq-limit", "1", "--bld-limit", "1", "--no-timing",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["lq_limit"]["limit_pass"], true);
    assert_eq!(v["bld_limit"]["limit_discrete"], false);

    // corrupt the eps table: the certificate must now fail
    let text = std::fs::read_to_string(&cert).unwrap();
    let mut j: serde_json::Value = serde_json::from_str(&text).unwrap();
    j["stages"][0]["eps"][0] = serde_json::json!("50");
    std::fs::write(&cert, j.to_string()).unwrap();
    let out = run(&["converge", "--cert", cert.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "corrupted certificates exit with 1");
}

#[test]
fn qi_search_and_check() {
    let dir = workdir("qi");
    emit_fixtures(&dir);
    // give the W_2 target a basepoint and search it against itself
    let text = std::fs::read_to_string(dir.join("w2.target.mg.json")).unwrap();
    let mut j: serde_json::Value = serde_json::from_str(&text).unwrap();
    j["basepoint"] = serde_json::json!({"vertex": "v0"});
    let pointed = dir.join("c3p.mg.json");
    std::fs::write(&pointed, j.to_string()).unwrap();
    let witness_path = dir.join("found.qi.json");
    let out = run(&[
        "qi-search",
        "--source", pointed.to_str().unwrap(),
        "--target", pointed.to_str().unwrap(),
        "--epsilon", "1/2", "--delta", "1/8",
        "--out", witness_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&[
        "qi-check",
        "--source", pointed.to_str().unwrap(),
        "--target", pointed.to_str().unwrap(),
        "--witness", witness_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);
}

#[test]
fn min_constant_with_oracle_cross_check() {
    let dir = workdir("oracle");
    emit_fixtures(&dir);
    let out = run(&[
        "min-constant",
        "--map", dir.join("speed2.gm.json").to_str().unwrap(),
        "--property", "lq",
        "--oracle", "--no-timing",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["constant_minimal"], "2");
}
