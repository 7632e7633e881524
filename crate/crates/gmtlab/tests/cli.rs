//! End-to-end CLI checks: file formats, exit codes, determinism of the
//! report bytes across thread counts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gmtlab"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

#[test]
fn cover_and_frostman_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let set = write(
        dir.path(),
        "set.json",
        r#"{"dim":2,"level":3,"ambient":"unit","cells":[[0,0],[1,2],[7,7]]}"#,
    );
    let out = run(&["cover", "--set", set.to_str().unwrap(), "--delta-exp", "1"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "2");

    let out = run(&[
        "frostman",
        "--set",
        set.to_str().unwrap(),
        "--s",
        "1/2",
        "--regular",
        "--katz-tao",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["frostman"]["C_approx"].as_f64().unwrap() > 0.0);
    assert!(v["regularity"]["C_combined_approx"].as_f64().unwrap() > 0.0);
}

#[test]
fn precondition_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let set = write(
        dir.path(),
        "set.json",
        r#"{"dim":2,"level":3,"ambient":"unit","cells":[[0,0]]}"#,
    );
    // scale finer than representation
    let out = run(&["cover", "--set", set.to_str().unwrap(), "--delta-exp", "9"]);
    assert_eq!(out.status.code(), Some(2));

    // duplicate cells rejected by the loader
    let dup = write(
        dir.path(),
        "dup.json",
        r#"{"dim":2,"level":3,"ambient":"unit","cells":[[0,0],[0,0]]}"#,
    );
    let out = run(&["cover", "--set", dup.to_str().unwrap(), "--delta-exp", "1"]);
    assert_eq!(out.status.code(), Some(2));

    // uniformize with a step below the exhaustive threshold
    let out = run(&[
        "uniformize",
        "--set",
        set.to_str().unwrap(),
        "--step",
        "1",
        "--epsilon",
        "1/2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bounds_queries() {
    let out = run(&[
        "bounds",
        "--query",
        "furstenberg-conjecture",
        "--s",
        "1/2",
        "--t",
        "1",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["value_num"], "5");
    assert_eq!(v["value_den"], "4");

    let out = run(&["bounds", "--query", "polygon-k", "--s", "1/2", "--t", "1"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["minimum"], "2/3");

    // parameter out of range -> exit 2
    let out = run(&["bounds", "--query", "sumproduct", "--s", "3/4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn decompose_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    // two-slope function on [0, 2]
    let f = write(
        dir.path(),
        "f.json",
        r#"[[[0,1],[0,1]], [[1,1],[2,1]], [[2,1],[2,1]]]"#,
    );
    let out = run(&[
        "decompose",
        "--function",
        f.to_str().unwrap(),
        "--mode",
        "linear",
        "--epsilon",
        "1/100",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pieces"].as_array().unwrap().len(), 2);

    let out = run(&[
        "decompose",
        "--function",
        f.to_str().unwrap(),
        "--mode",
        "kaufman",
        "--epsilon",
        "1/10",
        "--s",
        "1/2",
        "--t",
        "1",
    ]);
    assert!(out.status.success());
}

#[test]
fn construct_and_experiment_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cspec = write(
        dir.path(),
        "cantor.json",
        r#"{"dim":1,"step":2,"branching":[2,2,2],"seed":7,"ambient":"unit12"}"#,
    );
    let set_out = dir.path().join("set.json");
    let out = run(&[
        "construct",
        "--kind",
        "cantor",
        "--spec",
        cspec.to_str().unwrap(),
        "--out",
        set_out.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let first = fs::read(&set_out).unwrap();
    run(&[
        "construct",
        "--kind",
        "cantor",
        "--spec",
        cspec.to_str().unwrap(),
        "--out",
        set_out.to_str().unwrap(),
    ]);
    assert_eq!(
        first,
        fs::read(&set_out).unwrap(),
        "seeded generator must be bit-identical"
    );

    let espec = write(
        dir.path(),
        "abc.json",
        r#"{
            "seed": 5,
            "delta_exps": [6, 8],
            "a": {"type": "cantor", "step": 2, "keep": 2},
            "b": {"type": "cantor", "step": 2, "keep": 2},
            "c": {"type": "ap", "s": "1/2"}
        }"#,
    );
    let rep1 = dir.path().join("r1.json");
    let rep2 = dir.path().join("r2.json");
    let csv = dir.path().join("r1.csv");
    let out = run(&[
        "experiment",
        "abc",
        "--spec",
        espec.to_str().unwrap(),
        "--out",
        rep1.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = run(&[
        "experiment",
        "abc",
        "--spec",
        espec.to_str().unwrap(),
        "--out",
        rep2.to_str().unwrap(),
        "--threads",
        "4",
    ]);
    assert!(out.status.success());
    assert_eq!(
        fs::read(&rep1).unwrap(),
        fs::read(&rep2).unwrap(),
        "reports must be byte-identical across thread counts"
    );
    let csv_text = fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("delta_exp,"));

    // furstenberg experiment with a sharpness config
    let fspec = write(
        dir.path(),
        "fur.json",
        r#"{
            "seed": 0,
            "delta_exps": [8, 10],
            "config": {"type": "sharpness", "s": "1/2", "t": "1", "u": "1/2"}
        }"#,
    );
    let frep = dir.path().join("fur_report.json");
    let out = run(&[
        "experiment",
        "furstenberg",
        "--spec",
        fspec.to_str().unwrap(),
        "--out",
        frep.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&frep).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn sharpness_construct_emits_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "sharp.json",
        r#"{"delta_exp": 8, "s": "1/2", "t": "1", "u": "1/2"}"#,
    );
    let out_path = dir.path().join("sharp_out.json");
    let out = run(&[
        "construct",
        "--kind",
        "sharpness",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["ledger"]["big_delta_exp"], 4);
    assert_eq!(v["ledger"]["p0_log2"], 8);

    // infeasible realization (delta too coarse for the requested u) -> exit 2
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"delta_exp": 1, "s": "1/2", "t": "1", "u": "1"}"#,
    );
    let out = run(&[
        "construct",
        "--kind",
        "sharpness",
        "--spec",
        bad.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
