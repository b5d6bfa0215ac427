use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dbnverify"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

const ONE_D: &str =
    r#"{"n": 1, "phi": [[0.8]], "sigma": [0.2], "safe_lo": [-1], "safe_hi": [1], "horizon": 10, "epsilon": 0.5}"#;

const CHAIN3: &str = r#"{"n": 3, "phi": {"triplets": [[0,0,1],[1,0,1],[1,1,1],[2,1,1],[2,2,1]]},
 "sigma": [0.2, 0.2, 0.2], "safe_lo": [-1, -1, -1], "safe_hi": [1, 1, 1], "horizon": 5, "bins_per_dim": [5, 5, 5]}"#;

#[test]
fn abstract_then_check_matches_single_shot() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", ONE_D);
    let dump = dir.path().join("m.dbna");
    let a = run(&["abstract", "--model", s(&model), "--out", s(&dump)]);
    let sidecar = json(&a);
    assert_eq!(sidecar["config"]["bins_per_dim"][0], 388);
    assert!(sidecar["bounds"]["total"].as_f64().unwrap() <= 0.5);
    assert!(dir.path().join("m.dbna.json").exists());

    let v1 = dir.path().join("a.dbnv");
    let v2 = dir.path().join("b.dbnv");
    let from_dump = json(&run(&[
        "check",
        "--model",
        s(&model),
        "--dump",
        s(&dump),
        "--init",
        "0.3",
        "--out",
        s(&v1),
    ]));
    let single = json(&run(&["check", "--model", s(&model), "--init", "0.3", "--out", s(&v2)]));
    let p1 = from_dump["probability"].as_f64().unwrap();
    let p2 = single["probability"].as_f64().unwrap();
    assert_eq!(p1.to_bits(), p2.to_bits());
    assert_eq!(fs::read(&v1).unwrap(), fs::read(&v2).unwrap());
    assert_eq!(&fs::read(&v1).unwrap()[..4], b"DBNV");
}

#[test]
fn golden_case_within_bound() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", &ONE_D.replace("0.5}", "0.1}"));
    let r = json(&run(&["check", "--model", s(&model), "--init", "0"]));
    let p = r["probability"].as_f64().unwrap();
    let bound = r["bounds"]["total"].as_f64().unwrap();
    assert!((p - 0.989212076985376).abs() <= bound);
    assert!((p - 0.989212076985376).abs() < 1e-3);
    for key in ["config", "bounds", "costs", "timing"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn zero_horizon_is_certain() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", &ONE_D.replace("\"horizon\": 10", "\"horizon\": 0"));
    let r = json(&run(&["check", "--model", s(&model), "--init", "-0.99"]));
    assert_eq!(r["probability"].as_f64(), Some(1.0));
    assert_eq!(r["bounds"]["total"].as_f64(), Some(0.0));
}

#[test]
fn dense_flag_matches_default_path() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "c.json", CHAIN3);
    let a = dir.path().join("a.dbnv");
    let b = dir.path().join("b.dbnv");
    let sp = json(&run(&["check", "--model", s(&model), "--out", s(&a)]));
    let de = json(&run(&["check", "--model", s(&model), "--dense", "--out", s(&b)]));
    assert_eq!(sp["config"]["method"], "sum-product");
    assert_eq!(de["config"]["method"], "dense");
    let read = |p: &Path| -> Vec<f64> {
        let bytes = fs::read(p).unwrap();
        bytes[12 + 3 * 8..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    let (x, y) = (read(&a), read(&b));
    assert_eq!(x.len(), 125);
    assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() <= 1e-12));
}

#[test]
fn trivial_model_dumps() {
    let dir = TempDir::new().unwrap();
    let model = write(
        &dir,
        "t.json",
        r#"{"n":1,"phi":[[0]],"sigma":[1],"safe_lo":[-1],"safe_hi":[1],"horizon":2,"bins_per_dim":[1]}"#,
    );
    let dump = dir.path().join("t.dbna");
    let r = json(&run(&["abstract", "--model", s(&model), "--out", s(&dump)]));
    assert_eq!(r["costs"]["marginals"], 1);
    // magic, version, n, one count, two edges, empty parent list, two table entries
    assert_eq!(fs::read(&dump).unwrap().len(), 4 + 4 + 4 + 8 + 16 + 4 + 16);
}

#[test]
fn malformed_model_exits_2_without_output() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "bad.json", &ONE_D.replace("\"sigma\"", "\"sigmas\""));
    let dump = dir.path().join("bad.dbna");
    let out = run(&["abstract", "--model", s(&model), "--out", s(&dump)]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("unknown field") && msg.contains("line 1"), "{msg}");
    assert!(!dump.exists());
    assert!(!dir.path().join("bad.dbna.json").exists());

    let missing = run(&["check", "--model", s(&dir.path().join("absent.json"))]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn init_outside_safe_set_exits_2() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", ONE_D);
    assert_eq!(
        run(&["check", "--model", s(&model), "--init", "1.5"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["check", "--model", s(&model), "--init", "0,0"]).status.code(),
        Some(2)
    );
}

#[test]
fn caps_exit_3() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "c.json", CHAIN3);
    let out = run(&["check", "--model", s(&model), "--dense", "--max-dense-entries", "1000"]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["check", "--model", s(&model), "--max-intermediate-entries", "10"]);
    assert_eq!(out.status.code(), Some(3));

    // the budget-sized bidiagonal pair needs 3630^3 entries for its second table
    let pair = write(
        &dir,
        "p.json",
        r#"{"n":2,"phi":[[1,0],[1,1]],"sigma":[0.2,0.2],"safe_lo":[-1,-1],"safe_hi":[1,1],"horizon":10,"epsilon":0.2}"#,
    );
    let dump = dir.path().join("p.dbna");
    let out = run(&["abstract", "--model", s(&pair), "--out", s(&dump)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!dump.exists());
    let cost = run(&["cost", "--model", s(&pair)]);
    assert!(cost.status.success());
    let text = String::from_utf8_lossy(&cost.stdout);
    assert!(text.contains("[3630, 3630]"), "{text}");
    assert!(text.contains("cluster {T2}"), "{text}");
}

#[test]
fn compare_is_deterministic_and_matches_table() {
    let dir = TempDir::new().unwrap();
    let j1 = dir.path().join("a.json");
    let j2 = dir.path().join("b.json");
    let args = |p: &Path| {
        run(&[
            "compare",
            "--family",
            "bidiagonal",
            "--n",
            "1..8",
            "--alpha",
            "1",
            "--sigma",
            "0.2",
            "--N",
            "10",
            "--epsilon",
            "0.2",
            "--out",
            s(p),
        ])
    };
    let a = args(&j1);
    let b = args(&j2);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(fs::read(&j1).unwrap(), fs::read(&j2).unwrap());
    let text = String::from_utf8_lossy(&a.stdout);
    let dbn_bins = text.lines().find(|l| l.starts_with("DBN   # bins/dim")).unwrap();
    assert!(dbn_bins.contains("8.5e3") && dbn_bins.contains("1.8e4"), "{text}");
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&j1).unwrap()).unwrap();
    assert_eq!(report["rows"][3]["dbn"]["bins_per_dim"], 8469.0);
    assert_eq!(report["rows"][0]["dbn"], report["rows"][0]["aklp"]);
}

#[test]
fn monte_carlo_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", ONE_D);
    let go = |seed: &str| {
        run(&[
            "mc",
            "--model",
            s(&model),
            "--samples",
            "20000",
            "--seed",
            seed,
            "--init",
            "0",
        ])
    };
    let a = go("7");
    let b = go("7");
    let c = go("8");
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let r = json(&a);
    assert!((r["estimate"]["estimate"].as_f64().unwrap() - 0.9892).abs() < 0.01);
}

#[test]
fn monte_carlo_corner_cases() {
    let dir = TempDir::new().unwrap();
    let zero = write(&dir, "z.json", &ONE_D.replace("\"horizon\": 10", "\"horizon\": 0"));
    let r = json(&run(&["mc", "--model", s(&zero), "--samples", "100"]));
    assert_eq!(r["estimate"]["estimate"].as_f64(), Some(1.0));
    let model = write(&dir, "m.json", ONE_D);
    assert_eq!(run(&["mc", "--model", s(&model), "--init", "2"]).status.code(), Some(2));
    assert_eq!(
        run(&["mc", "--model", s(&model), "--samples", "0"]).status.code(),
        Some(2)
    );
}
