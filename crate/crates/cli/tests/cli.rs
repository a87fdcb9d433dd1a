use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn specs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs")
}

fn spec(name: &str) -> String {
    specs().join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loopshift"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn analyze_two_z() {
    let out = run(&["analyze", &spec("two-z.json"), "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["lambda"]["estimate"], 2.0);
    assert_eq!(v["lambda"]["exact"], true);
    assert_eq!(v["spr"], "Yes");
    assert_eq!(v["product_residual_zero"], true);
}

#[test]
fn analyze_golden_lucas_table() {
    let out = run(&["analyze", &spec("golden.json"), "--format", "json", "--degree", "10"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let fix: Vec<u64> = v["fix"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    assert_eq!(fix, [1, 3, 4, 7, 11, 18, 29, 47, 76, 123]);
    assert!((v["lambda"]["estimate"].as_f64().unwrap() - 1.618_033_988_749_895).abs() < 1e-9);
}

#[test]
fn malformed_spec_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{\"version\": 1,\n \"name\": }").unwrap();
    let out = run(&["analyze", p.to_str().unwrap()]);
    assert_eq!(code(&out), 4);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ParseError") && err.contains("line 2"), "{err}");
}

#[test]
fn missing_file_and_bad_usage() {
    assert_eq!(code(&run(&["analyze", "/nonexistent/spec.json"])), 3);
    assert_eq!(code(&run(&["analyze"])), 2);
    assert_eq!(code(&run(&["simulate", &spec("two-z.json"), "--mode", "sideways"])), 2);
    assert_eq!(code(&run(&["almost-iso", &spec("two-z.json"), &spec("geometric.json")])), 2);
}

#[test]
fn report_written_to_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("report.json");
    let out = run(&["analyze", &spec("two-z.json"), "--format", "json", "--output", p.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
    assert_eq!(v["name"], "two-z");
}

#[test]
fn almost_iso_bundle_and_rerun_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = run(&["almost-iso", &spec("two-z.json"), &spec("geometric.json"), "--output", d.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    assert_eq!(ta, tb);
    for f in ["manifest.json", "common.json", "magic.json", "verification.log", "config.json", "inputs/F.json"] {
        assert!(ta.contains_key(Path::new(f)), "{f}");
    }
    let log = String::from_utf8_lossy(&ta[Path::new("verification.log")]).into_owned();
    assert!(log.ends_with("result: PASS\n"), "{log}");
    assert!(!log.contains("FAIL"));

    let manifest: Value = serde_json::from_slice(&ta[Path::new("manifest.json")]).unwrap();
    let listed = manifest["files"].as_array().unwrap().len();
    assert_eq!(listed + 1, ta.len());
    let f_stages = manifest["stages"]["F"].as_u64().unwrap() as usize;
    assert_eq!(ta.keys().filter(|p| p.starts_with("stages/F")).count(), f_stages);

    // rerunning into the same directory leaves it unchanged
    let out = run(&["almost-iso", &spec("two-z.json"), &spec("geometric.json"), "--output", a.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(read_tree(&a), tb);
}

#[test]
fn almost_iso_period_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "almost-iso",
        &spec("two-z2.json"),
        &spec("geometric-even.json"),
        "--output",
        dir.path().to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["period"], 2);
    assert_eq!(v["pass"], true);
    let common: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("common.json")).unwrap()).unwrap();
    let coeffs = common["coeffs"].as_array().unwrap();
    assert!(coeffs.iter().step_by(2).all(|c| c == 0));
    assert!(coeffs.iter().any(|c| c != 0));
}

#[test]
fn almost_iso_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    assert_eq!(code(&run(&["almost-iso", &spec("two-z.json"), &spec("golden.json"), "--output", o])), 10);
    assert_eq!(code(&run(&["almost-iso", &spec("two-z.json"), &spec("two-z2.json"), "--output", o])), 11);
    let out = run(&["almost-iso", &spec("floor.json"), &spec("two-z.json"), "--output", o, "--format", "json"]);
    assert_eq!(code(&out), 12);
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "NotSpr");
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn simulate_return_times_geometric() {
    let out = run(&["simulate", &spec("geometric.json"), "--mode", "return-times", "--degree", "160", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let ratio = json(&out)["report"]["ratio"].as_f64().unwrap();
    assert!((ratio - 0.5).abs() < 0.05, "{ratio}");
}

#[test]
fn simulate_on_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    assert_eq!(code(&run(&["almost-iso", &spec("two-z.json"), &spec("geometric.json"), "--output", o])), 0);
    for side in ["f", "g"] {
        let out = run(&["simulate", o, "--mode", "injectivity", "--period", "8", "--side", side, "--format", "json"]);
        assert_eq!(code(&out), 0);
        let v = json(&out);
        assert_eq!(v["pass"], true);
        assert!(v["report"]["points_checked"].as_u64().unwrap() > 0);
    }
    let args = ["simulate", o, "--mode", "coding-times", "--samples", "500", "--seed", "9", "--format", "json"];
    let first = run(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, run(&args).stdout);
    assert_eq!(json(&first)["stats"]["samples"], 500);

    // any edit to a bundle file is caught by its checksum
    std::fs::write(dir.path().join("magic.json"), "{}\n").unwrap();
    let out = run(&["simulate", o, "--mode", "injectivity"]);
    assert_eq!(code(&out), 60);
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic.json"));
}

#[test]
fn coding_times_on_identity_spec() {
    let out = run(&["simulate", &spec("two-z.json"), "--mode", "coding-times", "--samples", "50", "--format", "json"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["stats"]["histogram"]["0"], 50);
}

#[test]
fn loops_lemma_command() {
    let out = run(&["loops-lemma", &spec("two-z.json"), "--r", "1:1", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["pass"], true);
    let f_inf: Vec<u64> = v["f_inf"].as_array().unwrap().iter().take(5).map(|x| x.as_u64().unwrap()).collect();
    assert_eq!(f_inf, [1, 1, 1, 1, 1]);
    assert_eq!(code(&run(&["loops-lemma", &spec("golden.json"), "--r", "1:2"])), 17);
    assert_eq!(code(&run(&["loops-lemma", &spec("two-z.json"), "--r", "1:1,3:1"])), 18);
    assert_eq!(code(&run(&["loops-lemma", &spec("two-z.json"), "--r", "one"])), 2);
}

#[test]
fn gapprep_command() {
    let out = run(&["gapprep", &spec("two-z.json"), &spec("geometric.json"), "--degree", "12", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["pass"], true);
    assert_eq!(v["f"], v["g"]);
    let out = run(&["gapprep", &spec("two-z.json"), &spec("geometric.json"), "--beta", "x/y"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn first_return_command() {
    let out = run(&["first-return", &spec("fibonacci-matrix.json"), "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let c: Vec<u64> = v["coeffs"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    assert_eq!(c, [1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
    assert_eq!(v["spec"]["coeffs"][1], 1);
    let out = run(&["first-return", "--matrix", "[[0,1],[2,0]]", "--degree", "4", "--format", "json"]);
    assert_eq!(json(&out)["coeffs"], serde_json::json!([0, 2, 0, 0]));
    assert_eq!(code(&run(&["first-return", "--matrix", "[[1,1],[0,1]]"])), 53);
    assert_eq!(code(&run(&["first-return", &spec("two-z.json")])), 4);
}
