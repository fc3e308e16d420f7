use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn kslat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kslat")).args(args).output().expect("binary runs")
}

fn kslat_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kslat")).args(args).env("KSLAT_THREADS", threads).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn verdict<'a>(r: &'a Value, operation: &str) -> &'a str {
    r["verdicts"].as_array().unwrap().iter().find(|v| v["operation"] == operation).unwrap_or_else(|| panic!("no {operation}"))["verdict"]
        .as_str()
        .unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ks_exit_codes() {
    let basis = kslat(&["ks", path_str(&data("basis3.rays"))]);
    assert_eq!(basis.status.code(), Some(0));
    assert_eq!(report(&basis)["statistics"]["witness_true_rays"].as_array().unwrap().len(), 1);
    let peres = kslat(&["ks", path_str(&data("peres33.rays")), "--exact"]);
    assert_eq!(peres.status.code(), Some(1));
    let r = report(&peres);
    assert_eq!(verdict(&r, "search_two_valued_measure"), "UNSAT");
    assert_eq!(verdict(&r, "presheaf_cross_check"), "AGREE");
    assert_eq!(verdict(&r, "verify_section_certificate"), "VALID");
    assert_eq!(kslat(&["ks", path_str(&data("dim2_pairs.rays"))]).status.code(), Some(0));
    assert_eq!(kslat(&["ks", path_str(&data("peres33.rays")), "--budget", "1"]).status.code(), Some(2));
    assert_eq!(kslat(&["ks", "no/such/file.rays"]).status.code(), Some(3));
    assert_eq!(kslat(&["ks", path_str(&data("basis3.rays")), "--solver", "magic"]).status.code(), Some(3));
    assert_eq!(kslat(&["ks", path_str(&data("basis3.manifest.json"))]).status.code(), Some(3));
}

#[test]
fn ks_float_mode_and_strategies() {
    let out = kslat(&["ks", path_str(&data("cabello18.rays")), "--float", "--heuristic", "max-degree"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["statistics"]["mode"], "float");
    let out = kslat(&["ks", path_str(&data("cabello18.rays")), "--solver", "exhaustive", "--no-presheaf"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(verdict(&report(&out), "verify_certificate"), "UNVERIFIED");
    let out = kslat(&["ks", path_str(&data("dim2_pairs.rays")), "--solver", "exhaustive", "--enumerate-all"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["statistics"]["witness_count"], 32);
    assert_eq!(r["statistics"]["section_count"], 32);
    assert!(verdict(&r, "global_section_search").contains("SAT"));
}

#[test]
fn certificates_round_trip_through_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("peres");
    let config = data("peres33.rays");
    let run = kslat(&["ks", path_str(&config), "--out-dir", path_str(&out_dir)]);
    assert_eq!(run.status.code(), Some(1));
    for name in ["certificate.json", "section-certificate.json"] {
        let v = kslat(&["verify", path_str(&out_dir.join(name)), "--config", path_str(&config)]);
        assert_eq!(v.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&v.stdout));
    }
    // a certificate checked against the wrong configuration is an error
    let wrong = kslat(&["verify", path_str(&out_dir.join("certificate.json")), "--config", path_str(&data("cabello18.rays"))]);
    assert_eq!(wrong.status.code(), Some(3));
    let path = out_dir.join("certificate.json");
    let original: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let tamper = |edit: &dyn Fn(&mut Value)| {
        let mut cert = original.clone();
        edit(&mut cert);
        std::fs::write(&path, serde_json::to_string(&cert).unwrap()).unwrap();
        kslat(&["verify", path_str(&path), "--config", path_str(&config)]).status.code()
    };
    // a well-formed trace that stops at an open leaf proves nothing
    let open_leaf = |c: &mut Value| c["trace"] = serde_json::json!([{ "leaf": { "context": 0 } }]);
    assert_eq!(tamper(&open_leaf), Some(1));
    // a truncated trace is malformed
    let truncated = |c: &mut Value| {
        c["trace"].as_array_mut().unwrap().pop();
    };
    assert_eq!(tamper(&truncated), Some(3));
    std::fs::write(&path, "{\"format\": 7}").unwrap();
    assert_eq!(kslat(&["verify", path_str(&path), "--config", path_str(&config)]).status.code(), Some(3));
}

#[test]
fn exact_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = kslat(&["ks", path_str(&data("cabello18.rays")), "--out-dir", path_str(&out)]);
        assert_eq!(o.status.code(), Some(1));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for name in ["certificate.json", "section-certificate.json", "bundle.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let strip = |p: &Path| std::fs::read_to_string(p.join("report.json")).unwrap().replace(path_str(p), "<out>");
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn cnf_export() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = dir.path().join("peres.cnf");
    kslat(&["ks", path_str(&data("peres33.rays")), "--export-cnf", path_str(&cnf), "--no-presheaf"]);
    let text = std::fs::read_to_string(&cnf).unwrap();
    assert!(text.lines().any(|l| l == "p cnf 33 88"));
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("peres.cnf.map.json")).unwrap()).unwrap();
    assert_eq!(sidecar["variables"].as_array().unwrap().len(), 33);
}

#[test]
fn algebra_examples() {
    let dir = tempfile::tempdir().unwrap();
    let out = kslat(&["algebra", "1,3", "--out-dir", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(verdict(&r, "decompose_center"), "EXISTS-ABELIAN");
    assert_eq!(r["statistics"]["valuation"]["block"], 1);
    assert_eq!(r["statistics"]["valuation"]["central_values"], serde_json::json!(["1", "0"]));
    let v = kslat(&["verify", path_str(&dir.path().join("no-go-M3.json"))]);
    assert_eq!(v.status.code(), Some(0));
    assert_eq!(verdict(&report(&kslat(&["algebra", "3,4"])), "decompose_center"), "NONE");
    assert_eq!(verdict(&report(&kslat(&["algebra", "2"])), "decompose_center"), "EXISTS-I2-FINITE");
    assert_eq!(kslat(&["algebra", "1,x"]).status.code(), Some(3));
    assert_eq!(kslat(&["algebra", ""]).status.code(), Some(3));
}

#[test]
fn gleason_examples() {
    let basis = data("basis3.rays");
    let out = kslat(&["gleason", path_str(&basis), "--rho", "I/3"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(verdict(&r, "gleason_measure"), "PASS");
    let witness = &r["verdicts"].as_array().unwrap().iter().find(|v| v["operation"] == "fractional_witness").unwrap()["detail"];
    assert!(witness.as_str().unwrap().starts_with("value 1/3"), "{witness}");
    let out = kslat(&["gleason", path_str(&basis), "--rho", "e1"]);
    assert_eq!(verdict(&report(&out), "point_measure_classify"), "ALL-POINT");
    let out = kslat(&["gleason", path_str(&data("peres33.rays")), "--random", "100", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["statistics"]["m1_violations"], 0);
    assert_eq!(r["statistics"]["m2_violations"], 0);
    assert_eq!(r["statistics"]["samples"], 100);
    assert_eq!(kslat(&["gleason", path_str(&basis), "--rho", "diag:1,2"]).status.code(), Some(3));
    assert_eq!(kslat(&["gleason", path_str(&basis), "--rho", "nonsense"]).status.code(), Some(3));
    assert_eq!(kslat(&["gleason", path_str(&basis)]).status.code(), Some(3));
}

#[test]
fn random_runs_do_not_depend_on_thread_count() {
    let config = data("cabello18.rays");
    let args = ["gleason", path_str(&config), "--random", "40", "--seed", "3"];
    let one = kslat_env(&args, "1");
    let four = kslat_env(&args, "4");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(kslat_env(&args, "many").status.code(), Some(3));
}
