//! Shipped datasets against their manifests, which are produced by an
//! independent script (`scripts/census_oracle.py`).

use std::path::PathBuf;

use kslat::contexts::context_census;
use kslat::presheaf::{build_spectral_presheaf, global_section_search};
use kslat::rays::{load_ray_configuration, LoadOptions, RayConfiguration};
use kslat::scalar::{Exact, C64};
use kslat::search::{
    export_cnf, search_two_valued_measure, solver_by_name, verify_certificate, Certificate, ColoringModel, MostConstrained,
    SearchOptions, Verdict,
};
use serde_json::Value;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn datasets() -> Vec<(String, Value)> {
    let mut out: Vec<(String, Value)> = std::fs::read_dir(data_dir())
        .unwrap()
        .filter_map(|e| {
            let path = e.unwrap().path();
            let name = path.file_name()?.to_str()?.strip_suffix(".manifest.json")?.to_string();
            let manifest = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
            Some((name, manifest))
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    assert_eq!(out.len(), 4);
    out
}

fn load(name: &str) -> RayConfiguration<Exact> {
    let text = std::fs::read_to_string(data_dir().join(format!("{name}.rays"))).unwrap();
    load_ray_configuration(&text, &LoadOptions::default()).unwrap()
}

fn index_lists(v: &Value) -> Vec<Vec<usize>> {
    serde_json::from_value(v.clone()).unwrap()
}

#[test]
fn census_matches_manifest() {
    for (name, m) in datasets() {
        let cfg = load(&name);
        assert_eq!(cfg.dim() as u64, m["dim"].as_u64().unwrap(), "{name}");
        assert_eq!(cfg.len() as u64, m["ray_count"].as_u64().unwrap(), "{name}");
        assert_eq!(cfg.orthogonal_pairs() as u64, m["orthogonal_pairs"].as_u64().unwrap(), "{name}");
        let census = context_census(&cfg);
        assert_eq!(census.complete, index_lists(&m["complete_contexts"]), "{name}");
        assert_eq!(census.maximal_incomplete, index_lists(&m["maximal_incomplete_contexts"]), "{name}");
        let cnf = export_cnf(&ColoringModel::new(&cfg));
        assert_eq!(cnf.variables as u64, m["cnf_variables"].as_u64().unwrap(), "{name}");
        assert_eq!(cnf.clauses.len() as u64, m["cnf_clauses"].as_u64().unwrap(), "{name}");
    }
}

#[test]
fn verdicts_match_manifest_and_certificates_replay() {
    for (name, m) in datasets() {
        let cfg = load(&name);
        let out = search_two_valued_measure(&cfg, &SearchOptions::default()).unwrap();
        assert_eq!(out.verdict.to_string(), m["expected_verdict"].as_str().unwrap(), "{name}");
        let cert = Certificate::from_json(&Certificate::from_outcome(&cfg, &out).to_json()).unwrap();
        let report = verify_certificate(&cert, &cfg).unwrap();
        assert!(report.valid, "{name}: {}", report.detail);
    }
}

#[test]
fn witness_counts_match_exhaustive_oracle() {
    let opts = SearchOptions { enumerate_all: true, ..Default::default() };
    for (name, m) in datasets() {
        let cfg = load(&name);
        let model = ColoringModel::new(&cfg);
        let backtrack = solver_by_name("backtrack").unwrap().solve(&model, &MostConstrained, &opts).unwrap();
        if let Some(expected) = m.get("witness_count").and_then(Value::as_u64) {
            assert_eq!(backtrack.witness_count, expected, "{name}");
        }
        if cfg.len() <= 20 {
            let brute = solver_by_name("exhaustive").unwrap().solve(&model, &MostConstrained, &opts).unwrap();
            assert_eq!(brute.verdict, backtrack.verdict, "{name}");
            assert_eq!(brute.witness_count, backtrack.witness_count, "{name}");
            let mut a = brute.witnesses.clone();
            let mut b = backtrack.witnesses.clone();
            a.sort();
            b.sort();
            assert_eq!(a, b, "{name}");
        }
    }
}

#[test]
fn float_mode_agrees_with_exact_mode() {
    for (name, m) in datasets() {
        let text = std::fs::read_to_string(data_dir().join(format!("{name}.rays"))).unwrap();
        let doc = kslat::rayset::RaySetDocument::parse(&text).unwrap();
        // evaluate the surds in double precision and reload as a float document
        let vectors = doc.rays.iter().map(|r| r.components.iter().map(|c| C64::new(c.to_f64(), 0.0)).collect()).collect();
        let labels = doc.rays.iter().map(|r| r.label.clone()).collect();
        let cfg: RayConfiguration<C64> = RayConfiguration::from_vectors(doc.dim, vectors, labels, &LoadOptions::default()).unwrap();
        assert_eq!(context_census(&cfg).complete, index_lists(&m["complete_contexts"]), "{name}");
        let out = search_two_valued_measure(&cfg, &SearchOptions::default()).unwrap();
        assert_eq!(out.verdict.to_string(), m["expected_verdict"].as_str().unwrap(), "{name}");
        if out.verdict == Verdict::Unsat {
            let exact = search_two_valued_measure(&load(&name), &SearchOptions::default()).unwrap();
            assert_eq!(out.stats.nodes, exact.stats.nodes, "{name}");
        }
    }
}

#[test]
fn presheaf_census_and_section_verdicts() {
    for (name, m) in datasets() {
        let cfg = load(&name);
        let bundle = build_spectral_presheaf(&cfg).unwrap();
        assert_eq!(bundle.nodes().len() as u64, m["presheaf_nodes"].as_u64().unwrap(), "{name}");
        assert_eq!(bundle.order_pairs() as u64, m["presheaf_order_pairs"].as_u64().unwrap(), "{name}");
        assert_eq!(bundle.cover_edges() as u64, m["presheaf_cover_edges"].as_u64().unwrap(), "{name}");
        let out = global_section_search(&bundle, &SearchOptions { enumerate_all: true, ..Default::default() });
        assert_eq!(out.verdict.to_string(), m["expected_verdict"].as_str().unwrap(), "{name}");
        if let Some(expected) = m.get("witness_count").and_then(Value::as_u64) {
            assert_eq!(out.section_count, expected, "{name}");
        }
    }
}

#[test]
fn oracle_regenerates_shipped_data() {
    let script = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scripts/census_oracle.py");
    let out = std::process::Command::new("python3").arg(&script).arg("--check").output().expect("python3 runs the census oracle");
    assert!(out.status.success(), "{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
}
