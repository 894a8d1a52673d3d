//! Every problem/solver pairing through the library entry points.

use spingarn_cli::config::ExperimentConfig;
use spingarn_cli::experiment::build_trace;
use spingarn_cli::{CliError, RunReport, Trace};

fn run(json: &str) -> (Trace, RunReport) {
    let cfg = ExperimentConfig::parse(json).unwrap();
    cfg.validate().unwrap();
    let t = build_trace(&cfg).unwrap();
    let r = RunReport::from_trace(&t);
    (t, r)
}

fn assert_certified_pass(json: &str) -> Trace {
    let (t, r) = run(json);
    assert!(r.passed(), "{}", r.render());
    let cert = t.get_meta("certificate").unwrap();
    assert!(!cert.starts_with("none"), "{json}: {cert}");
    assert!(cert.contains("membership verified"), "{cert}");
    assert!(r.outcomes.iter().any(|o| o.name.starts_with("pointwise") && o.value.is_some()), "bounds missing");
    t
}

#[test]
fn hpe_on_affine_problems() {
    assert_certified_pass(r#"{"version":1,"problem":{"kind":"affine","n":6,"seed":3},"solver":"hpe","params":{"k_max":5000}}"#);
    assert_certified_pass(
        r#"{"version":1,"problem":{"kind":"affine","n":6,"seed":3},"solver":"hpe",
            "params":{"sigma":0.6,"inexact":{"fraction":0.8,"seed":5},"lambda":{"cyclic":[0.5,2.0,1.0]},"k_max":5000,"start":{"random":{"seed":1,"scale":3.0}}}}"#,
    );
}

#[test]
fn inline_and_sidecar_affine_operators() {
    let data = r#"{"matrix":[[2.0,1.0],[-1.0,1.0]],"b":[-3.0,0.0],"solution":[1.0,1.0]}"#;
    let inline = format!(r#"{{"version":1,"problem":{{"kind":"affine_inline",{}}},"solver":"hpe","params":{{"rho":1e-8,"eps":1e-8}}}}"#, &data[1..data.len() - 1]);
    let t = assert_certified_pass(&inline);
    assert_eq!(t.get_meta("d0"), Some("1.4142135623730951e0"));

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("op.json"), data).unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, r#"{"version":1,"problem":{"kind":"affine_file","path":"op.json"},"solver":"hpe"}"#).unwrap();
    let cfg = ExperimentConfig::load(&cfg_path).unwrap();
    assert!(RunReport::from_trace(&build_trace(&cfg).unwrap()).passed());

    let wrong = inline.replace("[1.0,1.0]", "[1.0,2.0]");
    let cfg = ExperimentConfig::parse(&wrong).unwrap();
    match build_trace(&cfg) {
        Err(CliError::Config { field, .. }) => assert_eq!(field, "problem.solution"),
        other => panic!("expected a config error, got {other:?}"),
    }
    let nonmonotone = inline.replace("[2.0,1.0],[-1.0,1.0]", "[-2.0,0.0],[0.0,1.0]");
    let cfg = ExperimentConfig::parse(&nonmonotone).unwrap();
    assert!(matches!(build_trace(&cfg), Err(CliError::Config { .. })));
}

#[test]
fn partial_inverse_schemes() {
    for solver in ["spin", "spin2"] {
        assert_certified_pass(&format!(
            r#"{{"version":1,"problem":{{"kind":"partial_inverse","n":8,"p":3,"seed":2}},"solver":"{solver}",
                "params":{{"sigma":0.5,"inexact":{{"fraction":0.5,"seed":9}},"k_max":20000}}}}"#
        ));
    }
}

#[test]
fn exact_spingarn_respects_its_budget() {
    let t = assert_certified_pass(
        r#"{"version":1,"problem":{"kind":"line_intersection","a":[1.0,2.0],"b":3.0,"w":[1.0,0.0]},"solver":"spin",
            "params":{"rho":1e-3,"eps":1e-3,"k_max":100000,"start":{"point":[5.0,-4.0]}}}"#,
    );
    assert!(t.checks.iter().any(|c| c.name() == "exact_budget"));
}

#[test]
fn splitting_on_sums() {
    for m in [2, 3, 5] {
        assert_certified_pass(&format!(
            r#"{{"version":1,"problem":{{"kind":"sum_affine","m":{m},"n":4,"seed":{m}}},"solver":"split",
                "params":{{"sigma":0.3,"inexact":{{"fraction":0.9,"seed":1}},"k_max":20000}}}}"#
        ));
    }
}

#[test]
fn forward_backward_on_composites() {
    for phi in ["zero", "l1", "box"] {
        let t = assert_certified_pass(&format!(
            r#"{{"version":1,"problem":{{"kind":"composite","m":3,"n":6,"phi":"{phi}","seed":7}},"solver":"fb",
                "params":{{"rho":1e-7,"delta":1e-7,"eps":1e-7,"k_max":100000,"gap_tol":1e-6}}}}"#
        ));
        assert!(t.checks.iter().any(|c| c.name() == "objective_gap"));
    }
}

#[test]
fn lasso_without_a_cached_reference_still_runs() {
    let (t, r) = run(r#"{"version":1,"problem":{"kind":"consensus_lasso","m":3,"n":12,"seed":42},"solver":"fb","params":{"gap_tol":1e-6}}"#);
    assert!(r.passed());
    assert!(t.notes.iter().any(|n| n.starts_with("no reference optimum")));
    assert!(t.values("objective_gap").unwrap().iter().all(Option::is_none));
    assert!(!t.checks.iter().any(|c| c.name() == "objective_gap"));
}

#[test]
fn k_max_without_certificate_is_reported() {
    let (t, r) = run(r#"{"version":1,"problem":{"kind":"affine","n":6,"seed":3},"solver":"hpe","params":{"rho":1e-12,"eps":1e-12,"k_max":3}}"#);
    assert!(r.passed());
    assert_eq!(t.get_meta("certificate"), Some("none within k_max=3"));
    assert_eq!(t.rows.len(), 3);
}
