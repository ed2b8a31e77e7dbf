use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use std::process::Command;

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn dirac(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dirac")).args(args).output().expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(args: &[&str]) -> (i32, Value) {
    let (code, out, err) = dirac(args);
    let v = serde_json::from_str(&out).unwrap_or_else(|e| panic!("{e}: {out} {err}"));
    (code, v)
}

#[test]
fn check_jacobi_exit_codes() {
    let (code, v) = json(&["check-jacobi", &data("so3.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["verdict"], "pass");

    let (code, v) = json(&["check-jacobi", &data("broken.json")]);
    assert_eq!(code, 1);
    assert_eq!(v["report"]["first_failing_triple"]["triple"], serde_json::json!([1, 2, 3]));

    let (code, _) = json(&["check-jacobi", &data("empty.json")]);
    assert_eq!(code, 0);
}

#[test]
fn schema_errors_name_the_path() {
    let (code, _, err) = dirac(&["check-jacobi", &data("bad_schema.json")]);
    assert_eq!(code, 2);
    assert!(err.contains("constants[0]"), "{err}");

    let (code, _, err) = dirac(&["courant-verify", &data("so3.json")]);
    assert_eq!(code, 2);
    assert!(err.contains("schema violation"), "{err}");

    let (code, _, _) = dirac(&["check-jacobi", "/nonexistent.json"]);
    assert_eq!(code, 2);
}

#[test]
fn reports_embed_hash_and_version() {
    let (_, v) = json(&["check-jacobi", &data("so3.json")]);
    let bytes = std::fs::read(data("so3.json")).unwrap();
    assert_eq!(v["input_sha256"], hex::encode(Sha256::digest(&bytes)));
    assert_eq!(v["engine_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn reports_are_deterministic() {
    let runs: [&[&str]; 4] = [
        &["deform-lie", "--order", "4", &data("heisenberg.json")],
        &["rothstein-check", "--m", "2", "--k", "2", "--gamma", "random-seed=7"],
        &["rothstein-check", "--m", "1", "--k", "2", "--gamma", "random", "--seed", "3"],
        &["deform-dirac", "--order", "3", &data("double-so3.json")],
    ];
    for args in runs {
        let a = dirac(args);
        let b = dirac(args);
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn table_is_rendering_of_json() {
    let (_, v) = json(&["ce-cohomology", &data("so3.json")]);
    let (_, t, _) = dirac(&["ce-cohomology", &data("so3.json"), "--format", "table"]);
    let hash = t.lines().find(|l| l.starts_with("input_sha256")).unwrap();
    assert!(hash.ends_with(v["input_sha256"].as_str().unwrap()));
    assert!(t.lines().any(|l| l.starts_with("report.cohomology.2.dim") && l.ends_with(" 0")));
}

#[test]
fn so3_cohomology_vanishes() {
    let (code, v) = json(&["ce-cohomology", &data("so3.json")]);
    assert_eq!(code, 0);
    for row in v["report"]["cohomology"].as_array().unwrap() {
        assert_eq!(row["dim"], 0);
    }
    let (_, v) = json(&["ce-cohomology", &data("heisenberg.json"), "--degree", "2"]);
    assert_eq!(v["report"]["cohomology"][0]["dim"], 5);
}

#[test]
fn deform_lie_reports_each_order() {
    let (code, v) = json(&["deform-lie", "--order", "4", &data("heisenberg.json")]);
    assert_eq!(code, 0);
    let orders = v["report"]["orders"].as_array().unwrap();
    assert_eq!(orders.len(), 3);
    for (o, k) in orders.iter().zip(2..) {
        assert_eq!(o["order"], k);
        assert_eq!(o["verified"], true);
    }

    let (code, v) = json(&["deform-lie", &data("so3.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["report"]["rigid"], true);
    assert_eq!(v["report"]["every_order1_cocycle_is_coboundary"], true);

    let (code, v) = json(&["deform-lie", &data("abelian_obstructed.json")]);
    assert_eq!(code, 1);
    assert_eq!(v["report"]["obstructed_at"], 2);
    assert_eq!(v["report"]["orders"][0]["verified"], true);

    let (code, _, err) = dirac(&["deform-lie", &data("mc_violation.json")]);
    assert_eq!(code, 2);
    assert!(err.contains("order 2"), "{err}");
}

#[test]
fn dirac_linear_round_trips() {
    let (code, v) = json(&["dirac-linear", &data("dirac_graph.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["report"]["round_trip_range_form"], true);
    assert_eq!(v["report"]["round_trip_kernel_bivector"], true);
    assert_eq!(v["report"]["range_dim"], 2);

    let (code, v) = json(&["dirac-linear", &data("dirac_minkowski_bad.json")]);
    assert_eq!(code, 1);
    assert_eq!(v["report"]["dirac"], false);
}

#[test]
fn courant_and_master() {
    let (code, v) = json(&["courant-verify", &data("standard.json")]);
    assert_eq!(code, 0, "{v}");
    let (code, v) = json(&["theta-master", &data("double-so3.json")]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["report"]["components"].as_array().unwrap().len(), 6);
    let (code, v) = json(&["theta-master", &data("incoherent.json")]);
    assert_eq!(code, 1);
    assert_eq!(v["verdict"], "violation");
}

#[test]
fn deform_dirac_verdicts() {
    let (code, v) = json(&["deform-dirac", "--order", "3", &data("double-so3.json")]);
    assert_eq!(code, 0);
    let orders = v["report"]["orders"].as_array().unwrap();
    assert_eq!(orders.len(), 2);
    assert!(orders.iter().all(|o| o["h3_class"] == "zero" && o["verified"] == true));

    let (code, v) = json(&["deform-dirac", &data("so3-dual.json")]);
    assert_eq!(code, 1);
    assert_eq!(v["verdict"], "obstructed");
    assert_eq!(v["report"]["orders"][0]["h3_class"], "nonzero");
}

#[test]
fn rothstein_random_seed_7() {
    let (code, v) = json(&["rothstein-check", "--m", "2", "--k", "2", "--gamma", "random-seed=7"]);
    assert_eq!(code, 0);
    assert_eq!(v["report"]["nonzero_residuals"], 0);
    assert!(v["report"]["entries"].as_u64().unwrap() > 0);
    assert!(!v["report"]["connection"].as_array().unwrap().is_empty());

    let (a, b) = (
        dirac(&["rothstein-check", "--m", "1", "--k", "2", "--gamma", "random", "--seed", "1"]).1,
        dirac(&["rothstein-check", "--m", "1", "--k", "2", "--gamma", "random", "--seed", "2"]).1,
    );
    assert_ne!(a, b);

    let (code, _, _) = dirac(&["rothstein-check", "--m", "1", "--k", "1", "--gamma", "curved"]);
    assert_eq!(code, 2);
}

#[test]
fn ihs_run_writes_csv() {
    let (code, out, _) = dirac(&["ihs-run", "--system", &data("oscillator.json"), "--x0", "1,0", "--steps", "100"]);
    assert_eq!(code, 0);
    let mut lines = out.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some("t,x1,x2,H,constraint_residual"));
    assert_eq!(lines.count(), 101);
    assert!(out.contains("# verdict=pass"));

    let (code, out, _) = dirac(&["ihs-run", "--system", &data("constrained.json"), "--x0", "1,0,0.5", "--steps", "5"]);
    assert_eq!(code, 1);
    assert!(out.contains("# verdict=left_admissible_set"));

    let (code, v) = json(&["ihs-run", "--system", &data("constrained.json"), "--x0", "1,0,-1", "--steps", "5", "--format", "json"]);
    assert_eq!(code, 0);
    assert_eq!(v["verdict"], "pass");

    let (code, _, _) = dirac(&["check-jacobi", &data("so3.json"), "--format", "csv"]);
    assert_eq!(code, 2);
}
