use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isoforge")).arg("--out-dir").arg(out).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn check<'a>(r: &'a Value, group: &str, name: &str) -> &'a Value {
    r["groups"]
        .as_array()
        .unwrap()
        .iter()
        .find(|g| g["name"] == group)
        .and_then(|g| g["checks"].as_array().unwrap().iter().find(|c| c["name"] == name))
        .unwrap_or_else(|| panic!("missing check {group}.{name}"))
}

fn passes(r: &Value, group: &str, name: &str) -> bool {
    check(r, group, name)["pass"].as_bool().unwrap()
}

#[test]
fn solve_prints_lambda0_and_omega() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve", "--lambda0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("lambda0 = 0.35472989252"), "{}", stdout(&o));
    let o = run(dir.path(), &["solve", "--lambda", "0.3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("omega = "));
}

#[test]
fn lambda_beyond_lambda0_is_a_precondition_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve", "--lambda", "0.45"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lambda0"));
    let o = run(dir.path(), &["surface", "--lambda", "0.45", "--nu", "16", "--nv", "9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn configuration_and_usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[lattice]\nkind = \"rhombic\"\nlambda = 0.3\ncolour = 2\n").unwrap();
    let o = run(dir.path(), &["verify", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    assert_eq!(run(dir.path(), &["verify", "missing.toml"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn default_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify", config("default.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r = report(dir.path());
    assert_eq!(r["pass"], true);
    for (g, c) in [("structure_equations", "gauss"), ("curve_family", "riccati"), ("symmetry", "inversion"), ("elliptic", "elastica_residual")] {
        assert!(passes(&r, g, c), "{g}.{c}");
    }
}

#[test]
fn torus_mesh_is_closed() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["close-torus", config("torus.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r = report(dir.path());
    assert_eq!(r["results"]["mesh"]["euler"], 0);
    assert_eq!(r["results"]["mesh"]["weld_v"], true);
    assert!(passes(&r, "torus", "seam_gap"));
    let obj = std::fs::read_to_string(dir.path().join("surface.obj")).unwrap();
    let faces = obj.lines().filter(|l| l.starts_with("f ")).count();
    assert_eq!(faces as u64, r["results"]["mesh"]["faces"].as_u64().unwrap());
}

#[test]
fn wrong_root_sign_fails_verification_and_still_writes_the_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["surface", config("default.toml").to_str().unwrap(), "--root-factor=-1"]);
    assert_eq!(o.status.code(), Some(3));
    let out = stdout(&o);
    assert!(out.contains("FAILED structure_equations.gauss"), "{out}");
    assert!(out.contains("FAILED surface.fv_consistency"), "{out}");
    assert!(dir.path().join("surface.obj").exists());
}

#[test]
fn rectangular_lattice_fails_only_closure() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify", config("rectangular.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let r = report(dir.path());
    let failed: Vec<String> = r["groups"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|g| g["checks"].as_array().unwrap().iter().filter(|c| c["pass"] == false).map(move |c| format!("{}.{}", g["name"].as_str().unwrap(), c["name"].as_str().unwrap())))
        .collect();
    assert_eq!(failed, vec!["surface.u_closure".to_string()]);
}

#[test]
fn spherical_run_certifies_spheres_and_axis() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["spherical", config("spherical.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r = report(dir.path());
    for c in ["sphere_fit", "collinearity", "zprime_norm", "axis_vs_monodromy"] {
        assert!(passes(&r, "spherical", c), "{c}");
    }
}

#[test]
fn limit_family_normals_have_rank_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify", config("limit.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(passes(&report(dir.path()), "planarity", "normal_rank"));
}

#[test]
fn curves_export_closed_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["curves", "--nu", "16"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("curves/curve_00.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert!(rows[0].starts_with("u,gamma_re,gamma_im,exp_h"));
    assert_eq!(rows.len(), 1 + 257);
    assert!(dir.path().join("curves/curves.svg").exists());
    assert!(passes(&report(dir.path()), "curves", "closure"));
}

#[test]
fn reports_are_byte_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["verify", "--nu", "32", "--nv", "33"];
    run(a.path(), &args);
    run(b.path(), &args);
    let ra = std::fs::read(a.path().join("report.json")).unwrap();
    let rb = std::fs::read(b.path().join("report.json")).unwrap();
    assert_eq!(ra, rb);
}
