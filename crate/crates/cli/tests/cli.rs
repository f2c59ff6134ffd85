use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecoforge")).args(args).output().unwrap()
}

fn fx(rel: &str) -> String {
    fixtures().join(rel).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn ingest_counts() {
    let o = run(&["ingest", "--registry", &fx("registry")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("12 manifest(s) for 6 package(s)"), "{}", stdout(&o));
}

#[test]
fn resolve_writes_a_lockfile() {
    let d = tempfile::tempdir().unwrap();
    let lock = d.path().join("xsdk.lock.json");
    let o = run(&[
        "resolve", "--registry", &fx("registry"), "--root", "petsc", "--root", "trilinos",
        "--output", lock.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(lock).unwrap();
    assert!(text.contains("superlu"));
}

#[test]
fn conflict_exits_one_with_explanation() {
    let o = run(&["resolve", "--registry", &fx("conflict"), "--root", "petsc", "--root", "trilinos"]);
    assert_eq!(o.status.code(), Some(1));
    let all = format!("{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    assert!(all.contains("petsc requires superlu >=5.0.0"), "{all}");
    assert!(all.contains("trilinos requires superlu =4.3.0"), "{all}");
}

#[test]
fn unknown_root_is_a_data_error() {
    let o = run(&["resolve", "--registry", &fx("registry"), "--root", "nosuch"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["resolve"]).status.code(), Some(2));
    assert_eq!(run(&["audit", "--format", "dot", "--source", &fx("goodpkg/source")]).status.code(), Some(2));
    assert_eq!(
        run(&["build", "--registry", &fx("registry"), "--root", "hypre", "--prefix", "relative/dir"]).status.code(),
        Some(2)
    );
}

#[test]
fn audit_of_compliant_package() {
    let src = fx("goodpkg/source");
    let o = run(&[
        "audit", "--source", &src, "--registry", &fx("goodpkg/registry"),
        "--prefix", &fx("goodpkg/install"), "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rep["xsdk_compatible"], true);
    assert_eq!(rep["results"].as_array().unwrap().len(), 19);
}

#[test]
fn release_exit_codes() {
    let rel = |f: &str| fx(&format!("release/{f}"));
    let o = run(&["validate-release", "--prev", &rel("rel-0.1.0.json"), "--proposed", &rel("rel-minor.json"), "--target", "patch"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("component hypre: minor bump exceeds patch release"));
    let o = run(&["plan-release", "--prev", &rel("rel-0.1.0.json"), "--proposed", &rel("rel-regress.json")]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn dry_run_build_lists_commands_in_order() {
    let o = run(&["build", "--registry", &fx("registry"), "--root", "petsc", "--prefix", "/opt/xsdk"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let first = |pkg: &str| out.lines().position(|l| l.starts_with(&format!("{pkg}\t"))).unwrap();
    assert!(first("hypre") < first("petsc"));
    assert!(first("superlu") < first("petsc"));
}
