use std::fs;
use std::path::{Path, PathBuf};

use ecoforge_core::manifest::MANIFEST_FILE_NAME;
use ecoforge_core::registry::{IngestFailure, RegistryError};
use ecoforge_core::{Registry, VersionConstraint};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn manifest_text(name: &str, version: &str) -> String {
    serde_json::json!({
        "name": name,
        "version": version,
        "license": "BSD-3-Clause",
        "contact": "dev@example.org",
        "build": {
            "system": "autoconf",
            "configure_command": "./configure --prefix={prefix}",
            "build_command": "make",
            "install_command": "make install"
        },
        "namespace_prefixes": ["X_"]
    })
    .to_string()
}

fn put(root: &Path, rel: &str, body: &str) {
    let dir = root.join(rel);
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join(MANIFEST_FILE_NAME), body).unwrap();
}

#[test]
fn six_package_fixture() {
    let ing = Registry::ingest_directory(&fixtures().join("registry")).unwrap();
    assert!(ing.warnings.is_empty());
    assert_eq!(ing.registry.len(), 12);
    assert_eq!(ing.registry.package_count(), 6);
    let hypre: Vec<String> = ing
        .registry
        .lookup("hypre", &VersionConstraint::Any)
        .unwrap()
        .iter()
        .map(ToString::to_string)
        .collect();
    assert_eq!(hypre, ["2.11.1", "2.10.0"]);
}

#[test]
fn empty_directory_is_an_empty_registry() {
    let d = tempfile::tempdir().unwrap();
    let ing = Registry::ingest_directory(d.path()).unwrap();
    assert!(ing.registry.is_empty());
}

#[test]
fn missing_root_is_an_io_error() {
    let d = tempfile::tempdir().unwrap();
    let err = Registry::ingest_directory(&d.path().join("nope")).unwrap_err();
    assert!(matches!(err, RegistryError::Io { .. }));
}

#[test]
fn duplicates_name_both_files() {
    let d = tempfile::tempdir().unwrap();
    put(d.path(), "a/1.0.0", &manifest_text("a", "1.0.0"));
    put(d.path(), "mirror/a/1.0.0", &manifest_text("a", "1.0.0"));
    let Err(RegistryError::Ingest(fails)) = Registry::ingest_directory(d.path()) else {
        panic!("duplicate accepted");
    };
    assert_eq!(fails.len(), 1);
    let IngestFailure::Duplicate { first, second, .. } = &fails[0] else {
        panic!("{:?}", fails[0]);
    };
    assert!(first.ends_with("a/1.0.0/package.xsdk.json"));
    assert!(second.ends_with("mirror/a/1.0.0/package.xsdk.json"));
}

#[test]
fn every_bad_file_is_reported() {
    let d = tempfile::tempdir().unwrap();
    put(d.path(), "a/1.0.0", &manifest_text("a", "1.0.0"));
    put(d.path(), "b/1.0.0", "{ not json");
    put(d.path(), "c/1.0.0", &manifest_text("c", "one"));
    let err = Registry::ingest_directory(d.path()).unwrap_err();
    let RegistryError::Ingest(fails) = &err else { panic!("{err}") };
    assert_eq!(fails.len(), 2);
    let text = err.to_string();
    assert!(text.starts_with("2 manifest(s) failed to ingest"), "{text}");
    assert!(text.contains("b/1.0.0") && text.contains("c/1.0.0"), "{text}");
}

#[test]
fn misplaced_manifest_warns_but_loads() {
    let d = tempfile::tempdir().unwrap();
    put(d.path(), "a/2.0.0", &manifest_text("a", "1.0.0"));
    let ing = Registry::ingest_directory(d.path()).unwrap();
    assert_eq!(ing.warnings.len(), 1);
    assert!(ing.registry.get("a", &"1.0.0".parse().unwrap()).is_some());
}
