use std::fs;
use std::path::{Path, PathBuf};

use ecoforge_core::lockfile::Lockfile;
use ecoforge_core::manifest::{parse_manifest, render_manifest, MANIFEST_FILE_NAME};
use ecoforge_core::release::ReleaseSnapshot;
use ecoforge_core::resolver::{resolve, Root};
use ecoforge_core::Registry;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn manifests_round_trip() {
    let mut n = 0;
    for entry in walkdir::WalkDir::new(fixtures()) {
        let entry = entry.unwrap();
        if entry.file_name() != MANIFEST_FILE_NAME {
            continue;
        }
        let m = parse_manifest(&fs::read_to_string(entry.path()).unwrap()).unwrap();
        assert_eq!(parse_manifest(&render_manifest(&m)).unwrap(), m, "{}", entry.path().display());
        n += 1;
    }
    assert!(n > 20);
}

#[test]
fn lockfile_round_trip() {
    let reg = Registry::ingest_directory(&fixtures().join("registry")).unwrap().registry;
    let roots: Vec<Root> = vec!["pflotran".parse().unwrap(), "trilinos@>=12.8.0".parse().unwrap()];
    let sol = resolve(&reg, &roots).unwrap().solution().unwrap().clone();
    let lock = Lockfile::new(&roots, &sol);
    let back = Lockfile::parse(&lock.render()).unwrap();
    assert_eq!(back, lock);
    assert_eq!(back.to_solution(&reg).unwrap(), sol);
}

#[test]
fn snapshots_round_trip() {
    for entry in fs::read_dir(fixtures().join("release")).unwrap() {
        let path = entry.unwrap().path();
        let s = ReleaseSnapshot::parse(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(ReleaseSnapshot::parse(&s.render()).unwrap(), s, "{}", path.display());
    }
}
