//! In-memory index of every known `(package, version)` manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;
use walkdir::WalkDir;

use crate::manifest::{
    parse_manifest, validate_manifest, ManifestError, PackageManifest, PackageName, Violation,
    MANIFEST_FILE_NAME,
};
use crate::version::{Version, VersionConstraint};

#[derive(Debug, Error)]
pub enum IngestFailure {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {error}", path.display())]
    Manifest { path: PathBuf, error: ManifestError },
    #[error("duplicate entry {name}@{version} declared by {} and {}", first.display(), second.display())]
    Duplicate {
        name: PackageName,
        version: Version,
        first: PathBuf,
        second: PathBuf,
    },
}

fn join_failures(fs: &[IngestFailure]) -> String {
    fs.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("cannot read registry root {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{} manifest(s) failed to ingest:\n{}", .0.len(), join_failures(.0))]
    Ingest(Vec<IngestFailure>),
    #[error("duplicate entry {name}@{version}")]
    Duplicate { name: PackageName, version: Version },
    #[error("manifest {id} is invalid: {}", violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid { id: String, violations: Vec<Violation> },
    #[error("unknown package {0}")]
    UnknownPackage(String),
}

/// A manifest whose directory components disagree with its declared identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutWarning {
    pub path: PathBuf,
    pub expected: String,
}

impl fmt::Display for LayoutWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "warning: {} is not at the expected location {}; using the manifest's name and version",
            self.path.display(),
            self.expected
        )
    }
}

#[derive(Debug)]
pub struct Ingested {
    pub registry: Registry,
    pub warnings: Vec<LayoutWarning>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    // versions sorted newest first
    entries: BTreeMap<PackageName, Vec<PackageManifest>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads every `package.xsdk.json` below `root`.
    ///
    /// All files are read before failing, so the error lists every bad file.
    pub fn ingest_directory(root: &Path) -> Result<Ingested, RegistryError> {
        let meta = fs::metadata(root).map_err(|source| RegistryError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        if !meta.is_dir() {
            return Err(RegistryError::Io {
                path: root.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
            });
        }

        let mut failures = Vec::new();
        let mut files = Vec::new();
        for entry in WalkDir::new(root).sort_by_file_name() {
            match entry {
                Ok(e) if e.file_type().is_file() && e.file_name() == MANIFEST_FILE_NAME => {
                    files.push(e.into_path())
                }
                Ok(_) => {}
                Err(e) => failures.push(IngestFailure::Io {
                    path: e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf()),
                    source: e.into(),
                }),
            }
        }

        let mut registry = Registry::new();
        let mut origin: BTreeMap<(PackageName, Version), PathBuf> = BTreeMap::new();
        let mut warnings = Vec::new();
        for path in files {
            let text = match fs::read_to_string(&path) {
                Ok(t) => t,
                Err(source) => {
                    failures.push(IngestFailure::Io { path, source });
                    continue;
                }
            };
            let manifest = match parse_manifest(&text) {
                Ok(m) => m,
                Err(error) => {
                    failures.push(IngestFailure::Manifest { path, error });
                    continue;
                }
            };
            let key = (manifest.name.clone(), manifest.version.clone());
            if let Some(first) = origin.get(&key) {
                failures.push(IngestFailure::Duplicate {
                    name: key.0,
                    version: key.1,
                    first: first.clone(),
                    second: path,
                });
                continue;
            }
            if let Some(w) = layout_warning(root, &path, &manifest) {
                warnings.push(w);
            }
            registry
                .insert(manifest)
                .expect("parsed manifests are valid and keys were checked");
            origin.insert(key, path);
        }

        if failures.is_empty() {
            Ok(Ingested { registry, warnings })
        } else {
            Err(RegistryError::Ingest(failures))
        }
    }

    pub fn add_manifest(mut self, m: PackageManifest) -> Result<Registry, RegistryError> {
        self.insert(m)?;
        Ok(self)
    }

    pub fn insert(&mut self, m: PackageManifest) -> Result<(), RegistryError> {
        let violations = validate_manifest(&m);
        if !violations.is_empty() {
            return Err(RegistryError::Invalid {
                id: m.id(),
                violations,
            });
        }
        let versions = self.entries.entry(m.name.clone()).or_default();
        match versions.binary_search_by(|probe| m.version.cmp(&probe.version)) {
            Ok(_) => Err(RegistryError::Duplicate {
                name: m.name,
                version: m.version,
            }),
            Err(at) => {
                versions.insert(at, m);
                Ok(())
            }
        }
    }

    /// Inserts `m`, replacing a stored manifest with the same name and version.
    pub fn upsert(&mut self, m: PackageManifest) -> Result<(), RegistryError> {
        let violations = validate_manifest(&m);
        if !violations.is_empty() {
            return Err(RegistryError::Invalid {
                id: m.id(),
                violations,
            });
        }
        if let Some(versions) = self.entries.get_mut(&m.name) {
            versions.retain(|stored| stored.version != m.version);
        }
        self.insert(m)
    }

    /// Stored versions of `name` that satisfy `c`, newest first.
    pub fn lookup(&self, name: &str, c: &VersionConstraint) -> Result<Vec<Version>, RegistryError> {
        let versions = self
            .entries
            .get(name)
            .ok_or_else(|| RegistryError::UnknownPackage(name.to_string()))?;
        Ok(versions
            .iter()
            .filter(|m| c.satisfied_by(&m.version))
            .map(|m| m.version.clone())
            .collect())
    }

    pub fn get(&self, name: &str, version: &Version) -> Option<&PackageManifest> {
        self.entries
            .get(name)?
            .iter()
            .find(|m| &m.version == version)
    }

    /// All manifests of `name`, newest first.
    pub fn manifests(&self, name: &str) -> &[PackageManifest] {
        self.entries.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn newest(&self, name: &str) -> Option<&PackageManifest> {
        self.manifests(name).first()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &PackageName> {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PackageManifest> {
        self.entries.values().flatten()
    }

    /// Number of stored `(name, version)` entries.
    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn package_count(&self) -> usize {
        self.entries.len()
    }
}

fn layout_warning(root: &Path, path: &Path, m: &PackageManifest) -> Option<LayoutWarning> {
    let expected = root
        .join(m.name.as_str())
        .join(m.version.to_string())
        .join(MANIFEST_FILE_NAME);
    (path != expected).then(|| LayoutWarning {
        path: path.to_path_buf(),
        expected: expected.display().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::manifest;
    use proptest::prelude::*;

    fn v(s: &str) -> Version {
        s.parse().unwrap()
    }

    #[test]
    fn add_keeps_descending_order() {
        let r = Registry::new()
            .add_manifest(manifest("a", "1.0.0"))
            .unwrap()
            .add_manifest(manifest("a", "2.0.0"))
            .unwrap();
        assert_eq!(r.lookup("a", &VersionConstraint::Any).unwrap(), [v("2.0.0"), v("1.0.0")]);
    }

    #[test]
    fn add_to_empty_and_duplicate() {
        let r = Registry::new().add_manifest(manifest("a", "1.0.0")).unwrap();
        assert_eq!(r.len(), 1);
        let err = r.add_manifest(manifest("a", "1.0.0")).unwrap_err();
        assert!(matches!(err, RegistryError::Duplicate { .. }));
    }

    #[test]
    fn rejects_invalid_manifest() {
        let mut m = manifest("a", "1.0.0");
        m.namespace_prefixes.clear();
        assert!(matches!(
            Registry::new().add_manifest(m),
            Err(RegistryError::Invalid { .. })
        ));
    }

    #[test]
    fn lookup_filters_by_constraint() {
        let r = Registry::new()
            .add_manifest(manifest("superlu", "4.3.0"))
            .unwrap()
            .add_manifest(manifest("superlu", "5.2.1"))
            .unwrap();
        assert_eq!(r.lookup("superlu", &">=5.0.0".parse().unwrap()).unwrap(), [v("5.2.1")]);
        assert_eq!(r.lookup("superlu", &VersionConstraint::Any).unwrap(), [v("5.2.1"), v("4.3.0")]);
        assert!(matches!(
            r.lookup("nonexistent", &VersionConstraint::Any),
            Err(RegistryError::UnknownPackage(_))
        ));
    }

    #[test]
    fn upsert_replaces() {
        let mut r = Registry::new().add_manifest(manifest("a", "1.0.0")).unwrap();
        let mut m = manifest("a", "1.0.0");
        m.license = "BSD-3-Clause".into();
        r.upsert(m).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.get("a", &v("1.0.0")).unwrap().license, "BSD-3-Clause");
    }

    proptest! {
        #[test]
        fn lookup_matches_brute_force_filter(
            versions in proptest::collection::btree_set((0u64..4, 0u64..4, 0u64..4), 1..12),
            lo in (0u64..4, 0u64..4, 0u64..4),
            hi in (0u64..4, 0u64..4, 0u64..4),
        ) {
            let mut r = Registry::new();
            for (a, b, c) in &versions {
                r.insert(manifest("pkg", &format!("{a}.{b}.{c}"))).unwrap();
            }
            let constraint: VersionConstraint =
                format!(">={}.{}.{}, <{}.{}.{}", lo.0, lo.1, lo.2, hi.0, hi.1, hi.2).parse().unwrap();
            let got = r.lookup("pkg", &constraint).unwrap();
            let mut expected: Vec<Version> = versions
                .iter()
                .filter(|t| **t >= lo && **t < hi)
                .map(|(a, b, c)| Version::new(*a, *b, *c))
                .collect();
            expected.reverse();
            prop_assert_eq!(got, expected);

            let all = r.lookup("pkg", &VersionConstraint::Any).unwrap();
            prop_assert!(all.windows(2).all(|w| w[0] > w[1]));
        }
    }
}
