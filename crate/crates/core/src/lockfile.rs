//! `xsdk.lock.json`: the roots, the resolved assignment and its build order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::PackageName;
use crate::registry::Registry;
use crate::resolver::{ResolveError, Root, Solution};
use crate::version::Version;

pub const LOCKFILE_NAME: &str = "xsdk.lock.json";

#[derive(Debug, Error)]
pub enum LockfileError {
    #[error("malformed lockfile: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("lockfile does not match the registry: {0}")]
    Stale(#[from] ResolveError),
    #[error("lockfile build_order disagrees with its assignment")]
    OrderMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockedPackage {
    pub name: PackageName,
    pub version: Version,
}

// Field order is alphabetical so the rendered keys come out sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lockfile {
    pub assignment: BTreeMap<PackageName, Version>,
    pub build_order: Vec<LockedPackage>,
    pub roots: Vec<Root>,
}

impl Lockfile {
    pub fn new(roots: &[Root], solution: &Solution) -> Lockfile {
        Lockfile {
            assignment: solution.assignment().clone(),
            build_order: solution
                .build_order()
                .into_iter()
                .map(|(name, version)| LockedPackage { name, version })
                .collect(),
            roots: roots.to_vec(),
        }
    }

    pub fn parse(text: &str) -> Result<Lockfile, LockfileError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Byte-stable rendering: pretty JSON, sorted keys, trailing newline.
    pub fn render(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("lockfile serializes");
        text.push('\n');
        text
    }

    /// Rebuilds the solution against `registry`, rejecting stale lockfiles.
    pub fn to_solution(&self, registry: &Registry) -> Result<Solution, LockfileError> {
        let solution = Solution::from_assignment(registry, self.assignment.clone())?;
        let expected: Vec<LockedPackage> = solution
            .build_order()
            .into_iter()
            .map(|(name, version)| LockedPackage { name, version })
            .collect();
        if expected != self.build_order {
            return Err(LockfileError::OrderMismatch);
        }
        Ok(solution)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{Dependency, DependencyKind};
    use crate::resolver::resolve;
    use crate::testutil::manifest;

    fn fixture() -> (Registry, Vec<Root>) {
        let mut petsc = manifest("petsc", "3.7.0");
        for dep in ["superlu", "hypre"] {
            petsc.dependencies.push(Dependency {
                name: dep.parse().unwrap(),
                constraint: "*".parse().unwrap(),
                kind: DependencyKind::Required,
            });
        }
        let mut r = Registry::new();
        for m in [petsc, manifest("superlu", "5.2.1"), manifest("hypre", "2.11.1")] {
            r.insert(m).unwrap();
        }
        (r, vec!["petsc@>=3.0.0".parse().unwrap()])
    }

    #[test]
    fn renders_sorted_and_round_trips() {
        let (r, roots) = fixture();
        let res = resolve(&r, &roots).unwrap();
        let lock = Lockfile::new(&roots, res.solution().unwrap());
        let text = lock.render();
        assert_eq!(
            text,
            r#"{
  "assignment": {
    "hypre": "2.11.1",
    "petsc": "3.7.0",
    "superlu": "5.2.1"
  },
  "build_order": [
    {
      "name": "hypre",
      "version": "2.11.1"
    },
    {
      "name": "superlu",
      "version": "5.2.1"
    },
    {
      "name": "petsc",
      "version": "3.7.0"
    }
  ],
  "roots": [
    {
      "constraint": ">=3.0.0",
      "name": "petsc"
    }
  ]
}
"#
        );
        let back = Lockfile::parse(&text).unwrap();
        assert_eq!(back, lock);
        assert_eq!(back.to_solution(&r).unwrap(), *res.solution().unwrap());
    }

    #[test]
    fn stale_lockfiles_are_rejected() {
        let (r, roots) = fixture();
        let res = resolve(&r, &roots).unwrap();
        let mut lock = Lockfile::new(&roots, res.solution().unwrap());
        lock.build_order.reverse();
        assert!(matches!(lock.to_solution(&r), Err(LockfileError::OrderMismatch)));

        let mut lock = Lockfile::new(&roots, res.solution().unwrap());
        lock.assignment.insert("superlu".parse().unwrap(), "4.3.0".parse().unwrap());
        assert!(matches!(lock.to_solution(&r), Err(LockfileError::Stale(_))));

        let mut lock = Lockfile::new(&roots, res.solution().unwrap());
        lock.assignment.remove("hypre");
        assert!(matches!(lock.to_solution(&r), Err(LockfileError::Stale(_))));
    }
}
