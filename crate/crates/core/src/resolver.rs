//! Single-version-per-package dependency resolution.
//!
//! The solver is a depth-first search with chronological backtracking. Packages
//! are picked in demand-discovery order (roots in the order given, then each
//! chosen manifest's required dependencies in manifest order) and candidate
//! versions are tried newest first, so identical inputs always produce the
//! same assignment and the same decision log.
//!
//! Optional dependencies never pull a package into the solution. They only
//! constrain the version of a package that something else demands.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::{DependencyKind, PackageManifest, PackageName};
use crate::registry::Registry;
use crate::version::{Version, VersionConstraint};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("no roots given")]
    NoRoots,
    #[error("unknown package {name}{}", required_by.as_ref().map(|r| format!(" (required by {r})")).unwrap_or_default())]
    UnknownPackage {
        name: String,
        required_by: Option<String>,
    },
    #[error("required-dependency cycle: {}", cycle.iter().map(ToString::to_string).collect::<Vec<_>>().join(" -> "))]
    Cycle { cycle: Vec<PackageName> },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid root {text:?}: {reason}")]
pub struct RootParseError {
    pub text: String,
    pub reason: String,
}

/// A top-level request: a package name and the versions acceptable for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Root {
    pub constraint: VersionConstraint,
    pub name: PackageName,
}

impl Root {
    pub fn new(name: PackageName, constraint: VersionConstraint) -> Self {
        Root { name, constraint }
    }

    pub fn any(name: PackageName) -> Self {
        Root::new(name, VersionConstraint::Any)
    }
}

impl FromStr for Root {
    type Err = RootParseError;

    /// `name` or `name@constraint`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: String| RootParseError {
            text: s.to_string(),
            reason,
        };
        let (name, constraint) = match s.split_once('@') {
            Some((n, c)) => (n, c.parse().map_err(|e| err(format!("{e}")))?),
            None => (s, VersionConstraint::Any),
        };
        let name = name.parse().map_err(|e| err(format!("{e}")))?;
        Ok(Root::new(name, constraint))
    }
}

impl fmt::Display for Root {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.constraint.is_any() {
            write!(f, "{}", self.name)
        } else {
            write!(f, "{}@{}", self.name, self.constraint)
        }
    }
}

/// Who placed a demand on a package.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirer {
    Root,
    Package { name: PackageName, version: Version },
}

impl fmt::Display for Requirer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Requirer::Root => f.write_str("(root)"),
            Requirer::Package { name, .. } => write!(f, "{name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demand {
    pub requirer: Requirer,
    pub constraint: VersionConstraint,
}

/// No stored version of `package` satisfies every listed demand at once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictExplanation {
    pub package: PackageName,
    pub demands: Vec<Demand>,
    pub available: Vec<Version>,
}

/// Human-readable conflict report, one demand per line, demanders sorted by name.
pub fn explain_conflict(c: &ConflictExplanation) -> String {
    let mut demands: Vec<&Demand> = c.demands.iter().collect();
    demands.sort_by(|a, b| {
        a.requirer
            .to_string()
            .cmp(&b.requirer.to_string())
            .then_with(|| a.constraint.to_string().cmp(&b.constraint.to_string()))
    });
    let mut out = format!(
        "conflict: no version of {} satisfies every requirement\n",
        c.package
    );
    for d in demands {
        out.push_str(&format!("{} requires {} {}\n", d.requirer, c.package, d.constraint));
    }
    let available = if c.available.is_empty() {
        "(none)".to_string()
    } else {
        c.available.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
    };
    out.push_str(&format!("available versions of {}: {}\n", c.package, available));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "cause")]
pub enum Cause {
    /// Tentatively selected; the search continued from here.
    Chosen,
    /// Rejected because one of its dependencies is already fixed at a version
    /// outside the dependency's constraint.
    Incompatible {
        dependency: PackageName,
        constraint: VersionConstraint,
        assigned: Version,
    },
    /// Selected earlier, but no completion of the search below it exists.
    Backtracked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub package: PackageName,
    pub version: Version,
    #[serde(flatten)]
    pub cause: Cause,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub target: PackageName,
    pub kind: DependencyKind,
}

/// A consistent assignment together with the dependency edges active in it.
///
/// Active edges are every required edge plus each optional edge whose target
/// is part of the assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    assignment: BTreeMap<PackageName, Version>,
    edges: BTreeMap<PackageName, Vec<Edge>>,
}

impl Solution {
    /// Rebuilds a solution from an assignment, checking it against `registry`.
    pub fn from_assignment(
        registry: &Registry,
        assignment: BTreeMap<PackageName, Version>,
    ) -> Result<Solution, ResolveError> {
        let mut edges = BTreeMap::new();
        for (name, version) in &assignment {
            let m = registry.get(name.as_str(), version).ok_or_else(|| {
                ResolveError::InvalidInput(format!("{name}@{version} is not in the registry"))
            })?;
            let mut out = Vec::new();
            for dep in &m.dependencies {
                match assignment.get(&dep.name) {
                    Some(v) if dep.constraint.satisfied_by(v) => out.push(Edge {
                        target: dep.name.clone(),
                        kind: dep.kind,
                    }),
                    Some(v) => {
                        return Err(ResolveError::InvalidInput(format!(
                            "{name}@{version} requires {} {} but {v} is assigned",
                            dep.name, dep.constraint
                        )))
                    }
                    None if dep.is_required() => {
                        return Err(ResolveError::InvalidInput(format!(
                            "{name}@{version} requires {} which is not assigned",
                            dep.name
                        )))
                    }
                    None => {}
                }
            }
            edges.insert(name.clone(), out);
        }
        let solution = Solution { assignment, edges };
        solution.check_acyclic()?;
        Ok(solution)
    }

    pub fn assignment(&self) -> &BTreeMap<PackageName, Version> {
        &self.assignment
    }

    pub fn version_of(&self, name: &str) -> Option<&Version> {
        self.assignment.get(name)
    }

    pub fn edges(&self, name: &str) -> &[Edge] {
        self.edges.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges(from).iter().any(|e| e.target.as_str() == to)
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Dependencies before dependents; ties broken by ascending name.
    pub fn build_order(&self) -> Vec<(PackageName, Version)> {
        let mut pending: BTreeMap<&PackageName, usize> = self
            .edges
            .iter()
            .map(|(name, es)| (name, es.len()))
            .collect();
        let mut dependents: BTreeMap<&PackageName, Vec<&PackageName>> = BTreeMap::new();
        for (name, es) in &self.edges {
            for e in es {
                dependents.entry(&e.target).or_default().push(name);
            }
        }
        let mut ready: BTreeSet<&PackageName> = pending
            .iter()
            .filter(|(_, n)| **n == 0)
            .map(|(name, _)| *name)
            .collect();
        let mut order = Vec::with_capacity(self.assignment.len());
        while let Some(next) = ready.pop_first() {
            order.push((next.clone(), self.assignment[next].clone()));
            for dependent in dependents.get(next).into_iter().flatten() {
                let n = pending.get_mut(dependent).expect("dependent is assigned");
                *n -= 1;
                if *n == 0 {
                    ready.insert(dependent);
                }
            }
        }
        debug_assert_eq!(order.len(), self.assignment.len(), "solutions are acyclic");
        order
    }

    /// Transitive required-dependency closure of `root` in build order,
    /// excluding `root`.
    pub fn export_dependency_list(&self, root: &str) -> Result<Vec<(PackageName, Version)>, ResolveError> {
        if !self.assignment.contains_key(root) {
            return Err(ResolveError::UnknownPackage {
                name: root.to_string(),
                required_by: None,
            });
        }
        let mut closure = BTreeSet::new();
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            for e in self.edges(n) {
                if e.kind == DependencyKind::Required && closure.insert(e.target.as_str()) {
                    stack.push(e.target.as_str());
                }
            }
        }
        Ok(self
            .build_order()
            .into_iter()
            .filter(|(name, _)| name.as_str() != root && closure.contains(name.as_str()))
            .collect())
    }

    fn check_acyclic(&self) -> Result<(), ResolveError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        fn visit<'a>(
            s: &'a Solution,
            n: &'a PackageName,
            marks: &mut BTreeMap<&'a PackageName, Mark>,
            path: &mut Vec<&'a PackageName>,
        ) -> Result<(), ResolveError> {
            match marks.get(n) {
                Some(Mark::Done) => return Ok(()),
                Some(Mark::Open) => {
                    let start = path.iter().position(|p| *p == n).expect("open node is on the path");
                    let mut cycle: Vec<PackageName> = path[start..].iter().map(|p| (*p).clone()).collect();
                    cycle.push(n.clone());
                    return Err(ResolveError::Cycle { cycle });
                }
                None => {}
            }
            marks.insert(n, Mark::Open);
            path.push(n);
            for e in s.edges(n.as_str()) {
                visit(s, &e.target, marks, path)?;
            }
            path.pop();
            marks.insert(n, Mark::Done);
            Ok(())
        }

        let mut marks = BTreeMap::new();
        for name in self.assignment.keys() {
            visit(self, name, &mut marks, &mut Vec::new())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Solved(Solution),
    Conflict(ConflictExplanation),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolution {
    pub outcome: Outcome,
    pub decisions: Vec<Decision>,
}

impl Resolution {
    pub fn solution(&self) -> Option<&Solution> {
        match &self.outcome {
            Outcome::Solved(s) => Some(s),
            Outcome::Conflict(_) => None,
        }
    }

    pub fn conflict(&self) -> Option<&ConflictExplanation> {
        match &self.outcome {
            Outcome::Conflict(c) => Some(c),
            Outcome::Solved(_) => None,
        }
    }

    pub fn is_solved(&self) -> bool {
        self.solution().is_some()
    }

    fn require_solution(&self) -> Result<&Solution, ResolveError> {
        self.solution()
            .ok_or_else(|| ResolveError::InvalidInput("resolution ended in a conflict".into()))
    }
}

pub fn build_order(res: &Resolution) -> Result<Vec<(PackageName, Version)>, ResolveError> {
    Ok(res.require_solution()?.build_order())
}

pub fn export_dependency_list(
    res: &Resolution,
    root: &str,
) -> Result<Vec<(PackageName, Version)>, ResolveError> {
    res.require_solution()?.export_dependency_list(root)
}

pub fn resolve(registry: &Registry, roots: &[Root]) -> Result<Resolution, ResolveError> {
    if roots.is_empty() {
        return Err(ResolveError::NoRoots);
    }
    let mut order: Vec<&PackageName> = Vec::new();
    for root in roots {
        if !registry.contains(root.name.as_str()) {
            return Err(ResolveError::UnknownPackage {
                name: root.name.to_string(),
                required_by: None,
            });
        }
        if !order.contains(&&root.name) {
            order.push(&root.name);
        }
    }

    let mut search = Search {
        registry,
        roots,
        decisions: Vec::new(),
        conflict: None,
        fallback: None,
    };
    let partial = Partial {
        assigned: BTreeMap::new(),
        order,
    };
    let found = search.run(partial)?;
    let outcome = match found {
        Some(partial) => {
            let assignment = partial
                .assigned
                .iter()
                .map(|(name, m)| ((*name).clone(), m.version.clone()))
                .collect();
            Outcome::Solved(Solution::from_assignment(registry, assignment)?)
        }
        None => Outcome::Conflict(
            search
                .conflict
                .or(search.fallback)
                .expect("a failed search records at least one rejection"),
        ),
    };
    Ok(Resolution {
        outcome,
        decisions: search.decisions,
    })
}

#[derive(Clone)]
struct Partial<'r> {
    assigned: BTreeMap<&'r PackageName, &'r PackageManifest>,
    // demand-discovery order; the first unassigned entry is decided next
    order: Vec<&'r PackageName>,
}

struct Search<'r> {
    registry: &'r Registry,
    roots: &'r [Root],
    decisions: Vec<Decision>,
    conflict: Option<ConflictExplanation>,
    // used only when no provably unsatisfiable demand set was ever observed
    fallback: Option<ConflictExplanation>,
}

impl<'r> Search<'r> {
    fn demands_on(&self, partial: &Partial<'r>, name: &PackageName) -> Vec<Demand> {
        let mut out: Vec<Demand> = self
            .roots
            .iter()
            .filter(|r| &r.name == name)
            .map(|r| Demand {
                requirer: Requirer::Root,
                constraint: r.constraint.clone(),
            })
            .collect();
        for pkg in &partial.order {
            let Some(m) = partial.assigned.get(pkg) else { continue };
            for dep in m.dependencies.iter().filter(|d| &d.name == name) {
                out.push(Demand {
                    requirer: Requirer::Package {
                        name: m.name.clone(),
                        version: m.version.clone(),
                    },
                    constraint: dep.constraint.clone(),
                });
            }
        }
        out
    }

    fn explanation(&self, name: &PackageName, mut demands: Vec<Demand>) -> ConflictExplanation {
        demands.sort_by(|a, b| a.requirer.cmp(&b.requirer));
        ConflictExplanation {
            package: name.clone(),
            demands,
            available: self
                .registry
                .manifests(name.as_str())
                .iter()
                .map(|m| m.version.clone())
                .collect(),
        }
    }

    fn unsatisfiable(&self, name: &PackageName, demands: &[Demand]) -> bool {
        !self
            .registry
            .manifests(name.as_str())
            .iter()
            .any(|m| demands.iter().all(|d| d.constraint.satisfied_by(&m.version)))
    }

    fn run(&mut self, partial: Partial<'r>) -> Result<Option<Partial<'r>>, ResolveError> {
        let Some(&next) = partial.order.iter().find(|n| !partial.assigned.contains_key(*n)) else {
            return Ok(Some(partial));
        };
        let registry = self.registry;
        let demands = self.demands_on(&partial, next);
        let candidates: Vec<&'r PackageManifest> = registry
            .manifests(next.as_str())
            .iter()
            .filter(|m| demands.iter().all(|d| d.constraint.satisfied_by(&m.version)))
            .collect();
        if candidates.is_empty() {
            if self.conflict.is_none() {
                self.conflict = Some(self.explanation(next, demands));
            }
            return Ok(None);
        }

        'candidates: for m in candidates {
            for dep in &m.dependencies {
                let Some(fixed) = partial.assigned.get(&dep.name) else { continue };
                if dep.constraint.satisfied_by(&fixed.version) {
                    continue;
                }
                self.decisions.push(Decision {
                    package: m.name.clone(),
                    version: m.version.clone(),
                    cause: Cause::Incompatible {
                        dependency: dep.name.clone(),
                        constraint: dep.constraint.clone(),
                        assigned: fixed.version.clone(),
                    },
                });
                let mut combined = self.demands_on(&partial, &dep.name);
                combined.push(Demand {
                    requirer: Requirer::Package {
                        name: m.name.clone(),
                        version: m.version.clone(),
                    },
                    constraint: dep.constraint.clone(),
                });
                if self.conflict.is_none() && self.unsatisfiable(&dep.name, &combined) {
                    self.conflict = Some(self.explanation(&dep.name, combined));
                } else if self.fallback.is_none() {
                    self.fallback = Some(self.explanation(&dep.name, combined));
                }
                continue 'candidates;
            }
            for dep in m.required_dependencies() {
                if !registry.contains(dep.name.as_str()) {
                    return Err(ResolveError::UnknownPackage {
                        name: dep.name.to_string(),
                        required_by: Some(m.id()),
                    });
                }
            }

            self.decisions.push(Decision {
                package: m.name.clone(),
                version: m.version.clone(),
                cause: Cause::Chosen,
            });
            let mut child = partial.clone();
            child.assigned.insert(&m.name, m);
            for dep in m.required_dependencies() {
                if !child.order.contains(&&dep.name) {
                    child.order.push(&dep.name);
                }
            }
            if let Some(done) = self.run(child)? {
                return Ok(Some(done));
            }
            self.decisions.push(Decision {
                package: m.name.clone(),
                version: m.version.clone(),
                cause: Cause::Backtracked,
            });
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::Dependency;
    use crate::testutil::manifest;

    fn v(s: &str) -> Version {
        s.parse().unwrap()
    }

    fn dep(name: &str, c: &str) -> Dependency {
        Dependency {
            name: name.parse().unwrap(),
            constraint: c.parse().unwrap(),
            kind: DependencyKind::Required,
        }
    }

    fn with_deps(name: &str, version: &str, deps: Vec<Dependency>) -> PackageManifest {
        let mut m = manifest(name, version);
        m.dependencies = deps;
        m
    }

    fn registry(ms: Vec<PackageManifest>) -> Registry {
        let mut r = Registry::new();
        for m in ms {
            r.insert(m).unwrap();
        }
        r
    }

    fn roots(names: &[&str]) -> Vec<Root> {
        names.iter().map(|n| n.parse().unwrap()).collect()
    }

    fn superlu_conflict() -> Vec<PackageManifest> {
        vec![
            manifest("superlu", "4.3.0"),
            manifest("superlu", "5.2.1"),
            with_deps("petsc", "3.7.0", vec![dep("superlu", ">=5.0.0")]),
            with_deps("trilinos", "12.6.0", vec![dep("superlu", "=4.3.0")]),
        ]
    }

    #[test]
    fn free_choice_takes_newest() {
        let r = registry(vec![manifest("superlu", "4.3.0"), manifest("superlu", "5.2.1")]);
        let res = resolve(&r, &roots(&["superlu"])).unwrap();
        let s = res.solution().unwrap();
        assert_eq!(s.assignment().len(), 1);
        assert_eq!(s.version_of("superlu"), Some(&v("5.2.1")));
    }

    #[test]
    fn superlu_pins_conflict() {
        let r = registry(superlu_conflict());
        let res = resolve(&r, &roots(&["petsc", "trilinos"])).unwrap();
        let c = res.conflict().expect("conflict");
        assert_eq!(c.package.as_str(), "superlu");
        let demands: Vec<(String, String)> = c
            .demands
            .iter()
            .map(|d| (d.requirer.to_string(), d.constraint.to_string()))
            .collect();
        assert_eq!(
            demands,
            [("petsc".into(), ">=5.0.0".into()), ("trilinos".into(), "=4.3.0".into())]
        );
        assert_eq!(c.available, [v("5.2.1"), v("4.3.0")]);

        let text = explain_conflict(c);
        assert!(text.lines().any(|l| l == "petsc requires superlu >=5.0.0"), "{text}");
        assert!(text.lines().any(|l| l == "trilinos requires superlu =4.3.0"), "{text}");
    }

    #[test]
    fn compatible_trilinos_release_resolves() {
        let mut ms = superlu_conflict();
        ms.push(with_deps("trilinos", "12.8.0", vec![dep("superlu", ">=5.0.0")]));
        let r = registry(ms);
        let res = resolve(&r, &roots(&["petsc", "trilinos"])).unwrap();
        let s = res.solution().expect("solved");
        let got: Vec<String> = s.assignment().iter().map(|(n, v)| format!("{n}@{v}")).collect();
        assert_eq!(got, ["petsc@3.7.0", "superlu@5.2.1", "trilinos@12.8.0"]);
    }

    #[test]
    fn explanation_snapshots() {
        let r = registry(vec![manifest("superlu", "4.3.0"), manifest("superlu", "5.2.1")]);
        let res = resolve(&r, &roots(&["superlu@=9.9.9"])).unwrap();
        assert_eq!(
            explain_conflict(res.conflict().unwrap()),
            "conflict: no version of superlu satisfies every requirement\n\
             (root) requires superlu =9.9.9\n\
             available versions of superlu: 5.2.1, 4.3.0\n"
        );

        let three = ConflictExplanation {
            package: "hypre".parse().unwrap(),
            demands: vec![
                Demand {
                    requirer: Requirer::Package { name: "trilinos".parse().unwrap(), version: v("12.6.0") },
                    constraint: "<2.0.0".parse().unwrap(),
                },
                Demand {
                    requirer: Requirer::Package { name: "petsc".parse().unwrap(), version: v("3.7.0") },
                    constraint: ">=2.10.0".parse().unwrap(),
                },
                Demand {
                    requirer: Requirer::Package { name: "alquimia".parse().unwrap(), version: v("1.0.0") },
                    constraint: "=2.11.0".parse().unwrap(),
                },
            ],
            available: vec![v("2.11.1"), v("2.10.0")],
        };
        assert_eq!(
            explain_conflict(&three),
            "conflict: no version of hypre satisfies every requirement\n\
             alquimia requires hypre =2.11.0\n\
             petsc requires hypre >=2.10.0\n\
             trilinos requires hypre <2.0.0\n\
             available versions of hypre: 2.11.1, 2.10.0\n"
        );
    }

    #[test]
    fn backtracks_over_an_earlier_choice() {
        // q@2 is tried first but p only accepts q@1
        let r = registry(vec![
            manifest("q", "1.0.0"),
            manifest("q", "2.0.0"),
            with_deps("p", "1.0.0", vec![dep("q", "=1.0.0")]),
        ]);
        let res = resolve(&r, &roots(&["q", "p"])).unwrap();
        let s = res.solution().unwrap();
        assert_eq!(s.version_of("q"), Some(&v("1.0.0")));
        assert!(res.decisions.iter().any(|d| matches!(d.cause, Cause::Incompatible { .. })));
        assert!(res.decisions.iter().any(|d| d.cause == Cause::Backtracked));
    }

    #[test]
    fn optional_dependencies_do_not_force_inclusion() {
        let mut petsc = manifest("petsc", "3.7.0");
        petsc.dependencies.push(Dependency {
            name: "hypre".parse().unwrap(),
            constraint: ">=2.10.0".parse().unwrap(),
            kind: DependencyKind::Optional,
        });
        let r = registry(vec![petsc, manifest("hypre", "2.9.0"), manifest("hypre", "2.11.1")]);
        let alone = resolve(&r, &roots(&["petsc"])).unwrap();
        assert_eq!(alone.solution().unwrap().len(), 1);

        // demanded by a root, the optional edge constrains it
        let both = resolve(&r, &roots(&["petsc", "hypre@<2.11.0"])).unwrap();
        let c = both.conflict().expect("optional edge still constrains");
        assert_eq!(c.package.as_str(), "hypre");

        let ok = resolve(&r, &roots(&["petsc", "hypre"])).unwrap();
        let s = ok.solution().unwrap();
        assert_eq!(s.version_of("hypre"), Some(&v("2.11.1")));
        assert!(s.has_edge("petsc", "hypre"));
    }

    #[test]
    fn unknown_packages_are_errors() {
        let r = registry(vec![with_deps("a", "1.0.0", vec![dep("ghost", "*")])]);
        assert!(matches!(
            resolve(&r, &roots(&["nope"])),
            Err(ResolveError::UnknownPackage { .. })
        ));
        let err = resolve(&r, &roots(&["a"])).unwrap_err();
        assert_eq!(err.to_string(), "unknown package ghost (required by a@1.0.0)");
        assert_eq!(resolve(&r, &[]), Err(ResolveError::NoRoots));
    }

    #[test]
    fn cycles_are_errors() {
        let r = registry(vec![
            with_deps("a", "1.0.0", vec![dep("b", "*")]),
            with_deps("b", "1.0.0", vec![dep("c", "*")]),
            with_deps("c", "1.0.0", vec![dep("a", "*")]),
        ]);
        match resolve(&r, &roots(&["a"])) {
            Err(ResolveError::Cycle { cycle }) => {
                let names: Vec<&str> = cycle.iter().map(PackageName::as_str).collect();
                assert_eq!(names, ["a", "b", "c", "a"]);
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn build_order_examples() {
        let r = registry(vec![
            manifest("superlu", "5.2.1"),
            manifest("hypre", "2.11.1"),
            with_deps("petsc", "3.7.0", vec![dep("superlu", "*"), dep("hypre", "*")]),
        ]);
        let res = resolve(&r, &roots(&["petsc"])).unwrap();
        let names: Vec<String> = build_order(&res).unwrap().into_iter().map(|(n, _)| n.to_string()).collect();
        assert_eq!(names, ["hypre", "superlu", "petsc"]);
        let exported: Vec<String> = export_dependency_list(&res, "petsc")
            .unwrap()
            .into_iter()
            .map(|(n, _)| n.to_string())
            .collect();
        assert_eq!(exported, ["hypre", "superlu"]);
        assert!(export_dependency_list(&res, "hypre").unwrap().is_empty());
        assert!(matches!(
            export_dependency_list(&res, "trilinos"),
            Err(ResolveError::UnknownPackage { .. })
        ));

        let single = resolve(&r, &roots(&["hypre"])).unwrap();
        assert_eq!(build_order(&single).unwrap(), [("hypre".parse().unwrap(), v("2.11.1"))]);
    }

    #[test]
    fn diamond_order() {
        let r = registry(vec![
            with_deps("a", "1.0.0", vec![dep("c", "*"), dep("b", "*")]),
            with_deps("b", "1.0.0", vec![dep("d", "*")]),
            with_deps("c", "1.0.0", vec![dep("d", "*")]),
            manifest("d", "1.0.0"),
        ]);
        let res = resolve(&r, &roots(&["a"])).unwrap();
        let names = |xs: Vec<(PackageName, Version)>| xs.into_iter().map(|(n, _)| n.to_string()).collect::<Vec<_>>();
        assert_eq!(names(build_order(&res).unwrap()), ["d", "b", "c", "a"]);
        assert_eq!(names(export_dependency_list(&res, "a").unwrap()), ["d", "b", "c"]);
    }

    #[test]
    fn build_order_rejects_conflicts() {
        let r = registry(superlu_conflict());
        let res = resolve(&r, &roots(&["petsc", "trilinos"])).unwrap();
        assert!(matches!(build_order(&res), Err(ResolveError::InvalidInput(_))));
    }

    #[test]
    fn deterministic_decision_log() {
        let r = registry(superlu_conflict());
        let a = resolve(&r, &roots(&["petsc", "trilinos"])).unwrap();
        let b = resolve(&r, &roots(&["petsc", "trilinos"])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn root_syntax() {
        let r: Root = "petsc@>=3.7.0, <3.8.0".parse().unwrap();
        assert_eq!(r.name.as_str(), "petsc");
        assert_eq!(r.to_string(), "petsc@>=3.7.0, <3.8.0");
        assert_eq!("hypre".parse::<Root>().unwrap().constraint, VersionConstraint::Any);
        assert!("Hypre".parse::<Root>().is_err());
        assert!("hypre@>>1".parse::<Root>().is_err());
    }
}
