//! Pairwise interoperability levels over a resolved package set.
//!
//! Level 1 comes for free from a successful joint resolution. Levels 2 and 3
//! come from manifest declarations and are only checked structurally.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::manifest::{InteropDirection, InteropLevel, PackageManifest, PackageName, Violation};
use crate::registry::Registry;
use crate::resolver::{Outcome, Resolution, ResolveError, Solution};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MatrixDoc", into = "MatrixDoc")]
pub struct InteropMatrix {
    packages: Vec<PackageName>,
    cells: BTreeMap<(PackageName, PackageName), u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub from: PackageName,
    pub to: PackageName,
    pub level: u8,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixDoc {
    packages: Vec<PackageName>,
    cells: Vec<MatrixCell>,
}

impl From<InteropMatrix> for MatrixDoc {
    fn from(m: InteropMatrix) -> Self {
        MatrixDoc {
            cells: m.cells().collect(),
            packages: m.packages,
        }
    }
}

impl TryFrom<MatrixDoc> for InteropMatrix {
    type Error = String;

    fn try_from(doc: MatrixDoc) -> Result<Self, String> {
        let mut packages = doc.packages;
        packages.sort();
        packages.dedup();
        let mut cells = BTreeMap::new();
        for c in doc.cells {
            if c.level > 3 {
                return Err(format!("level {} out of range for {} -> {}", c.level, c.from, c.to));
            }
            if c.from == c.to || packages.binary_search(&c.from).is_err() || packages.binary_search(&c.to).is_err() {
                return Err(format!("cell {} -> {} does not name two distinct listed packages", c.from, c.to));
            }
            cells.insert((c.from, c.to), c.level);
        }
        Ok(InteropMatrix { packages, cells })
    }
}

impl InteropMatrix {
    pub fn packages(&self) -> &[PackageName] {
        &self.packages
    }

    /// 0 when nothing relates the two packages (or `from == to`).
    pub fn level(&self, from: &str, to: &str) -> u8 {
        self.cells
            .iter()
            .find(|((f, t), _)| f.as_str() == from && t.as_str() == to)
            .map_or(0, |(_, l)| *l)
    }

    /// Off-diagonal cells in (from, to) order.
    pub fn cells(&self) -> impl Iterator<Item = MatrixCell> + '_ {
        self.cells.iter().map(|((from, to), level)| MatrixCell {
            from: from.clone(),
            to: to.clone(),
            level: *level,
        })
    }
}

pub fn build_interop_matrix(r: &Registry, res: &Resolution) -> Result<InteropMatrix, ResolveError> {
    match &res.outcome {
        Outcome::Solved(s) => matrix_for_solution(r, s),
        Outcome::Conflict(c) => Err(ResolveError::InvalidInput(format!(
            "interop matrix needs a solved resolution, got a conflict on {}",
            c.package
        ))),
    }
}

pub fn matrix_for_solution(r: &Registry, s: &Solution) -> Result<InteropMatrix, ResolveError> {
    let packages: Vec<PackageName> = s.assignment().keys().cloned().collect();
    let mut cells = BTreeMap::new();
    for from in &packages {
        for to in &packages {
            if from != to {
                cells.insert((from.clone(), to.clone()), InteropLevel::SideBySide.as_u8());
            }
        }
    }
    for (name, version) in s.assignment() {
        let m = r
            .get(name.as_str(), version)
            .ok_or_else(|| ResolveError::InvalidInput(format!("{name}@{version} is not in the registry")))?;
        for decl in &m.interop {
            let Some(cell) = cells.get_mut(&(name.clone(), decl.peer.clone())) else {
                continue;
            };
            let level = match decl.direction {
                InteropDirection::SideBySide => InteropLevel::SideBySide,
                InteropDirection::AcceptsDataFrom => InteropLevel::DataExchange,
                InteropDirection::Calls if s.has_edge(name.as_str(), decl.peer.as_str()) => {
                    InteropLevel::Delegation
                }
                InteropDirection::Calls => InteropLevel::SideBySide,
            };
            *cell = (*cell).max(level.as_u8());
        }
    }
    Ok(InteropMatrix { packages, cells })
}

pub fn validate_interop(m: &PackageManifest, r: &Registry) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, decl) in m.interop.iter().enumerate() {
        let field = format!("interop[{i}]");
        if decl.level.direction() != decl.direction {
            out.push(Violation {
                field: field.clone(),
                rule: format!(
                    "level {} requires direction {}, found {}",
                    decl.level.as_u8(),
                    decl.level.direction(),
                    decl.direction
                ),
            });
        }
        if !r.contains(decl.peer.as_str()) {
            out.push(Violation {
                field: field.clone(),
                rule: format!("unknown peer: {}", decl.peer),
            });
        }
        let is_delegation = decl.level == InteropLevel::Delegation || decl.direction == InteropDirection::Calls;
        if is_delegation && m.dependency(decl.peer.as_str()).is_none() {
            out.push(Violation {
                field,
                rule: format!("level-3 peer not a dependency: {}", decl.peer),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Text,
    Dot,
    Json,
}

pub fn render_matrix(mx: &InteropMatrix, format: MatrixFormat) -> String {
    match format {
        MatrixFormat::Text => render_text(mx),
        MatrixFormat::Dot => render_dot(mx),
        MatrixFormat::Json => {
            let mut s = serde_json::to_string_pretty(mx).expect("matrix serializes");
            s.push('\n');
            s
        }
    }
}

fn render_text(mx: &InteropMatrix) -> String {
    let width = mx.packages.iter().map(|p| p.as_str().len()).max().unwrap_or(0) + 2;
    let mut out = String::new();
    let mut row = format!("{:width$}", "");
    for p in &mx.packages {
        let _ = write!(row, "{:width$}", p.as_str());
    }
    out.push_str(row.trim_end());
    out.push('\n');
    for from in &mx.packages {
        let mut row = format!("{:width$}", from.as_str());
        for to in &mx.packages {
            let cell = if from == to {
                "-".to_string()
            } else {
                mx.level(from.as_str(), to.as_str()).to_string()
            };
            let _ = write!(row, "{cell:width$}");
        }
        out.push_str(row.trim_end());
        out.push('\n');
    }
    out
}

fn dot_id(name: &PackageName) -> String {
    if name.as_str().contains('-') {
        format!("\"{name}\"")
    } else {
        name.to_string()
    }
}

fn render_dot(mx: &InteropMatrix) -> String {
    let mut out = String::from("digraph interop {\n");
    for p in &mx.packages {
        let _ = writeln!(out, "  {};", dot_id(p));
    }
    for ((from, to), level) in &mx.cells {
        if *level >= 2 {
            let _ = writeln!(out, "  {} -> {} [label=\"L{level}\"];", dot_id(from), dot_id(to));
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{Dependency, DependencyKind, InteropDeclaration};
    use crate::resolver::{resolve, Root};
    use crate::testutil::manifest;
    use crate::version::VersionConstraint;

    fn dep(name: &str) -> Dependency {
        Dependency {
            name: name.parse().unwrap(),
            constraint: VersionConstraint::Any,
            kind: DependencyKind::Required,
        }
    }

    fn decl(peer: &str, level: InteropLevel) -> InteropDeclaration {
        InteropDeclaration {
            peer: peer.parse().unwrap(),
            level,
            direction: level.direction(),
            mechanism: String::new(),
        }
    }

    fn paper_registry() -> Registry {
        let mut petsc = manifest("petsc", "3.7.0");
        petsc.dependencies = vec![dep("hypre"), dep("superlu")];
        petsc.interop = vec![decl("hypre", InteropLevel::Delegation), decl("superlu", InteropLevel::Delegation)];
        let mut trilinos = manifest("trilinos", "12.8.0");
        trilinos.dependencies = vec![dep("hypre"), dep("superlu")];
        trilinos.interop = vec![
            decl("hypre", InteropLevel::Delegation),
            decl("superlu", InteropLevel::Delegation),
            decl("petsc", InteropLevel::DataExchange),
        ];
        [manifest("hypre", "2.11.1"), manifest("superlu", "5.2.1"), petsc, trilinos]
            .into_iter()
            .try_fold(Registry::new(), Registry::add_manifest)
            .unwrap()
    }

    fn solved(r: &Registry, roots: &[&str]) -> Resolution {
        let roots: Vec<Root> = roots.iter().map(|s| s.parse().unwrap()).collect();
        resolve(r, &roots).unwrap()
    }

    #[test]
    fn paper_levels() {
        let r = paper_registry();
        let mx = build_interop_matrix(&r, &solved(&r, &["petsc", "trilinos"])).unwrap();
        let l3 = [("petsc", "hypre"), ("petsc", "superlu"), ("trilinos", "hypre"), ("trilinos", "superlu")];
        for c in mx.cells() {
            let pair = (c.from.as_str(), c.to.as_str());
            let want = if l3.contains(&pair) {
                3
            } else if pair == ("trilinos", "petsc") {
                2
            } else {
                1
            };
            assert_eq!(c.level, want, "{pair:?}");
        }
        assert_eq!(mx.cells().count(), 12);

        let dot = render_matrix(&mx, MatrixFormat::Dot);
        assert!(dot.contains("  petsc -> hypre [label=\"L3\"];\n"), "{dot}");
        assert!(dot.contains("  trilinos -> petsc [label=\"L2\"];\n"));
        assert_eq!(dot.matches("->").count(), 5);

        let text = render_matrix(&mx, MatrixFormat::Text);
        assert_eq!(
            text,
            "          hypre     petsc     superlu   trilinos\n\
             hypre     -         1         1         1\n\
             petsc     3         -         3         1\n\
             superlu   1         1         -         1\n\
             trilinos  3         2         3         -\n"
        );
    }

    #[test]
    fn small_matrices() {
        let r = [manifest("a", "1.0.0"), manifest("b-x", "1.0.0")]
            .into_iter()
            .try_fold(Registry::new(), Registry::add_manifest)
            .unwrap();
        let one = build_interop_matrix(&r, &solved(&r, &["a"])).unwrap();
        assert_eq!(one.cells().count(), 0);
        assert_eq!(render_matrix(&one, MatrixFormat::Dot), "digraph interop {\n  a;\n}\n");

        let two = build_interop_matrix(&r, &solved(&r, &["a", "b-x"])).unwrap();
        assert_eq!(two.level("a", "b-x"), 1);
        assert_eq!(two.level("b-x", "a"), 1);
        assert_eq!(render_matrix(&two, MatrixFormat::Dot), "digraph interop {\n  a;\n  \"b-x\";\n}\n");
    }

    #[test]
    fn json_round_trip() {
        let r = paper_registry();
        let mx = build_interop_matrix(&r, &solved(&r, &["trilinos", "petsc"])).unwrap();
        let back: InteropMatrix = serde_json::from_str(&render_matrix(&mx, MatrixFormat::Json)).unwrap();
        assert_eq!(back, mx);
        let bad = r#"{"packages": ["a"], "cells": [{"from": "a", "to": "a", "level": 1}]}"#;
        assert!(serde_json::from_str::<InteropMatrix>(bad).is_err());
    }

    #[test]
    fn conflicts_are_rejected() {
        let mut a = manifest("a", "1.0.0");
        a.dependencies = vec![Dependency {
            name: "b".parse().unwrap(),
            constraint: ">=2.0.0".parse().unwrap(),
            kind: DependencyKind::Required,
        }];
        let r = [a, manifest("b", "1.0.0")]
            .into_iter()
            .try_fold(Registry::new(), Registry::add_manifest)
            .unwrap();
        let res = solved(&r, &["a"]);
        assert!(matches!(build_interop_matrix(&r, &res), Err(ResolveError::InvalidInput(_))));
    }

    #[test]
    fn validation() {
        let r = paper_registry();
        let petsc = r.newest("petsc").unwrap().clone();
        assert!(validate_interop(&petsc, &r).is_empty());

        let mut m = manifest("foo", "1.0.0");
        m.interop = vec![decl("hypre", InteropLevel::Delegation), decl("ghost", InteropLevel::DataExchange)];
        let got: Vec<String> = validate_interop(&m, &r).iter().map(ToString::to_string).collect();
        assert_eq!(
            got,
            ["interop[0]: level-3 peer not a dependency: hypre", "interop[1]: unknown peer: ghost"]
        );

        m.interop = vec![InteropDeclaration {
            direction: InteropDirection::AcceptsDataFrom,
            ..decl("hypre", InteropLevel::SideBySide)
        }];
        let got = validate_interop(&m, &r);
        assert_eq!(got.len(), 1);
        assert!(got[0].rule.starts_with("level 1 requires direction side_by_side"));
    }
}
