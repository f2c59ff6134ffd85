//! The per-package manifest (`package.xsdk.json`) and its validation rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::policy::PolicyId;
use crate::template::Template;
use crate::version::{Version, VersionConstraint};

/// File name every manifest is stored under.
pub const MANIFEST_FILE_NAME: &str = "package.xsdk.json";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid package identifier {0:?}: expected a lowercase letter followed by lowercase letters, digits or hyphens")]
pub struct InvalidPackageName(pub String);

/// Lowercase alphanumeric identifier with hyphens, starting with a letter.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PackageName(String);

impl PackageName {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for PackageName {
    type Err = InvalidPackageName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut bytes = s.bytes();
        let valid = matches!(bytes.next(), Some(b'a'..=b'z'))
            && bytes.all(|b| matches!(b, b'a'..=b'z' | b'0'..=b'9' | b'-'));
        if valid {
            Ok(PackageName(s.to_string()))
        } else {
            Err(InvalidPackageName(s.to_string()))
        }
    }
}

impl fmt::Display for PackageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for PackageName {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for PackageName {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl Serialize for PackageName {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for PackageName {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependencyKind {
    #[default]
    Required,
    Optional,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dependency {
    pub name: PackageName,
    pub constraint: VersionConstraint,
    #[serde(default)]
    pub kind: DependencyKind,
}

impl Dependency {
    pub fn is_required(&self) -> bool {
        self.kind == DependencyKind::Required
    }
}

/// Interoperability level between two libraries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InteropLevel {
    /// Usable side by side in one application.
    SideBySide = 1,
    /// Exchanges data structures with the peer.
    DataExchange = 2,
    /// Calls the peer to perform computations on its behalf.
    Delegation = 3,
}

impl InteropLevel {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(n: u8) -> Option<Self> {
        match n {
            1 => Some(InteropLevel::SideBySide),
            2 => Some(InteropLevel::DataExchange),
            3 => Some(InteropLevel::Delegation),
            _ => None,
        }
    }

    /// The only direction consistent with this level.
    pub fn direction(self) -> InteropDirection {
        match self {
            InteropLevel::SideBySide => InteropDirection::SideBySide,
            InteropLevel::DataExchange => InteropDirection::AcceptsDataFrom,
            InteropLevel::Delegation => InteropDirection::Calls,
        }
    }
}

impl Serialize for InteropLevel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for InteropLevel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let n = u8::deserialize(deserializer)?;
        InteropLevel::from_u8(n)
            .ok_or_else(|| serde::de::Error::custom(format!("interop level must be 1, 2 or 3, got {n}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteropDirection {
    SideBySide,
    AcceptsDataFrom,
    Calls,
}

impl fmt::Display for InteropDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InteropDirection::SideBySide => "side_by_side",
            InteropDirection::AcceptsDataFrom => "accepts_data_from",
            InteropDirection::Calls => "calls",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteropDeclaration {
    pub peer: PackageName,
    pub level: InteropLevel,
    pub direction: InteropDirection,
    #[serde(default)]
    pub mechanism: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildSystem {
    Autoconf,
    Cmake,
    Script,
}

impl fmt::Display for BuildSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BuildSystem::Autoconf => "autoconf",
            BuildSystem::Cmake => "cmake",
            BuildSystem::Script => "script",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildSpec {
    pub system: BuildSystem,
    pub configure_command: String,
    pub build_command: String,
    pub install_command: String,
    #[serde(default)]
    pub supports_64bit: bool,
    #[serde(default)]
    pub supports_shared: bool,
}

impl BuildSpec {
    pub fn templates(&self) -> [(&'static str, &str); 3] {
        [
            ("build.configure_command", &self.configure_command),
            ("build.build_command", &self.build_command),
            ("build.install_command", &self.install_command),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackageManifest {
    pub name: PackageName,
    pub version: Version,
    pub license: String,
    pub contact: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repo_url: Option<String>,
    #[serde(default)]
    pub repo_public: bool,
    #[serde(default)]
    pub dependencies: Vec<Dependency>,
    pub build: BuildSpec,
    pub namespace_prefixes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version_api: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_handling_doc: Option<String>,
    #[serde(default)]
    pub interop: Vec<InteropDeclaration>,
    #[serde(default)]
    pub attestations: BTreeMap<PolicyId, String>,
}

impl PackageManifest {
    pub fn dependency(&self, name: &str) -> Option<&Dependency> {
        self.dependencies.iter().find(|d| d.name.as_str() == name)
    }

    pub fn required_dependencies(&self) -> impl Iterator<Item = &Dependency> {
        self.dependencies.iter().filter(|d| d.is_required())
    }

    /// Non-blank attestation statement for `policy`, if any.
    pub fn attestation(&self, policy: PolicyId) -> Option<&str> {
        self.attestations
            .get(&policy)
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
    }

    pub fn id(&self) -> String {
        format!("{}@{}", self.name, self.version)
    }
}

/// One broken invariant: the offending field and the rule it breaks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn join_violations(vs: &[Violation]) -> String {
    vs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManifestError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invariant error: {}", join_violations(.0))]
    Invariant(Vec<Violation>),
}

/// Parses a manifest document and checks every manifest invariant.
pub fn parse_manifest(document: &str) -> Result<PackageManifest, ManifestError> {
    let manifest: PackageManifest = serde_json::from_str(document).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => ManifestError::Schema(e.to_string()),
            Category::Io | Category::Syntax | Category::Eof => ManifestError::Parse(e.to_string()),
        }
    })?;
    let violations = validate_manifest(&manifest);
    if violations.is_empty() {
        Ok(manifest)
    } else {
        Err(ManifestError::Invariant(violations))
    }
}

pub fn render_manifest(manifest: &PackageManifest) -> String {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    text
}

/// Lists every broken invariant; an empty list means the manifest is valid.
pub fn validate_manifest(m: &PackageManifest) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen = BTreeSet::new();
    for (i, dep) in m.dependencies.iter().enumerate() {
        let field = format!("dependencies[{i}]");
        if dep.name == m.name {
            out.push(Violation::new(field.clone(), "self-dependency"));
        }
        if !seen.insert(dep.name.as_str()) {
            out.push(Violation::new(field, format!("duplicate dependency {}", dep.name)));
        }
    }

    if m.namespace_prefixes.is_empty() {
        out.push(Violation::new("namespace_prefixes", "namespace_prefixes empty"));
    }
    for (i, prefix) in m.namespace_prefixes.iter().enumerate() {
        if prefix.trim().is_empty() {
            out.push(Violation::new(format!("namespace_prefixes[{i}]"), "blank namespace prefix"));
        }
    }

    for (field, text) in m.build.templates() {
        if let Err(e) = Template::parse(text) {
            out.push(Violation::new(field, e.to_string()));
        }
    }

    for (i, decl) in m.interop.iter().enumerate() {
        let field = format!("interop[{i}]");
        if decl.level.direction() != decl.direction {
            out.push(Violation::new(
                field.clone(),
                format!(
                    "level {} requires direction {}, found {}",
                    decl.level.as_u8(),
                    decl.level.direction(),
                    decl.direction
                ),
            ));
        }
        if decl.peer == m.name {
            out.push(Violation::new(field.clone(), "interop peer is the package itself"));
        }
        if decl.level == InteropLevel::Delegation && m.dependency(decl.peer.as_str()).is_none() {
            out.push(Violation::new(
                field,
                format!("level-3 peer not a dependency: {}", decl.peer),
            ));
        }
    }

    out
}
