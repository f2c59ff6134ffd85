//! Three-part versions and conjunctive version constraints.
//!
//! Versions are `major.minor.patch` with an optional opaque prerelease token
//! (`2.10.3-rc1`). A prerelease orders strictly below the bare triple and
//! prereleases of the same triple compare lexicographically as whole tokens.
//!
//! Constraints are conjunctions of comparators (`>=4.3.0, <5.0.0`) or the
//! wildcard `*`. The `~` and `^` shorthands are expanded when parsed, so a
//! stored constraint is always a plain comparator list.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VersionError {
    #[error("malformed version {text:?}: {reason}")]
    MalformedVersion { text: String, reason: String },
    #[error("malformed constraint {text:?}: {reason}")]
    MalformedConstraint { text: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Version {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
    pub prerelease: Option<String>,
}

impl Version {
    pub const fn new(major: u64, minor: u64, patch: u64) -> Self {
        Version {
            major,
            minor,
            patch,
            prerelease: None,
        }
    }

    pub fn with_prerelease(mut self, token: impl Into<String>) -> Self {
        self.prerelease = Some(token.into());
        self
    }

    pub fn triple(&self) -> (u64, u64, u64) {
        (self.major, self.minor, self.patch)
    }

    pub fn is_prerelease(&self) -> bool {
        self.prerelease.is_some()
    }

    /// The bare release of the same triple.
    pub fn release(&self) -> Version {
        Version::new(self.major, self.minor, self.patch)
    }
}

impl Ord for Version {
    fn cmp(&self, other: &Self) -> Ordering {
        self.triple()
            .cmp(&other.triple())
            .then_with(|| match (&self.prerelease, &other.prerelease) {
                (None, None) => Ordering::Equal,
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (Some(a), Some(b)) => a.cmp(b),
            })
    }
}

impl PartialOrd for Version {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)?;
        if let Some(pre) = &self.prerelease {
            write!(f, "-{pre}")?;
        }
        Ok(())
    }
}

fn parse_component(text: &str, part: &str, name: &str) -> Result<u64, VersionError> {
    let malformed = |reason: String| VersionError::MalformedVersion {
        text: text.to_string(),
        reason,
    };
    if part.is_empty() {
        return Err(malformed(format!("missing {name} component")));
    }
    if !part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed(format!("{name} component {part:?} is not a non-negative integer")));
    }
    if part.len() > 1 && part.starts_with('0') {
        return Err(malformed(format!("{name} component {part:?} has a leading zero")));
    }
    part.parse::<u64>()
        .map_err(|_| malformed(format!("{name} component {part:?} is out of range")))
}

impl FromStr for Version {
    type Err = VersionError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let (core, prerelease) = match text.split_once('-') {
            Some((core, pre)) => (core, Some(pre)),
            None => (text, None),
        };
        let parts: Vec<&str> = core.split('.').collect();
        if parts.len() != 3 {
            return Err(VersionError::MalformedVersion {
                text: text.to_string(),
                reason: format!("expected major.minor.patch, found {} component(s)", parts.len()),
            });
        }
        let major = parse_component(text, parts[0], "major")?;
        let minor = parse_component(text, parts[1], "minor")?;
        let patch = parse_component(text, parts[2], "patch")?;
        let prerelease = match prerelease {
            None => None,
            Some(pre) => {
                let legal = !pre.is_empty()
                    && pre.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'.');
                if !legal {
                    return Err(VersionError::MalformedVersion {
                        text: text.to_string(),
                        reason: format!("illegal prerelease token {pre:?}"),
                    });
                }
                Some(pre.to_string())
            }
        };
        Ok(Version {
            major,
            minor,
            patch,
            prerelease,
        })
    }
}

impl Serialize for Version {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Version {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Eq,
    Ge,
    Gt,
    Le,
    Lt,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Eq => "=",
            Op::Ge => ">=",
            Op::Gt => ">",
            Op::Le => "<=",
            Op::Lt => "<",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Comparator {
    pub op: Op,
    pub version: Version,
}

impl Comparator {
    pub fn new(op: Op, version: Version) -> Self {
        Comparator { op, version }
    }

    pub fn matches(&self, v: &Version) -> bool {
        let ord = v.cmp(&self.version);
        match self.op {
            Op::Eq => ord == Ordering::Equal,
            Op::Ge => ord != Ordering::Less,
            Op::Gt => ord == Ordering::Greater,
            Op::Le => ord != Ordering::Greater,
            Op::Lt => ord == Ordering::Less,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.op.symbol(), self.version)
    }
}

/// A conjunction of comparators, or the wildcard.
///
/// Contradictory comparator lists are representable and simply match nothing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum VersionConstraint {
    Any,
    All(Vec<Comparator>),
}

impl VersionConstraint {
    pub fn exact(v: Version) -> Self {
        VersionConstraint::All(vec![Comparator::new(Op::Eq, v)])
    }

    pub fn comparators(&self) -> &[Comparator] {
        match self {
            VersionConstraint::Any => &[],
            VersionConstraint::All(cs) => cs,
        }
    }

    pub fn is_any(&self) -> bool {
        matches!(self, VersionConstraint::Any)
    }

    pub fn satisfied_by(&self, v: &Version) -> bool {
        self.comparators().iter().all(|c| c.matches(v))
    }
}

pub fn constraint_satisfied(c: &VersionConstraint, v: &Version) -> bool {
    c.satisfied_by(v)
}

impl fmt::Display for VersionConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VersionConstraint::Any => f.write_str("*"),
            VersionConstraint::All(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
        }
    }
}

fn parse_term(whole: &str, term: &str, out: &mut Vec<Comparator>) -> Result<(), VersionError> {
    let malformed = |reason: String| VersionError::MalformedConstraint {
        text: whole.to_string(),
        reason,
    };
    let version = |s: &str| -> Result<Version, VersionError> {
        s.trim()
            .parse::<Version>()
            .map_err(|e| malformed(format!("bad version in {term:?}: {e}")))
    };

    if let Some(rest) = term.strip_prefix('~') {
        let lo = version(rest)?;
        let hi = Version::new(lo.major, lo.minor + 1, 0);
        out.push(Comparator::new(Op::Ge, lo));
        out.push(Comparator::new(Op::Lt, hi));
        return Ok(());
    }
    if let Some(rest) = term.strip_prefix('^') {
        let lo = version(rest)?;
        let hi = Version::new(lo.major + 1, 0, 0);
        out.push(Comparator::new(Op::Ge, lo));
        out.push(Comparator::new(Op::Lt, hi));
        return Ok(());
    }

    let split = term
        .find(|c: char| c.is_ascii_digit())
        .ok_or_else(|| malformed(format!("no version in {term:?}")))?;
    let (op_text, rest) = term.split_at(split);
    let op = match op_text.trim() {
        "=" | "" => Op::Eq,
        ">=" => Op::Ge,
        ">" => Op::Gt,
        "<=" => Op::Le,
        "<" => Op::Lt,
        other => return Err(malformed(format!("unknown operator {other:?}"))),
    };
    out.push(Comparator::new(op, version(rest)?));
    Ok(())
}

impl FromStr for VersionConstraint {
    type Err = VersionError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let trimmed = text.trim();
        if trimmed == "*" {
            return Ok(VersionConstraint::Any);
        }
        let mut comparators = Vec::new();
        for term in trimmed.split(',') {
            let term = term.trim();
            if term.is_empty() {
                return Err(VersionError::MalformedConstraint {
                    text: text.to_string(),
                    reason: "empty comparator".to_string(),
                });
            }
            if term == "*" {
                return Err(VersionError::MalformedConstraint {
                    text: text.to_string(),
                    reason: "wildcard cannot be combined with comparators".to_string(),
                });
            }
            parse_term(text, term, &mut comparators)?;
        }
        Ok(VersionConstraint::All(comparators))
    }
}

impl Serialize for VersionConstraint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VersionConstraint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
