//! Coordinated ecosystem releases.
//!
//! A patch release of the ecosystem may only carry patch updates of its
//! component packages; a minor release may also carry minor updates and new
//! packages; anything else needs a major release.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::PackageName;
use crate::version::Version;

pub const SNAPSHOT_FILE_NAME: &str = "xsdk.release.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpLevel {
    None,
    Patch,
    Minor,
    Major,
}

impl BumpLevel {
    pub const ALL: [BumpLevel; 4] = [BumpLevel::None, BumpLevel::Patch, BumpLevel::Minor, BumpLevel::Major];

    pub fn as_str(self) -> &'static str {
        match self {
            BumpLevel::None => "none",
            BumpLevel::Patch => "patch",
            BumpLevel::Minor => "minor",
            BumpLevel::Major => "major",
        }
    }
}

impl fmt::Display for BumpLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown bump level {0:?} (expected none, patch, minor or major)")]
pub struct UnknownBumpLevel(pub String);

impl FromStr for BumpLevel {
    type Err = UnknownBumpLevel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BumpLevel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| UnknownBumpLevel(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum ReleaseError {
    #[error("version regression: {old} -> {new}")]
    VersionRegression { old: Version, new: Version },
    #[error("version regression for {component}: {old} -> {new}")]
    Regression {
        component: String,
        old: Version,
        new: Version,
    },
    #[error("nothing to release: proposed components equal the previous release")]
    EmptyPlan,
    #[error("invalid release snapshot: {0}")]
    InvalidSnapshot(String),
    #[error("invalid release snapshot: {0}")]
    Parse(#[from] serde_json::Error),
}

/// The canonical increment: lower components reset to zero, prerelease dropped.
pub fn bump(v: &Version, level: BumpLevel) -> Version {
    match level {
        BumpLevel::None => v.clone(),
        BumpLevel::Patch => Version::new(v.major, v.minor, v.patch + 1),
        BumpLevel::Minor => Version::new(v.major, v.minor + 1, 0),
        BumpLevel::Major => Version::new(v.major + 1, 0, 0),
    }
}

pub fn classify_bump(old: &Version, new: &Version) -> Result<BumpLevel, ReleaseError> {
    classify(old, new).ok_or_else(|| ReleaseError::VersionRegression {
        old: old.clone(),
        new: new.clone(),
    })
}

fn classify(old: &Version, new: &Version) -> Option<BumpLevel> {
    if new < old {
        return None;
    }
    Some(if new.major != old.major {
        BumpLevel::Major
    } else if new.minor != old.minor {
        BumpLevel::Minor
    } else if new != old {
        // Includes prerelease-to-release moves within one triple.
        BumpLevel::Patch
    } else {
        BumpLevel::None
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReleaseSnapshot {
    pub sdk_version: Version,
    pub components: BTreeMap<PackageName, Version>,
}

impl ReleaseSnapshot {
    pub fn parse(text: &str) -> Result<ReleaseSnapshot, ReleaseError> {
        let snap: ReleaseSnapshot = serde_json::from_str(text)?;
        if snap.components.is_empty() {
            return Err(ReleaseError::InvalidSnapshot("components is empty".into()));
        }
        Ok(snap)
    }

    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("snapshot serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleasePlan {
    pub previous: ReleaseSnapshot,
    pub proposed_components: BTreeMap<PackageName, Version>,
    /// Components present in both releases.
    pub component_bumps: BTreeMap<PackageName, BumpLevel>,
    pub additions: BTreeSet<PackageName>,
    pub removals: BTreeSet<PackageName>,
    pub required_level: BumpLevel,
    pub proposed_sdk_version: Version,
}

impl ReleasePlan {
    /// The next snapshot this plan describes.
    pub fn proposed_snapshot(&self) -> ReleaseSnapshot {
        ReleaseSnapshot {
            sdk_version: self.proposed_sdk_version.clone(),
            components: self.proposed_components.clone(),
        }
    }
}

fn component_demand(b: BumpLevel) -> BumpLevel {
    b.max(BumpLevel::Patch)
}

const ADDITION_DEMAND: BumpLevel = BumpLevel::Minor;
const REMOVAL_DEMAND: BumpLevel = BumpLevel::Major;

pub fn plan_release(
    prev: &ReleaseSnapshot,
    proposed: &BTreeMap<PackageName, Version>,
) -> Result<ReleasePlan, ReleaseError> {
    if prev.components.is_empty() {
        return Err(ReleaseError::InvalidSnapshot("previous components is empty".into()));
    }
    if &prev.components == proposed {
        return Err(ReleaseError::EmptyPlan);
    }
    let mut component_bumps = BTreeMap::new();
    let mut additions = BTreeSet::new();
    for (name, new) in proposed {
        match prev.components.get(name) {
            None => {
                additions.insert(name.clone());
            }
            Some(old) => {
                let level = classify(old, new).ok_or_else(|| ReleaseError::Regression {
                    component: name.to_string(),
                    old: old.clone(),
                    new: new.clone(),
                })?;
                component_bumps.insert(name.clone(), level);
            }
        }
    }
    let removals: BTreeSet<PackageName> = prev
        .components
        .keys()
        .filter(|n| !proposed.contains_key(*n))
        .cloned()
        .collect();

    let required_level = component_bumps
        .values()
        .map(|b| component_demand(*b))
        .chain(additions.iter().map(|_| ADDITION_DEMAND))
        .chain(removals.iter().map(|_| REMOVAL_DEMAND))
        .max()
        .unwrap_or(BumpLevel::Patch);

    Ok(ReleasePlan {
        previous: prev.clone(),
        proposed_components: proposed.clone(),
        component_bumps,
        additions,
        removals,
        required_level,
        proposed_sdk_version: bump(&prev.sdk_version, required_level),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleaseViolation {
    pub subject: String,
    pub rule: String,
}

impl fmt::Display for ReleaseViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule)
    }
}

pub fn validate_release(plan: &ReleasePlan, target: BumpLevel) -> Vec<ReleaseViolation> {
    let mut out = Vec::new();
    if target == BumpLevel::None {
        out.push(ReleaseViolation {
            subject: "target none".into(),
            rule: "a release requires at least a patch bump".into(),
        });
    }
    for (name, bump) in &plan.component_bumps {
        if component_demand(*bump) > target && *bump > BumpLevel::Patch {
            out.push(ReleaseViolation {
                subject: format!("component {name}"),
                rule: format!("{bump} bump exceeds {target} release"),
            });
        }
    }
    if ADDITION_DEMAND > target {
        for name in &plan.additions {
            out.push(ReleaseViolation {
                subject: format!("addition {name}"),
                rule: format!("adding a package requires a {ADDITION_DEMAND} release, exceeds {target} release"),
            });
        }
    }
    if REMOVAL_DEMAND > target {
        for name in &plan.removals {
            out.push(ReleaseViolation {
                subject: format!("removal {name}"),
                rule: format!("removing a package requires a {REMOVAL_DEMAND} release, exceeds {target} release"),
            });
        }
    }
    out
}
