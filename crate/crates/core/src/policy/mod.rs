//! Community-policy auditing.
//!
//! Each of the 19 policies (mandatory M1–M14, recommended R1–R5) has one
//! check. A check either verifies the policy from the manifest, the source
//! tree and the install prefix, or falls back to the manifest's attestation
//! when the policy cannot be checked with the inputs at hand. A package is
//! compatible when every mandatory policy is verified or attested.

mod checks;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{CommandExecutor, ExecError};
use crate::manifest::{PackageManifest, PackageName};
use crate::registry::Registry;
use crate::version::Version;

pub use checks::run_policy_check;
pub use config::{
    AuditConfig, AuditConfigFile, ConfigError, CONFIG_ENV_VAR, CONFIG_FILE_NAME,
    DEFAULT_LICENSE_ALLOWLIST, DEFAULT_MEMCHECK_PREFIX, DEFAULT_PRINT_PATTERNS,
};

/// Name of the optional exported-symbol list at the package source root.
pub const EXPORTS_FILE_NAME: &str = "exports.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PolicyId {
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
    M7,
    M8,
    M9,
    M10,
    M11,
    M12,
    M13,
    M14,
    R1,
    R2,
    R3,
    R4,
    R5,
}

impl PolicyId {
    pub const ALL: [PolicyId; 19] = [
        PolicyId::M1,
        PolicyId::M2,
        PolicyId::M3,
        PolicyId::M4,
        PolicyId::M5,
        PolicyId::M6,
        PolicyId::M7,
        PolicyId::M8,
        PolicyId::M9,
        PolicyId::M10,
        PolicyId::M11,
        PolicyId::M12,
        PolicyId::M13,
        PolicyId::M14,
        PolicyId::R1,
        PolicyId::R2,
        PolicyId::R3,
        PolicyId::R4,
        PolicyId::R5,
    ];

    pub fn severity(self) -> Severity {
        if (self as usize) < 14 {
            Severity::Mandatory
        } else {
            Severity::Recommended
        }
    }

    pub fn as_str(self) -> &'static str {
        const NAMES: [&str; 19] = [
            "M1", "M2", "M3", "M4", "M5", "M6", "M7", "M8", "M9", "M10", "M11", "M12", "M13", "M14",
            "R1", "R2", "R3", "R4", "R5",
        ];
        NAMES[self as usize]
    }

    /// One-line statement of the policy.
    pub fn summary(self) -> &'static str {
        match self {
            PolicyId::M1 => "standard configure options",
            PolicyId::M2 => "test suite",
            PolicyId::M3 => "user-provided MPI communicator",
            PolicyId::M4 => "portability to key architectures",
            PolicyId::M5 => "contact for the development team",
            PolicyId::M6 => "respect system resources and settings",
            PolicyId::M7 => "open source license",
            PolicyId::M8 => "runtime version API",
            PolicyId::M9 => "limited, well-defined name space",
            PolicyId::M10 => "accessible repository",
            PolicyId::M11 => "no hardwired print or IO",
            PolicyId::M12 => "use outside copies of external software",
            PolicyId::M13 => "install under <prefix>/include and <prefix>/lib",
            PolicyId::M14 => "buildable with 64-bit pointers",
            PolicyId::R1 => "public repository",
            PolicyId::R2 => "test suite runs under a memory checker",
            PolicyId::R3 => "documented error handling",
            PolicyId::R4 => "free resources when no longer needed",
            PolicyId::R5 => "export ordered dependency list",
        }
    }
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown policy id {0:?}")]
pub struct UnknownPolicy(pub String);

impl FromStr for PolicyId {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| UnknownPolicy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Mandatory,
    Recommended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Verified,
    Attested,
    Failed,
    NotApplicable,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Verified => "verified",
            Status::Attested => "attested",
            Status::Failed => "failed",
            Status::NotApplicable => "not_applicable",
        }
    }

    /// Counts toward compatibility when the policy is mandatory.
    pub fn satisfies(self) -> bool {
        matches!(self, Status::Verified | Status::Attested)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditMode {
    /// Reads files only; never runs package code.
    Static,
    /// May run the declared test commands.
    Execute,
}

impl FromStr for AuditMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(AuditMode::Static),
            "execute" => Ok(AuditMode::Execute),
            other => Err(format!("unknown audit mode {other:?} (expected static or execute)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyCheckResult {
    pub policy: PolicyId,
    pub status: Status,
    pub evidence: Vec<String>,
    pub severity: Severity,
}

impl PolicyCheckResult {
    pub fn new(policy: PolicyId, status: Status, evidence: Vec<String>) -> Self {
        PolicyCheckResult {
            policy,
            status,
            evidence,
            severity: policy.severity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageRef {
    pub name: PackageName,
    pub version: Version,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub package: PackageRef,
    pub results: Vec<PolicyCheckResult>,
    pub xsdk_compatible: bool,
}

impl ComplianceReport {
    /// Sorts `results` by policy and derives the verdict.
    pub fn new(package: PackageRef, mut results: Vec<PolicyCheckResult>) -> Self {
        results.sort_by_key(|r| r.policy);
        let xsdk_compatible = compatible(&results);
        ComplianceReport {
            package,
            results,
            xsdk_compatible,
        }
    }

    pub fn result(&self, policy: PolicyId) -> Option<&PolicyCheckResult> {
        self.results.iter().find(|r| r.policy == policy)
    }

    pub fn failed(&self) -> impl Iterator<Item = &PolicyCheckResult> {
        self.results.iter().filter(|r| r.status == Status::Failed)
    }
}

pub fn compatible(results: &[PolicyCheckResult]) -> bool {
    results
        .iter()
        .filter(|r| r.severity == Severity::Mandatory)
        .all(|r| r.status.satisfies())
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Execution(#[from] ExecError),
    #[error("execute mode requires an install prefix")]
    MissingInstallPrefix,
}

/// Everything one audit reads. Nothing in it is modified during the audit.
pub struct AuditContext<'a> {
    pub manifest: &'a PackageManifest,
    pub source_root: PathBuf,
    pub install_prefix: Option<PathBuf>,
    pub mode: AuditMode,
    /// Needed for R5; without it R5 falls back to attestation.
    pub registry: Option<&'a Registry>,
    pub config: AuditConfig,
    pub executor: &'a dyn CommandExecutor,
}

impl AuditContext<'_> {
    fn check_coherent(&self) -> Result<(), AuditError> {
        if self.mode == AuditMode::Execute && self.install_prefix.is_none() {
            return Err(AuditError::MissingInstallPrefix);
        }
        Ok(())
    }
}

/// Runs all 19 checks concurrently and assembles the sorted report.
pub fn audit_package(ctx: &AuditContext<'_>) -> Result<ComplianceReport, AuditError> {
    ctx.check_coherent()?;
    let results = std::thread::scope(|s| {
        let handles: Vec<_> = PolicyId::ALL
            .into_iter()
            .map(|p| s.spawn(move || run_policy_check(p, ctx)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("policy check panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(ComplianceReport::new(
        PackageRef {
            name: ctx.manifest.name.clone(),
            version: ctx.manifest.version.clone(),
        },
        results,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

pub fn render_report(rep: &ComplianceReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(rep).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Text => {
            let mut out = format!("{} {}\n", rep.package.name, rep.package.version);
            for r in &rep.results {
                let row = match (r.status, r.evidence.first()) {
                    (Status::Attested, None) => format!("{:<4}attested (see manifest)", r.policy.as_str()),
                    (status, first) => format!(
                        "{:<4}{:<16}{}",
                        r.policy.as_str(),
                        status.as_str(),
                        first.map(String::as_str).unwrap_or("")
                    ),
                };
                out.push_str(row.trim_end());
                out.push('\n');
            }
            out.push_str(&format!(
                "xSDK compatible: {}\n",
                if rep.xsdk_compatible { "yes" } else { "no" }
            ));
            out
        }
    }
}

pub fn parse_report(text: &str) -> Result<ComplianceReport, serde_json::Error> {
    serde_json::from_str(text)
}
