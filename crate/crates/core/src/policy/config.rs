use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_FILE_NAME: &str = "audit.config.json";

/// Environment variable naming an `audit.config.json` to load.
pub const CONFIG_ENV_VAR: &str = "ECOFORGE_CONFIG";

pub const DEFAULT_PRINT_PATTERNS: &[&str] = &[
    "printf(",
    "fprintf(stdout",
    "fprintf(stderr",
    "std::cout",
    "std::cerr",
    "print *,",
    "write(*",
];

pub const DEFAULT_LICENSE_ALLOWLIST: &[&str] = &[
    "BSD-2-Clause",
    "BSD-3-Clause",
    "MIT",
    "Apache-2.0",
    "LGPL-2.1-or-later",
    "LGPL-2.1+",
    "LGPL-3.0-or-later",
    "LGPL-3.0+",
    "GPL-2.0-or-later",
    "GPL-2.0+",
    "GPL-3.0-or-later",
    "GPL-3.0+",
    "MPL-2.0",
];

pub const DEFAULT_MPI_EXCLUDE_DIRS: &[&str] = &["tests", "examples", "docs"];
pub const DEFAULT_PRINT_EXCLUDE_DIRS: &[&str] = &["tests", "examples"];
pub const DEFAULT_MEMCHECK_PREFIX: &str = "valgrind --error-exitcode=1 --leak-check=full";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid audit config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Contents of `audit.config.json`; every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m3_exclude_dirs: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m7_license_allowlist: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m11_patterns: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m11_exclude_dirs: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2_memcheck_prefix: Option<String>,
}

/// Effective audit settings after applying overrides to the defaults.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditConfig {
    pub mpi_exclude_dirs: Vec<String>,
    pub license_allowlist: Vec<String>,
    pub print_patterns: Vec<String>,
    pub print_exclude_dirs: Vec<String>,
    pub memcheck_prefix: String,
}

fn owned(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            mpi_exclude_dirs: owned(DEFAULT_MPI_EXCLUDE_DIRS),
            license_allowlist: owned(DEFAULT_LICENSE_ALLOWLIST),
            print_patterns: owned(DEFAULT_PRINT_PATTERNS),
            print_exclude_dirs: owned(DEFAULT_PRINT_EXCLUDE_DIRS),
            memcheck_prefix: DEFAULT_MEMCHECK_PREFIX.to_string(),
        }
    }
}

impl From<AuditConfigFile> for AuditConfig {
    fn from(file: AuditConfigFile) -> Self {
        let d = AuditConfig::default();
        AuditConfig {
            mpi_exclude_dirs: file.m3_exclude_dirs.unwrap_or(d.mpi_exclude_dirs),
            license_allowlist: file.m7_license_allowlist.unwrap_or(d.license_allowlist),
            print_patterns: file.m11_patterns.unwrap_or(d.print_patterns),
            print_exclude_dirs: file.m11_exclude_dirs.unwrap_or(d.print_exclude_dirs),
            memcheck_prefix: file.r2_memcheck_prefix.unwrap_or(d.memcheck_prefix),
        }
    }
}

impl AuditConfig {
    pub fn parse(text: &str, origin: &str) -> Result<AuditConfig, ConfigError> {
        let file: AuditConfigFile = serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_string(),
            source,
        })?;
        Ok(file.into())
    }

    pub fn load(path: &Path) -> Result<AuditConfig, ConfigError> {
        let origin = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: origin.clone(),
            source,
        })?;
        Self::parse(&text, &origin)
    }

    pub fn license_allowed(&self, license: &str) -> bool {
        let license = license.trim();
        self.license_allowlist
            .iter()
            .any(|l| l.eq_ignore_ascii_case(license))
    }
}
