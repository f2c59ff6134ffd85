//! Install-prefix layout rules: headers under `include/`, libraries under
//! `lib/`, everything else under `include/`, `lib/`, `bin/` or `share/`.
//!
//! `lib64/` is deliberately not accepted.

use std::fmt;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::scan::display_path;

const ALLOWED_TOP_DIRS: &[&str] = &["include", "lib", "bin", "share"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutRule {
    HeaderOutsideInclude,
    LibraryOutsideLib,
    StrayFile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutViolation {
    /// Path relative to the prefix, `/`-separated.
    pub path: String,
    pub rule: LayoutRule,
}

impl fmt::Display for LayoutViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rule {
            LayoutRule::HeaderOutsideInclude => write!(f, "header outside include/: {}", self.path),
            LayoutRule::LibraryOutsideLib => write!(f, "library outside lib/: {}", self.path),
            LayoutRule::StrayFile => write!(
                f,
                "file outside include/, lib/, bin/ and share/: {}",
                self.path
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InstallLayout {
    /// Every installed header, wherever it sits.
    pub headers: Vec<String>,
    pub libraries: Vec<String>,
    pub violations: Vec<LayoutViolation>,
}

pub fn is_header(file_name: &str) -> bool {
    [".h", ".hpp", ".mod"].iter().any(|ext| file_name.ends_with(ext))
}

pub fn is_library(file_name: &str) -> bool {
    let Some(stem) = file_name.strip_prefix("lib") else { return false };
    stem.ends_with(".a")
        || stem.ends_with(".dylib")
        || stem.ends_with(".so")
        || stem.contains(".so.")
}

/// Walks `prefix` and classifies every installed file.
pub fn inspect_install(prefix: &Path) -> io::Result<InstallLayout> {
    let mut layout = InstallLayout::default();
    for entry in WalkDir::new(prefix).sort_by_file_name() {
        let entry = entry.map_err(io::Error::from)?;
        if entry.file_type().is_dir() {
            continue;
        }
        let rel = entry.path().strip_prefix(prefix).expect("walk stays under prefix");
        let path = display_path(rel);
        let top = path.split('/').next().unwrap_or_default();
        let nested = path.contains('/');
        let name = entry.file_name().to_string_lossy();

        let rule = if is_header(&name) {
            layout.headers.push(path.clone());
            (!(nested && top == "include")).then_some(LayoutRule::HeaderOutsideInclude)
        } else if is_library(&name) {
            layout.libraries.push(path.clone());
            (!(nested && top == "lib")).then_some(LayoutRule::LibraryOutsideLib)
        } else {
            (!(nested && ALLOWED_TOP_DIRS.contains(&top))).then_some(LayoutRule::StrayFile)
        };
        if let Some(rule) = rule {
            layout.violations.push(LayoutViolation { path, rule });
        }
    }
    Ok(layout)
}
