//! Line-oriented literal pattern scanning over a package source tree.

use std::fs;
use std::io;
use std::path::{Component, Path, PathBuf};

use walkdir::WalkDir;

/// Extensions treated as C/C++/Fortran sources, compared case-insensitively.
pub const SOURCE_EXTENSIONS: &[&str] = &["c", "h", "cc", "cpp", "hpp", "f", "f90"];

fn is_ident(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// A literal pattern. A pattern that starts (or ends) with an identifier
/// character only matches where the surrounding text does not continue the
/// identifier, so `printf(` does not fire on `snprintf(`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    text: String,
    whole_word: bool,
}

impl Pattern {
    /// Matches with a left identifier boundary only.
    pub fn literal(text: impl Into<String>) -> Self {
        Pattern {
            text: text.into(),
            whole_word: false,
        }
    }

    /// Matches a complete identifier token.
    pub fn token(text: impl Into<String>) -> Self {
        Pattern {
            text: text.into(),
            whole_word: true,
        }
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn matches_line(&self, line: &str) -> bool {
        if self.text.is_empty() {
            return false;
        }
        let starts_ident = self.text.starts_with(is_ident);
        let ends_ident = self.text.ends_with(is_ident);
        let mut from = 0;
        while let Some(pos) = line[from..].find(&self.text) {
            let start = from + pos;
            let end = start + self.text.len();
            let left_ok = !starts_ident || !line[..start].ends_with(is_ident);
            let right_ok = !self.whole_word || !ends_ident || !line[end..].starts_with(is_ident);
            if left_ok && right_ok {
                return true;
            }
            from = start + self.text.chars().next().map_or(1, char::len_utf8);
        }
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hit {
    /// Path relative to the scanned root, `/`-separated.
    pub path: String,
    /// 1-based line number.
    pub line: usize,
    pub pattern: String,
}

pub fn display_path(rel: &Path) -> String {
    rel.components()
        .filter_map(|c| match c {
            Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
            _ => None,
        })
        .collect::<Vec<_>>()
        .join("/")
}

/// True when any directory component of `rel` is one of `dirs`.
pub fn is_excluded(rel: &Path, dirs: &[String]) -> bool {
    let Some(parent) = rel.parent() else { return false };
    parent.components().any(|c| match c {
        Component::Normal(s) => dirs.iter().any(|d| s.to_str() == Some(d.as_str())),
        _ => false,
    })
}

pub fn has_source_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| SOURCE_EXTENSIONS.iter().any(|s| s.eq_ignore_ascii_case(e)))
        .unwrap_or(false)
}

/// Source files under `root`, relative and sorted.
pub fn source_files(root: &Path) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(io::Error::from)?;
        if entry.file_type().is_file() && has_source_extension(entry.path()) {
            let rel = entry.path().strip_prefix(root).expect("walk stays under root");
            out.push(rel.to_path_buf());
        }
    }
    Ok(out)
}

pub fn read_lossy(path: &Path) -> io::Result<String> {
    Ok(String::from_utf8_lossy(&fs::read(path)?).into_owned())
}

/// Every line of every listed file that matches one of `patterns`, in file
/// order then line order. A line matching several patterns yields one hit per
/// pattern.
pub fn scan(root: &Path, files: &[PathBuf], patterns: &[Pattern]) -> io::Result<Vec<Hit>> {
    let mut hits = Vec::new();
    for rel in files {
        let text = read_lossy(&root.join(rel))?;
        for (i, line) in text.lines().enumerate() {
            for p in patterns {
                if p.matches_line(line) {
                    hits.push(Hit {
                        path: display_path(rel),
                        line: i + 1,
                        pattern: p.as_str().to_string(),
                    });
                }
            }
        }
    }
    Ok(hits)
}
