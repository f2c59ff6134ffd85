//! Command templates with `{prefix}`, `{dep_dir:<name>}`, `{debug}` and
//! `{64bit}` placeholders. `{{` and `}}` stand for literal braces.

use std::fmt;

use thiserror::Error;

use crate::manifest::PackageName;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Placeholder {
    Prefix,
    DepDir(PackageName),
    Debug,
    SixtyFourBit,
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Placeholder::Prefix => f.write_str("{prefix}"),
            Placeholder::DepDir(name) => write!(f, "{{dep_dir:{name}}}"),
            Placeholder::Debug => f.write_str("{debug}"),
            Placeholder::SixtyFourBit => f.write_str("{64bit}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Literal(String),
    Placeholder(Placeholder),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unknown placeholder {{{0}}}")]
    UnknownPlaceholder(String),
    #[error("unterminated placeholder starting at byte {0}")]
    Unterminated(usize),
    #[error("unmatched '}}' at byte {0}")]
    UnmatchedClose(usize),
    #[error("placeholder {0} has no binding")]
    Unbound(Placeholder),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    segments: Vec<Segment>,
}

impl Template {
    pub fn parse(text: &str) -> Result<Template, TemplateError> {
        let mut segments = Vec::new();
        let mut literal = String::new();
        let mut chars = text.char_indices().peekable();
        while let Some((i, ch)) = chars.next() {
            match ch {
                '{' if matches!(chars.peek(), Some((_, '{'))) => {
                    chars.next();
                    literal.push('{');
                }
                '}' if matches!(chars.peek(), Some((_, '}'))) => {
                    chars.next();
                    literal.push('}');
                }
                '}' => return Err(TemplateError::UnmatchedClose(i)),
                '{' => {
                    let rest = &text[i + 1..];
                    let end = rest.find('}').ok_or(TemplateError::Unterminated(i))?;
                    let body = &rest[..end];
                    if !literal.is_empty() {
                        segments.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    segments.push(Segment::Placeholder(parse_placeholder(body)?));
                    // skip the body and the closing brace
                    for _ in 0..body.chars().count() + 1 {
                        chars.next();
                    }
                }
                _ => literal.push(ch),
            }
        }
        if !literal.is_empty() {
            segments.push(Segment::Literal(literal));
        }
        Ok(Template { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &Placeholder> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Placeholder(p) => Some(p),
            Segment::Literal(_) => None,
        })
    }

    pub fn references(&self, placeholder: &Placeholder) -> bool {
        self.placeholders().any(|p| p == placeholder)
    }

    /// Substitutes every placeholder through `bind`; a `None` binding is an error.
    pub fn expand<F>(&self, mut bind: F) -> Result<String, TemplateError>
    where
        F: FnMut(&Placeholder) -> Option<String>,
    {
        let mut out = String::new();
        for segment in &self.segments {
            match segment {
                Segment::Literal(text) => out.push_str(text),
                Segment::Placeholder(p) => {
                    let value = bind(p).ok_or_else(|| TemplateError::Unbound(p.clone()))?;
                    out.push_str(&value);
                }
            }
        }
        Ok(out)
    }
}

fn parse_placeholder(body: &str) -> Result<Placeholder, TemplateError> {
    match body {
        "prefix" => Ok(Placeholder::Prefix),
        "debug" => Ok(Placeholder::Debug),
        "64bit" => Ok(Placeholder::SixtyFourBit),
        _ => body
            .strip_prefix("dep_dir:")
            .and_then(|name| name.parse::<PackageName>().ok())
            .map(Placeholder::DepDir)
            .ok_or_else(|| TemplateError::UnknownPlaceholder(body.to_string())),
    }
}
