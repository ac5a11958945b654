//! Scenario documents: parsing, validation, parameter overrides, the canned
//! catalog and the experiment procedures run on them.

mod catalog;
mod doc;
mod params;
mod runner;
mod validate;

use std::fmt;
use std::path::Path;

use thiserror::Error;

pub use catalog::{builtin, catalog, CatalogEntry};
pub use doc::*;
pub use params::{apply_param, ALIASES};
pub use runner::{resolve_out_dir, run_doc, run_once, Outcome, Point};
pub use validate::validate;

use crate::metrics::ExportError;
use crate::sim::SimError;

/// One problem found in a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    /// 1-based line in the source text, when known.
    pub line: Option<usize>,
    /// Dotted location inside the document, e.g. `links[2].b`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

fn join_issues(issues: &[Issue]) -> String {
    issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{}", join_issues(.0))]
    Invalid(Vec<Issue>),
    #[error("unknown scenario {name:?}; known scenarios: {}", .known.join(", "))]
    UnknownScenario { name: String, known: Vec<String> },
    #[error("parameter {key}: {message}")]
    Param { key: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl ScenarioError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Invalid(_) | ScenarioError::UnknownScenario { .. } | ScenarioError::Param { .. } => 1,
            ScenarioError::Io { .. } | ScenarioError::Export(_) | ScenarioError::Sim(_) => 2,
        }
    }

    fn single(path: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Invalid(vec![Issue {
            line: None,
            path: path.into(),
            message: message.into(),
        }])
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// Parses and validates a document.
pub fn parse(text: &str) -> Result<ScenarioDoc, ScenarioError> {
    let doc: ScenarioDoc = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_col(text, s.start).0);
        ScenarioError::Invalid(vec![Issue {
            line,
            path: String::new(),
            message: e.message().trim().to_string(),
        }])
    })?;
    let issues = validate(&doc);
    if issues.is_empty() {
        Ok(doc)
    } else {
        Err(ScenarioError::Invalid(
            issues
                .into_iter()
                .map(|mut i| {
                    i.line = i.line.or_else(|| locate(text, &i.path));
                    i
                })
                .collect(),
        ))
    }
}

/// Renders a document in the format accepted by [`parse`].
pub fn render(doc: &ScenarioDoc) -> String {
    toml::to_string(doc).expect("scenario documents always serialize")
}

pub fn load_file(path: &Path) -> Result<ScenarioDoc, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse(&text)
}

/// Resolves a catalog name or a file path.
pub fn load(name_or_path: &str) -> Result<Vec<ScenarioDoc>, ScenarioError> {
    if let Some(docs) = builtin(name_or_path) {
        return Ok(docs);
    }
    let p = Path::new(name_or_path);
    if p.exists() {
        return Ok(vec![load_file(p)?]);
    }
    Err(ScenarioError::UnknownScenario {
        name: name_or_path.to_string(),
        known: catalog().iter().map(|e| e.name.to_string()).collect(),
    })
}

fn split_segment(seg: &str) -> (&str, Option<usize>) {
    match seg.split_once('[') {
        Some((name, rest)) => (name, rest.trim_end_matches(']').parse().ok()),
        None => (seg, None),
    }
}

/// Best-effort line of a dotted path such as `sources[1].destinations[0].host`
/// in a document written with `[section]` and `[[array]]` headers.
pub fn locate(text: &str, path: &str) -> Option<usize> {
    if path.is_empty() {
        return None;
    }
    let lines: Vec<&str> = text.lines().collect();
    let header = |l: &str| {
        let t = l.trim();
        t.starts_with('[')
            .then(|| t.trim_matches(|c| c == '[' || c == ']').trim().to_string())
    };
    let mut start = 0usize;
    let mut end = lines.len();
    let mut found = None;
    let mut prefix = String::new();
    let segs: Vec<&str> = path.split('.').collect();
    for (k, seg) in segs.iter().enumerate() {
        let (name, idx) = split_segment(seg);
        let full = if prefix.is_empty() {
            name.to_string()
        } else {
            format!("{prefix}.{name}")
        };
        let last = k + 1 == segs.len();
        if let Some(i) = idx {
            let hit = (start..end).filter(|&n| lines[n].trim() == format!("[[{full}]]")).nth(i)?;
            let stop = (hit + 1..end)
                .find(|&n| header(lines[n]).is_some_and(|h| h == full || !h.starts_with(&format!("{full}."))))
                .unwrap_or(end);
            found = Some(hit + 1);
            start = hit + 1;
            end = stop;
        } else if last {
            let own_end = (start..end).find(|&n| header(lines[n]).is_some()).unwrap_or(end);
            let key = |l: &str| {
                let t = l.trim_start();
                t.strip_prefix(name).is_some_and(|r| r.trim_start().starts_with('='))
            };
            if let Some(n) = (start..own_end).find(|&n| key(lines[n])) {
                found = Some(n + 1);
            }
        } else if let Some(hit) = (start..end).find(|&n| lines[n].trim() == format!("[{full}]")) {
            let stop = (hit + 1..end)
                .find(|&n| header(lines[n]).is_some_and(|h| !h.starts_with(&format!("{full}."))))
                .unwrap_or(end);
            found = Some(hit + 1);
            start = hit + 1;
            end = stop;
        }
        prefix = full;
    }
    found
}
