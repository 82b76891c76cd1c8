use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::{SourceId, SourceUnit, Span};
use crate::normalizer::{extract_fragments, Granularity, TokenStream};

/// A known buggy pattern: one or more normalized statement streams.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugRecord {
    pub bug_id: String,
    pub category: String,
    pub statement_streams: Vec<TokenStream>,
    pub description: String,
    pub provenance: String,
}

/// Row key of the bug matrix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BugRowId {
    pub bug_id: String,
    pub statement: usize,
}

/// Catalog entry as written by hand: statements are Solidity source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub bug_id: String,
    pub category: String,
    pub description: String,
    pub provenance: String,
    pub statements: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugCatalog {
    pub categories: Vec<String>,
    pub bugs: Vec<CatalogEntry>,
}

const BUILTIN: &str = include_str!("../../data/bug_catalog.json");

impl BugCatalog {
    /// The sample catalog shipped with the crate.
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN).expect("shipped catalog is valid JSON")
    }

    pub fn from_json(text: &str, file: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::corrupt(file, e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// Parses and normalizes every entry's statements.
    pub fn compile(&self) -> Result<Vec<BugRecord>> {
        self.bugs
            .iter()
            .map(|e| {
                if !self.categories.contains(&e.category) {
                    return Err(Error::InvalidBug {
                        bug_id: e.bug_id.clone(),
                        reason: format!("unknown category '{}'", e.category),
                    });
                }
                let mut streams = Vec::new();
                for s in &e.statements {
                    streams.extend(compile_statements(s).map_err(|reason| Error::InvalidBug {
                        bug_id: e.bug_id.clone(),
                        reason,
                    })?);
                }
                if streams.is_empty() {
                    return Err(Error::InvalidBug {
                        bug_id: e.bug_id.clone(),
                        reason: "no statements".into(),
                    });
                }
                Ok(BugRecord {
                    bug_id: e.bug_id.clone(),
                    category: e.category.clone(),
                    statement_streams: streams,
                    description: e.description.clone(),
                    provenance: e.provenance.clone(),
                })
            })
            .collect()
    }
}

/// Normalized streams of the top-level statements in a snippet of function
/// body source.
pub fn compile_statements(snippet: &str) -> std::result::Result<Vec<TokenStream>, String> {
    let text = format!("contract BugSnippet {{ function snippet() public {{\n{snippet}\n}} }}");
    let ex = extract_fragments(&SourceUnit::new(SourceId(0), "snippet", text));
    if let Some(d) = ex.diagnostics.iter().find(|d| d.is_error()) {
        return Err(format!("line {}: {}", d.line.saturating_sub(1), d.message));
    }
    let mut out = Vec::new();
    let mut last: Option<Span> = None;
    for f in ex.fragments {
        if f.granularity != Granularity::Statement {
            continue;
        }
        if last.is_some_and(|s| s.encloses(&f.span)) {
            continue;
        }
        last = Some(f.span);
        out.push(f.stream);
    }
    Ok(out)
}
