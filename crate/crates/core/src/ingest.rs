//! Turning crawled workflow descriptions into embedding-ready text.
//!
//! [`Preprocessor::clean`] runs a fixed sequence of stages: strip HTML tags,
//! drop URLs, e-mail addresses and `#`/`@` tokens, drop non-ASCII, lowercase,
//! turn punctuation into spaces, tokenize, remove stopwords and rejoin. Every
//! removal leaves a space behind, so removing something never glues two
//! neighbouring words together.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbedError, Embedder};
use crate::index::{VectorIndex, WorkflowRecord};
use crate::scalar::Real;

/// Stopword list bundled with the crate.
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

static HTML_TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^>]*>").unwrap());
// scheme://..., www...., and any leftover token mentioning http (broken links)
static URL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)[a-z][a-z0-9+.\-]*://\S*|\bwww\.\S*|\S*http\S*").unwrap()
});
static EMAIL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[A-Za-z0-9._%+\-]+@[A-Za-z0-9.\-]+\.[A-Za-z]{2,}").unwrap());
static SOCIAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:^|\s)[#@]\S*").unwrap());

static DEFAULT_PREPROCESSOR: LazyLock<Preprocessor> = LazyLock::new(Preprocessor::default);

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("document has an empty workflow id")]
    EmptyId,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("cannot read stopwords from {path}: {cause}")]
    Stopwords { path: String, cause: String },
    #[error("malformed corpus document: {0}")]
    Malformed(String),
}

/// Cleaned, tokenized text. Tokens are `[a-z0-9]+` and never stopwords.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct CleanText {
    tokens: Vec<String>,
}

impl CleanText {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_set(&self) -> HashSet<&str> {
        self.tokens.iter().map(String::as_str).collect()
    }

    /// Number of distinct tokens shared with `other`.
    pub fn overlap(&self, other: &CleanText) -> usize {
        let mine = self.token_set();
        other.token_set().intersection(&mine).count()
    }

    /// Rebuild from an already-clean joined string, as stored in the index.
    pub fn from_joined(joined: &str) -> Self {
        Self {
            tokens: joined.split_whitespace().map(str::to_string).collect(),
        }
    }
}

impl fmt::Display for CleanText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.joined())
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessor {
    stopwords: HashSet<String>,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self::from_stopword_list(DEFAULT_STOPWORDS)
    }
}

impl Preprocessor {
    /// One token per line; blank lines and `#` comments are ignored.
    pub fn from_stopword_list(list: &str) -> Self {
        let stopwords = list
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { stopwords }
    }

    pub fn from_stopword_file(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::Stopwords {
            path: path.display().to_string(),
            cause: e.to_string(),
        })?;
        Ok(Self::from_stopword_list(&text))
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn clean(&self, raw: &str) -> CleanText {
        let text = HTML_TAG.replace_all(raw, " ");
        let text = URL.replace_all(&text, " ");
        let text = EMAIL.replace_all(&text, " ");
        let text = SOCIAL.replace_all(&text, " ");
        let ascii: String = text
            .chars()
            .map(|c| if c.is_ascii() { c } else { ' ' })
            .collect();
        let lowered = ascii.to_ascii_lowercase();
        let spaced: String = lowered
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { ' ' })
            .collect();
        let tokens = spaced
            .split_whitespace()
            .filter(|t| !self.is_stopword(t))
            .map(str::to_string)
            .collect();
        CleanText { tokens }
    }
}

/// Clean text with the bundled stopword list.
pub fn preprocess_text(raw: &str) -> CleanText {
    DEFAULT_PREPROCESSOR.clean(raw)
}

/// A crawled corpus entry (`{"id", "description", "likes", "source"}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    #[serde(default)]
    pub name: Option<String>,
    pub description: String,
    #[serde(default)]
    pub likes: u64,
    #[serde(default)]
    pub source: String,
}

impl RawDocument {
    pub fn parse(bytes: &[u8]) -> Result<Self, IngestError> {
        serde_json::from_slice(bytes).map_err(|e| IngestError::Malformed(e.to_string()))
    }

    pub fn from_workflow(wf: &crate::workflow::Workflow, source: impl Into<String>) -> Self {
        Self {
            id: wf.id.clone(),
            name: Some(wf.name.clone()),
            description: wf.description.clone(),
            likes: wf.likes,
            source: source.into(),
        }
    }
}

/// Clean, embed and upsert one document. Returns the stored workflow id.
pub fn ingest_record<T: Real>(
    doc: &RawDocument,
    preprocessor: &Preprocessor,
    embedder: &dyn Embedder<T>,
    index: &VectorIndex<T>,
) -> Result<String, IngestError> {
    if doc.id.is_empty() {
        return Err(IngestError::EmptyId);
    }
    let clean = preprocessor.clean(&doc.description);
    let embedding = embedder.embed(&clean)?;
    index.upsert(WorkflowRecord {
        id: doc.id.clone(),
        clean_text: clean.joined(),
        embedding,
        likes: doc.likes,
        source: doc.source.clone(),
        name: doc.name.clone().unwrap_or_else(|| doc.id.clone()),
        description: doc.description.clone(),
    })?;
    Ok(doc.id.clone())
}
