//! Natural-language workflow retrieval: clean the query the same way corpus
//! descriptions are cleaned, embed it, take every record above the
//! similarity threshold, blend similarity with popularity, and hand the list
//! to a curator. When nothing clears the threshold the caller gets a
//! [`FallbackSignal`] to start web exploration.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbedError, Embedder};
use crate::index::{SearchHit, VectorIndex, DEFAULT_K, DEFAULT_THRESHOLD};
use crate::ingest::{CleanText, Preprocessor};
use crate::scalar::Real;

pub const DEFAULT_ALPHA: f64 = 0.7;
pub const DEFAULT_SNIPPET_CHARS: usize = 240;

#[derive(Debug, Error, PartialEq)]
pub enum PilotError {
    #[error("query is empty after cleaning")]
    EmptyQueryAfterCleaning,
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotConfig<T> {
    pub threshold: T,
    pub k: usize,
    pub alpha: T,
    pub snippet_chars: usize,
}

impl<T: Real> Default for PilotConfig<T> {
    fn default() -> Self {
        Self {
            threshold: T::of(DEFAULT_THRESHOLD),
            k: DEFAULT_K,
            alpha: T::of(DEFAULT_ALPHA),
            snippet_chars: DEFAULT_SNIPPET_CHARS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PilotQuery {
    pub text: String,
    #[serde(default)]
    pub k: Option<usize>,
}

impl PilotQuery {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            k: None,
        }
    }
}

/// Emitted when no stored workflow clears the threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackSignal {
    pub query: String,
    pub clean_query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult<T> {
    pub workflow_id: String,
    pub name: String,
    pub snippet: String,
    pub similarity: T,
    pub likes: u64,
    pub score: T,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PilotOutcome<T> {
    Results(Vec<RankedResult<T>>),
    Fallback(FallbackSignal),
}

/// A search hit with its popularity and blended score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredHit<T> {
    pub hit: SearchHit<T>,
    pub popularity: T,
    pub score: T,
}

/// `score = alpha * similarity + (1 - alpha) * popularity`, where popularity
/// is `ln(1 + likes) / ln(1 + max likes)` over the hits (0 if every hit has
/// zero likes). Sorted by score, then likes (desc), then id.
pub fn rank_results<T: Real>(hits: Vec<SearchHit<T>>, alpha: T) -> Vec<ScoredHit<T>> {
    let max_likes = hits.iter().map(|h| h.record.likes).max().unwrap_or(0);
    let denom = T::of(max_likes as f64).ln_1p();
    let mut scored: Vec<ScoredHit<T>> = hits
        .into_iter()
        .map(|hit| {
            let popularity = if max_likes == 0 {
                T::zero()
            } else {
                T::of(hit.record.likes as f64).ln_1p() / denom
            };
            let score = alpha * hit.similarity + (T::one() - alpha) * popularity;
            ScoredHit { hit, popularity, score }
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| b.hit.record.likes.cmp(&a.hit.record.likes))
            .then_with(|| a.hit.record.id.cmp(&b.hit.record.id))
    });
    scored
}

/// Cut `text` to at most `max_chars` characters without splitting a word.
pub fn snippet(text: &str, max_chars: usize) -> String {
    let text = text.trim();
    if text.chars().count() <= max_chars {
        return text.to_string();
    }
    let cut = text.char_indices().nth(max_chars).map_or(text.len(), |(i, _)| i);
    let head = &text[..cut];
    let next_is_space = text[cut..].starts_with(char::is_whitespace);
    let kept = if next_is_space {
        head
    } else {
        head.rfind(char::is_whitespace).map_or(head, |i| &head[..i])
    };
    kept.trim_end().to_string()
}

#[derive(Debug, Error)]
#[error("curator failed: {0}")]
pub struct CuratorError(pub String);

/// Final refinement and validation of ranked hits.
pub trait Curator<T>: Send + Sync {
    fn curate(
        &self,
        query: &CleanText,
        ranked: &[ScoredHit<T>],
        snippet_chars: usize,
    ) -> Result<Vec<RankedResult<T>>, CuratorError>;
}

/// Keeps order, drops hits sharing no token with the query, and formats
/// description snippets.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultCurator;

impl<T: Real> Curator<T> for DefaultCurator {
    fn curate(
        &self,
        query: &CleanText,
        ranked: &[ScoredHit<T>],
        snippet_chars: usize,
    ) -> Result<Vec<RankedResult<T>>, CuratorError> {
        Ok(ranked
            .iter()
            .filter(|s| CleanText::from_joined(&s.hit.record.clean_text).overlap(query) > 0)
            .enumerate()
            .map(|(i, s)| RankedResult {
                workflow_id: s.hit.record.id.clone(),
                name: s.hit.record.name.clone(),
                snippet: snippet(&s.hit.record.description, snippet_chars),
                similarity: s.hit.similarity,
                likes: s.hit.record.likes,
                score: s.score,
                rank: i + 1,
            })
            .collect())
    }
}

/// Run `curator`, degrading to [`DefaultCurator`] if it fails.
pub fn curate<T: Real>(
    query: &CleanText,
    ranked: &[ScoredHit<T>],
    curator: &dyn Curator<T>,
    snippet_chars: usize,
) -> Vec<RankedResult<T>> {
    match curator.curate(query, ranked, snippet_chars) {
        Ok(results) => results,
        Err(e) => {
            log::warn!("{e}; using default curator");
            DefaultCurator
                .curate(query, ranked, snippet_chars)
                .expect("default curator is infallible")
        }
    }
}

/// Everything a search needs, borrowed.
pub struct Pilot<'a, T> {
    pub preprocessor: &'a Preprocessor,
    pub embedder: &'a dyn Embedder<T>,
    pub index: &'a VectorIndex<T>,
    pub curator: &'a dyn Curator<T>,
    pub config: PilotConfig<T>,
}

impl<T: Real> Pilot<'_, T> {
    pub fn search(&self, query: &PilotQuery) -> Result<PilotOutcome<T>, PilotError> {
        let clean = self.preprocessor.clean(&query.text);
        if clean.is_empty() {
            return Err(PilotError::EmptyQueryAfterCleaning);
        }
        let embedding = self.embedder.embed(&clean)?;
        let k = query.k.unwrap_or(self.config.k).max(1);
        let hits = self.index.search(&embedding, self.config.threshold, k, None);
        if hits.is_empty() {
            return Ok(PilotOutcome::Fallback(FallbackSignal {
                query: query.text.clone(),
                clean_query: clean.joined(),
            }));
        }
        let ranked = rank_results(hits, self.config.alpha);
        Ok(PilotOutcome::Results(curate(
            &clean,
            &ranked,
            self.curator,
            self.config.snippet_chars,
        )))
    }
}

/// Free-function form of [`Pilot::search`].
pub fn pilot_search<T: Real>(query: &PilotQuery, pilot: &Pilot<'_, T>) -> Result<PilotOutcome<T>, PilotError> {
    pilot.search(query)
}
