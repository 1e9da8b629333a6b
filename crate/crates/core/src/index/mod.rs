//! In-process vector store with exact cosine search.
//!
//! Records live in a map keyed by workflow id behind a reader-writer lock, so
//! searches never observe a half-applied upsert. Search is an exhaustive
//! scan: every record at or above the threshold that passes the filter is
//! returned, best first, ties broken by ascending id.

mod persist;

use std::collections::BTreeMap;
use std::sync::RwLock;

use crate::embedding::{cosine, EmbedError, EmbeddingVector};
use crate::scalar::Real;

pub use persist::{IndexFileError, INDEX_MAGIC, INDEX_VERSION};

pub const DEFAULT_THRESHOLD: f64 = 0.30;
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowRecord<T> {
    pub id: String,
    /// Joined form of the cleaned description.
    pub clean_text: String,
    pub embedding: EmbeddingVector<T>,
    pub likes: u64,
    pub source: String,
    pub name: String,
    pub description: String,
}

/// Metadata predicate applied before ranking.
pub type RecordFilter<'a, T> = &'a dyn Fn(&WorkflowRecord<T>) -> bool;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit<T> {
    pub record: WorkflowRecord<T>,
    pub similarity: T,
}

#[derive(Debug)]
pub struct VectorIndex<T> {
    dimension: usize,
    records: RwLock<BTreeMap<String, WorkflowRecord<T>>>,
}

impl<T: Real> VectorIndex<T> {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            records: RwLock::new(BTreeMap::new()),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.records.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Insert or replace the record with the same id.
    pub fn upsert(&self, record: WorkflowRecord<T>) -> Result<(), EmbedError> {
        if record.embedding.dimension() != self.dimension {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dimension,
                actual: record.embedding.dimension(),
            });
        }
        self.records.write().unwrap().insert(record.id.clone(), record);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<WorkflowRecord<T>> {
        self.records.read().unwrap().get(id).cloned()
    }

    pub fn remove(&self, id: &str) -> Option<WorkflowRecord<T>> {
        self.records.write().unwrap().remove(id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.read().unwrap().keys().cloned().collect()
    }

    /// Snapshot of all records in id order.
    pub fn records(&self) -> Vec<WorkflowRecord<T>> {
        self.records.read().unwrap().values().cloned().collect()
    }

    pub fn search(
        &self,
        query: &EmbeddingVector<T>,
        threshold: T,
        k: usize,
        filter: Option<RecordFilter<'_, T>>,
    ) -> Vec<SearchHit<T>> {
        if !query.is_normalized() || query.dimension() != self.dimension {
            return Vec::new();
        }
        let records = self.records.read().unwrap();
        // map iteration is by id, so the stable sort leaves ties in id order
        let mut hits: Vec<SearchHit<T>> = records
            .values()
            .filter(|r| filter.is_none_or(|f| f(r)))
            .filter_map(|r| {
                let sim = cosine(query, &r.embedding).ok()?;
                (sim >= threshold).then(|| SearchHit {
                    record: r.clone(),
                    similarity: sim,
                })
            })
            .collect();
        hits.sort_by(|a, b| b.similarity.partial_cmp(&a.similarity).expect("similarities are finite"));
        hits.truncate(k);
        hits
    }
}
