//! Workflow retrieval and orchestration engine.
//!
//! A corpus of node-graph workflows is cleaned, embedded and indexed; natural
//! language queries are answered by similarity search blended with
//! popularity; missing node packs and model checkpoints are resolved from a
//! local registry or fetched; and workflows run on a deterministic
//! topological executor. When nothing in the index matches, a supervised pair
//! of agents explores a simulated web site for a workflow.
//!
//! Numeric code is generic over [`scalar::Real`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`.

pub mod agents;
pub mod assets;
pub mod config;
pub mod embedding;
pub mod hashing;
pub mod index;
pub mod ingest;
pub mod merge;
pub mod pilot;
pub mod scalar;
pub mod workflow;

pub use scalar::Real;

pub type BBox = merge::BBox<f64>;
pub type DetectedElement = merge::DetectedElement<f64>;
pub type MergeConfig = merge::MergeConfig<f64>;
pub type EmbeddingVector = embedding::EmbeddingVector<f64>;
pub type VectorIndex = index::VectorIndex<f64>;
pub type WorkflowRecord = index::WorkflowRecord<f64>;
pub type SearchHit = index::SearchHit<f64>;
pub type PilotConfig = pilot::PilotConfig<f64>;
pub type RankedResult = pilot::RankedResult<f64>;
pub type PilotOutcome = pilot::PilotOutcome<f64>;
