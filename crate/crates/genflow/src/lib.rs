//! Service layer over `genflow-core`: an [`engine::Engine`] bound to a
//! managed data directory, a job pool, an HTTP router and the CLI.

pub mod artifacts;
pub mod engine;
pub mod http;
pub mod jobs;

pub use engine::{Engine, EngineError};
pub use http::{router, AppState};
