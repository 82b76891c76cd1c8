//! Structural code embeddings for Solidity.
//!
//! Source files are parsed into ASTs, serialized into per-fragment token
//! streams, normalized, embedded with trained token vectors and compared by a
//! normalized Euclidean similarity. On top of that sit corpus clone detection,
//! clone-related bug scanning against a bug database and single-contract
//! validation.

pub mod detectors;
pub mod digest;
pub mod embedding;
pub mod error;
pub mod frontend;
pub mod ingestion;
pub mod normalizer;
pub mod similarity;
pub mod store;
pub mod synthetic;

pub use error::{Error, Result};
