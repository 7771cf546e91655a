//! Probing authorship-style signal in text embeddings.
//!
//! The crate covers the whole pipeline: masking content words out of
//! documents, building author episodes, ranking targets for each query
//! episode, gating paraphrase pairs by similarity, and discriminating label
//! groups with ROC/EER/AUC summaries, plus the significance tests used to
//! compare conditions.

pub mod corpus;
pub mod discrimination;
pub mod embedding;
mod error;
pub mod masking;
pub mod par;
pub mod paraphrase;
pub mod ranking;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
