//! Word-level surprisal and attention statistics from decoder-only language
//! models, behavioral memory analysis for cloze data, and a surprisal-gated
//! external memory for long-text inference.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precisions used by the command-line tool.

pub mod analysis;
pub mod behavior;
pub mod embeddings;
pub mod error;
pub mod memory;
pub mod model;
pub mod scalar;
pub mod seed;
pub mod selftest;
pub mod stats;
pub mod surprisal;
pub mod tokenizer;

pub use error::{Error, ErrorCategory, Result};
pub use scalar::Scalar;

/// Transformer with 32-bit weights and activations.
pub type Model = model::Model<f32>;
pub type ForwardOutput = model::ForwardOutput<f32>;
/// Embedding table in 64-bit precision.
pub type EmbeddingTable = embeddings::EmbeddingTable<f64>;
pub type Design = stats::Design<f64>;
pub type MemoryStore = memory::MemoryStore<f32>;
pub type MemoryEntry = memory::MemoryEntry<f32>;
