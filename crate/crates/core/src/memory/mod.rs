//! External memory for a language model: encoding (write gate), storage
//! (capacity and eviction) and retrieval (exact nearest neighbors plus
//! interpolation with the model distribution).

mod eval;
mod gate;
mod interpolate;
mod store;

pub use eval::{eval_long_text, eval_tokens, EvalConfig, EvalReport, PositionNll};
pub use gate::{write_gate, EncodingPolicy, RunningStats};
pub use interpolate::{interpolate, Interpolated};
pub use store::{MemoryEntry, MemoryStore, Metric, Neighbor, StoreMode};
