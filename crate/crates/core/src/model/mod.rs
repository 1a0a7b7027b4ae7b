//! Decoder-only transformer inference.

mod config;
mod init;
mod store;
mod transformer;

pub use config::{Gelu, ModelConfig};
pub use init::random_store;
pub use store::{Dtype, NamedTensorStore, Tensor};
pub use transformer::{log_sum_exp, softmax, ForwardOptions, ForwardOutput, Model};
