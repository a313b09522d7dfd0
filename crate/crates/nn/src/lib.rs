//! Small neural classifiers on raw ECG windows, trained with a tape-based
//! reverse-mode autodiff.

pub mod graph;
pub mod input;
pub mod net;
pub mod tensor;
pub mod train;

pub use input::{prepare_raw_input, to_tensor};
pub use net::{Arch, NetConfig, Network, Optimizer};
pub use tensor::Tensor;
pub use train::{train, TrainReport};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("checkpoint error: {0}")]
    Persistence(String),
}
