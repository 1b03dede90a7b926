//! Small dense-network engine: forward and analytic backward passes, Adam,
//! soft target updates and a binary checkpoint format.

mod adam;
mod checkpoint;
mod mlp;
mod scalar;

pub use adam::Adam;
pub use checkpoint::CHECKPOINT_VERSION;
pub use mlp::{mse_loss_and_grads, Mlp, Trace};
pub use scalar::Scalar;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NeuralError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("bad network shape: {0}")]
    Shape(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o: {0}")]
    Io(String),
}

#[cfg(test)]
mod tests;
