//! Small dense networks: MLPs over a flat parameter buffer, reverse-mode
//! gradients, Adam, and a binary checkpoint container.

mod adam;
mod checkpoint;
mod mlp;
mod tensor;

pub use adam::{soft_update, Adam, AdamConfig};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use mlp::{Activation, ForwardCache, Gradients, Mlp, MlpSpec};
pub use tensor::Tensor;
