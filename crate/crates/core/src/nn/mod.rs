//! A small dense network with reverse-mode gradients, the optimizer and
//! checkpoint I/O.

mod adam;
mod checkpoint;
mod model;
mod tape;
mod tensor;

pub use adam::{adam_step, OptimizerConfig};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointHeader, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{forward, Architecture, ForwardPass, ModelParams, ParamGrads, Parameter, HEAD_WIDTH};
pub use tape::{logistic, Tape, TapeGrads, Var};
pub use tensor::Tensor;
