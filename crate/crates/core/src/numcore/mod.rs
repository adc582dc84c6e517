//! Dense `f64` tensors, a reverse-mode tape over the layer set used by the
//! decoding networks, and the Adam optimizer.

mod adam;
pub mod kernels;
mod param;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig};
pub use kernels::SAFE_LOG_FLOOR;
pub use param::{ParamId, ParamStore, Parameter};
pub use tape::{LeafGrads, Mode, RunningStats, Tape, Var};
pub use tensor::Tensor;
