//! Tensor storage, deterministic randomness, and the SGD update rule.

pub mod rng;
pub mod sgd;
pub mod tensor;

pub use rng::Rng;
pub use sgd::{sgd_step, sgd_step_inplace, SgdConfig};
pub use tensor::{tensor_elementwise, ElementwiseOp, Tensor};
