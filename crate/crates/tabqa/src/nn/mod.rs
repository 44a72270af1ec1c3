//! Minimal reverse-mode differentiation and optimization kernel: everything
//! the two executors need and nothing more.

pub mod adadelta;
pub mod checkpoint;
pub mod gradcheck;
pub mod params;
pub mod tape;
pub mod tensor;

pub use adadelta::{adadelta_step, DEFAULT_EPS, DEFAULT_RHO};
pub use checkpoint::Checkpoint;
pub use gradcheck::{finite_diff_check, FiniteDiffReport};
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{NodeId, Tape, Target};
pub use tensor::Tensor;
