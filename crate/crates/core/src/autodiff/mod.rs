//! Reverse-mode automatic differentiation on a flat tape.
//!
//! Ops append nodes to a [`Tape`] and hand back [`Var`] indices; `backward`
//! replays the tape once in reverse, accumulating gradients. The op set is
//! exactly what the recurrent translation models need, nothing speculative.

mod gradcheck;
mod params;
mod scalar;
mod tape;
mod tensor;

pub use gradcheck::{central_difference, grad_check, max_relative_error};
pub use params::{ParamId, Params};
pub use scalar::Scalar;
pub use tape::{Tape, Var};
pub use tensor::Tensor;
