use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point element type for tensors and parameters.
///
/// Verification code (gradient checks, acceptance oracles) runs in `f64`;
/// `f32` exists for cheap training runs. Random init always draws in `f64`
/// and converts, so both precisions see the same parameter stream.
pub trait Scalar: num_traits::Float + Sum + Debug + Display + Send + Sync + 'static {
    fn scalar_from_f64(x: f64) -> Self;
    fn scalar_to_f64(self) -> f64;
    /// Name stored in checkpoints so loads can refuse the wrong precision.
    const NAME: &'static str;
}

impl Scalar for f32 {
    fn scalar_from_f64(x: f64) -> Self {
        x as f32
    }
    fn scalar_to_f64(self) -> f64 {
        self as f64
    }
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    fn scalar_from_f64(x: f64) -> Self {
        x
    }
    fn scalar_to_f64(self) -> f64 {
        self
    }
    const NAME: &'static str = "f64";
}
