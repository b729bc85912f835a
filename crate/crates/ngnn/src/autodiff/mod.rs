//! Dense tensors and reverse-mode automatic differentiation.
//!
//! The engine is deliberately small: 64-bit floats, row-major dense storage,
//! explicit shapes with no broadcasting beyond scalar-times-tensor, and a
//! per-forward-pass tape that is discarded after `backward`. That is enough to
//! express every forward computation in this crate and obtain exact gradients.

mod tape;
mod tensor;

pub mod gradcheck;

pub use tape::{Grads, Tape, Var};
pub use tensor::Tensor;

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable ln(1 + e^x).
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// max(slope * x, x) with slope in (0, 1).
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Slope of the leaky rectifier used throughout the model.
pub const LEAKY_SLOPE: f64 = 0.01;
