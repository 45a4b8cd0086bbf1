//! Scalar abstraction so the tabular machinery runs on `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar every probability, reward and entropy is expressed in.
pub trait Scalar:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum<Self>
    + ScalarOperand
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; panics only on values no float type can hold.
    fn cast(value: f64) -> Self {
        Self::from_f64(value).expect("f64 value representable in scalar type")
    }

    /// Lossless-enough view as `f64` for reporting and I/O.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar value representable as f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + Sum<T>
        + ScalarOperand
        + Debug
        + Display
        + Serialize
        + DeserializeOwned
        + Send
        + Sync
        + 'static
{
}

/// `x log x` with the `0 log 0 = 0` convention used by every entropy here.
pub fn xlogx<F: Scalar>(x: F) -> F {
    if x > F::zero() {
        x * x.ln()
    } else {
        F::zero()
    }
}

/// Shannon entropy (nats) of a nonnegative vector assumed to sum to one.
pub fn entropy_unchecked<F: Scalar>(weights: impl IntoIterator<Item = F>) -> F {
    -weights.into_iter().map(xlogx).sum::<F>()
}

/// Numerically stable `log sum exp` with the max-shift trick.
pub fn log_sum_exp<F: Scalar>(values: &[F]) -> F {
    let max = values
        .iter()
        .copied()
        .fold(F::neg_infinity(), |acc, v| acc.max(v));
    if !max.is_finite() {
        return max;
    }
    let sum = values.iter().map(|&v| (v - max).exp()).sum::<F>();
    max + sum.ln()
}
