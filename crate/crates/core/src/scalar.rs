//! Scalar abstraction shared by the fusion math.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Floating point type the filter and fusion code is generic over.
///
/// Implemented for `f32` and `f64`. Everything in the crate that touches
/// densities, weights or divergences is written against this trait; the
/// simulator fixes it to `f64`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + Send + Sync
{
    /// Converts an `f64` literal. Never fails for the implemented types.
    fn lit(x: f64) -> Self;

    fn infinity() -> Self;

    fn neg_infinity() -> Self;

    fn as_f64(self) -> f64;

    fn finite(self) -> bool {
        self.as_f64().is_finite()
    }

    /// `max(tol, 8 ε)`, so f64 tolerances stay meaningful in `f32`.
    fn tol(tol: f64) -> Self {
        Self::lit(tol).max(Self::default_epsilon() * Self::lit(8.0))
    }
}

macro_rules! impl_real {
    ($f:ty) => {
        impl Real for $f {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $f
            }

            #[inline]
            fn infinity() -> Self {
                <$f>::INFINITY
            }

            #[inline]
            fn neg_infinity() -> Self {
                <$f>::NEG_INFINITY
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// `ln(Σ exp(x_i))` without overflow. Returns `-inf` for an empty slice or
/// when every term is `-inf`.
pub fn log_sum_exp<T: Real>(values: &[T]) -> T {
    let max = values
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    if !max.finite() {
        return max;
    }
    let sum = values
        .iter()
        .fold(T::zero(), |acc, &v| acc + (v - max).exp());
    max + sum.ln()
}
