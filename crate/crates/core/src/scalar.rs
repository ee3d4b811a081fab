//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the models and solver are generic over.
///
/// Implemented for `f32` and `f64`. Everything the crate ships as a default
/// (tolerances, iteration caps) is tuned for `f64`; `f32` works for coarse
/// tolerances only.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

/// Numerically stable `ln(sum(exp(a_i)))` via the max shift.
///
/// Returns `-inf` for an empty slice.
pub fn log_sum_exp<T: Real>(terms: &[T]) -> T {
    let max = terms.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let sum: T = terms.iter().map(|&a| (a - max).exp()).sum();
    max + sum.ln()
}

/// `ln(e^u - 1)` for `u > 0`, accurate at both ends of the range.
pub fn log_expm1<T: Real>(u: T) -> T {
    if u < T::one() {
        u.exp_m1().ln()
    } else {
        u + (-(-u).exp()).ln_1p()
    }
}
