//! Scalar abstraction shared by the predicate functionals and the estimators.
//!
//! The numeric kernels are written once against [`Scalar`] and instantiated
//! with `f64` for search, `f32` where memory matters, and exact
//! [`BigRational`] when a result has to be certified.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive};

pub trait Scalar: Num + Clone + Debug + PartialOrd + Signed + Send + Sync {
    /// Converts a finite `f64`. Exact for rational scalars.
    fn from_f64(x: f64) -> Option<Self>;

    fn to_f64(&self) -> f64;

    fn from_ratio(num: i64, den: i64) -> Self;

    /// `true` when `self` equals `other` up to rounding slack `tol`.
    /// Exact scalars ignore `tol` and compare exactly.
    fn near(&self, other: &Self, tol: f64) -> bool;
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_f64(x: f64) -> Option<Self> {
                x.is_finite().then_some(x as $t)
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }

            fn from_ratio(num: i64, den: i64) -> Self {
                (num as f64 / den as f64) as $t
            }

            fn near(&self, other: &Self, tol: f64) -> bool {
                ((*self - *other).abs() as f64) <= tol
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

impl Scalar for BigRational {
    fn from_f64(x: f64) -> Option<Self> {
        BigRational::from_float(x)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn near(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }
}

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum<T, I>(values: I) -> T
where
    T: num_traits::Float,
    I: IntoIterator<Item = T>,
{
    let mut sum = T::zero();
    let mut comp = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp = comp + ((sum - t) + v);
        } else {
            comp = comp + ((v - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

/// Mean and population variance with compensated accumulation.
pub fn mean_and_variance<T: num_traits::Float>(values: &[T]) -> (T, T) {
    if values.is_empty() {
        return (T::nan(), T::nan());
    }
    let n = T::from(values.len()).unwrap();
    let mean = compensated_sum(values.iter().copied()) / n;
    let var = compensated_sum(values.iter().map(|&v| (v - mean) * (v - mean))) / n;
    (mean, var)
}
