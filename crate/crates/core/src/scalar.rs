//! Floating-point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01, StandardNormal};
use serde::Serialize;

mod sealed {
    pub trait Sealed {}
    impl Sealed for f32 {}
    impl Sealed for f64 {}
}

/// f32 or f64.
///
/// Sampling helpers live on the trait so generic code does not need to carry
/// `Distribution<T>` bounds for every distribution it touches.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + 'static
    + sealed::Sealed
{
    /// Default gradient tolerance for the logistic solver.
    fn fit_tolerance() -> Self;

    fn std_exponential<R: Rng + ?Sized>(rng: &mut R) -> Self;
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
    /// Uniform on the open interval (0, 1).
    fn unit_open<R: Rng + ?Sized>(rng: &mut R) -> Self;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

macro_rules! impl_scalar {
    ($t:ty, $tol:expr) => {
        impl Scalar for $t {
            fn fit_tolerance() -> Self {
                $tol
            }
            fn std_exponential<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Exp1.sample(rng)
            }
            fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }
            fn unit_open<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Open01.sample(rng)
            }
        }
    };
}

impl_scalar!(f64, 1e-8);
impl_scalar!(f32, 1e-3);

/// Logistic function, written to avoid overflow for large |x|.
#[inline]
pub fn expit<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn logit<T: Scalar>(p: T) -> T {
    (p / (T::one() - p)).ln()
}
