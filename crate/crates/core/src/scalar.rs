//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used for probabilities, values and payoffs.
///
/// Implemented for `f32` and `f64`. Geometry tolerances are expressed
/// relative to the data, so `f32` works but loses most of the digits the
/// acceptance checks rely on; `f64` is the intended default.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + Debug
    + Display
    + LowerExp
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("usize representable")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Pairwise summation; result does not depend on thread scheduling when the
/// input order is fixed.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().fold(T::zero(), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe<T> {
    pub mean: T,
    pub se: T,
    pub count: usize,
}

impl<T: Real> MeanSe<T> {
    pub fn from_samples(xs: &[T]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: T::nan(),
                se: T::nan(),
                count: 0,
            };
        }
        let nt = T::from_usize_lossy(n);
        let mean = pairwise_sum(xs) / nt;
        if n == 1 {
            return Self {
                mean,
                se: T::zero(),
                count: 1,
            };
        }
        let dev: Vec<T> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&dev) / (nt - T::one());
        Self {
            mean,
            se: (var / nt).sqrt(),
            count: n,
        }
    }

    /// `|mean - target| <= k * se`.
    pub fn within(&self, target: T, k: T) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}
