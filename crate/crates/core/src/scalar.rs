use std::fmt::{Debug, Display};
use std::ops::Neg;

use num_traits::{FromPrimitive, Num};

/// Coefficient field of every class, state and operator matrix.
///
/// The engine only needs field operations; anything exact (`BigRational`,
/// `Rational64`) gives exact answers, while floats are accepted for quick
/// numerical experiments.
pub trait Scalar:
    Clone + Num + Neg<Output = Self> + FromPrimitive + Debug + Display + Send + Sync + 'static
{
    fn from_int(n: i64) -> Self {
        Self::from_i64(n).expect("scalar type cannot represent a small integer")
    }

    /// `self` if `negate` is false, `-self` otherwise.
    fn signed(self, negate: bool) -> Self {
        if negate {
            -self
        } else {
            self
        }
    }
}

impl<T> Scalar for T where
    T: Clone + Num + Neg<Output = T> + FromPrimitive + Debug + Display + Send + Sync + 'static
{
}

/// `(-1)^n` as a boolean "negate" flag.
#[inline]
pub(crate) fn odd(n: i64) -> bool {
    n.rem_euclid(2) == 1
}
