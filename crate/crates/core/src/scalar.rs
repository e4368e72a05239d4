//! Floating-point abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type used by feature matrices, imputation, tree ensembles and
/// metrics. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Width in bytes, recorded in serialized models.
    const BYTES: u8;

    fn of(v: f64) -> Self;

    fn f64(self) -> f64;
}

macro_rules! impl_scalar {
    ($t:ty, $bytes:expr) => {
        impl Scalar for $t {
            const BYTES: u8 = $bytes;

            #[inline]
            fn of(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f32, 4);
impl_scalar!(f64, 8);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_f64() {
        assert_eq!(f32::of(0.25).f64(), 0.25);
        assert_eq!(f64::of(1e-300).f64(), 1e-300);
        assert_eq!(<f32 as Scalar>::BYTES, 4);
    }
}
