//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! The encoder, the DCT decoder and the interpolation code are written once
//! against [`Scalar`] and instantiated with `f64` for everyday work and with
//! the 256-bit binary float [`Wide`] when the privacy noise is many orders of
//! magnitude above the data (shares of size `1e46` carrying results of size
//! `1e20` need roughly 35 significant digits to decode).

use std::fmt::{Debug, Display};
use std::ops::Neg;

use num_traits::{Float, FloatConst, Num};

/// 256-bit IEEE-style binary float (237-bit significand, ~71 decimal digits).
#[allow(non_camel_case_types)]
pub type Wide = f256::f256;

/// Real scalar usable by the coding and decoding routines.
pub trait Scalar:
    Num + Copy + PartialOrd + Neg<Output = Self> + Debug + Display + Default + Send + Sync + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn pi() -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    /// Machine epsilon of the representation.
    fn epsilon() -> Self;

    fn from_usize(n: usize) -> Self {
        Self::from_f64(n as f64)
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn is_finite_value(self) -> bool {
        self.to_f64().is_finite()
    }
}

macro_rules! impl_native {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn from_f64(x: f64) -> Self {
                x as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn pi() -> Self {
                <$t as FloatConst>::PI()
            }
            #[inline]
            fn cos(self) -> Self {
                Float::cos(self)
            }
            #[inline]
            fn sqrt(self) -> Self {
                Float::sqrt(self)
            }
            #[inline]
            fn abs(self) -> Self {
                Float::abs(self)
            }
            #[inline]
            fn epsilon() -> Self {
                <$t as Float>::epsilon()
            }
        }
    };
}

impl_native!(f32);
impl_native!(f64);

impl Scalar for Wide {
    #[inline]
    fn from_f64(x: f64) -> Self {
        Wide::from(x)
    }

    fn to_f64(self) -> f64 {
        if self.is_nan() {
            return f64::NAN;
        }
        if self.is_infinite() {
            return if self.is_sign_negative() {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            };
        }
        // value = (-1)^sign * significand * 2^exp with a 256-bit significand
        let (sign, exp, (hi, lo)) = self.as_sign_exp_signif();
        let significand = hi as f64 * 2f64.powi(128) + lo as f64;
        let half = exp / 2;
        let v = significand * 2f64.powi(half) * 2f64.powi(exp - half);
        if sign == 1 {
            -v
        } else {
            v
        }
    }

    #[inline]
    fn pi() -> Self {
        f256::consts::PI
    }

    #[inline]
    fn cos(self) -> Self {
        Wide::cos(&self)
    }

    #[inline]
    fn sqrt(self) -> Self {
        Wide::sqrt(self)
    }

    #[inline]
    fn abs(self) -> Self {
        Wide::abs(&self)
    }

    #[inline]
    fn epsilon() -> Self {
        Wide::EPSILON
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wide_round_trips_through_f64() {
        for x in [0.0, 1.0, -2.5, 1e23, -3.75e-200, 1e300, 6.02214076e23] {
            assert_eq!(Wide::from_f64(x).to_f64(), x);
        }
    }

    #[test]
    fn wide_carries_more_digits_than_f64() {
        let big = Wide::from_f64(1e46);
        let small = Wide::from_f64(0.125);
        let diff = (big + small) - big;
        assert_eq!(diff.to_f64(), 0.125);
        assert_eq!((1e46f64 + 0.125) - 1e46, 0.0);
    }

    #[test]
    fn wide_cosine_matches_f64() {
        let x = (Wide::pi() / Wide::from_f64(42.0)).cos();
        assert!((x.to_f64() - (std::f64::consts::PI / 42.0).cos()).abs() < 1e-16);
    }
}
