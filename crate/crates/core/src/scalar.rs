//! Numeric back ends.
//!
//! Every engine is generic over [`Scalar`]. Two implementations exist:
//! [`BigRational`] for exact arithmetic, where all comparisons are exact and
//! results are reproducible bit-for-bit, and `f64` for speed, where
//! comparisons go through an explicit tolerance.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};

/// Arithmetic requirements shared by every solver.
pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Num + Signed + Send + Sync + 'static
{
    /// `true` for arbitrary-precision rationals.
    const EXACT: bool;

    fn from_ratio(r: &BigRational) -> Self;

    fn to_ratio(&self) -> BigRational;

    fn to_f64(&self) -> f64;

    fn from_u64(v: u64) -> Self;

    /// Comparison slack used when none is configured: zero for exact types.
    fn default_tolerance() -> Self;

    /// Largest integer not exceeding `self`; `None` when negative or not finite.
    fn floor_u64(&self) -> Option<u64>;

    fn from_usize(v: usize) -> Self {
        Self::from_u64(v as u64)
    }

    fn half() -> Self {
        Self::one() / Self::from_u64(2)
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_ratio(r: &BigRational) -> Self {
        r.clone()
    }

    fn to_ratio(&self) -> BigRational {
        self.clone()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_u64(v: u64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn default_tolerance() -> Self {
        BigRational::zero()
    }

    fn floor_u64(&self) -> Option<u64> {
        if self.is_negative() {
            return None;
        }
        self.floor().to_integer().to_u64()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_ratio(r: &BigRational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }

    fn to_ratio(&self) -> BigRational {
        BigRational::from_float(*self).unwrap_or_else(BigRational::zero)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_u64(v: u64) -> Self {
        v as f64
    }

    fn default_tolerance() -> Self {
        1e-9
    }

    fn floor_u64(&self) -> Option<u64> {
        if !self.is_finite() || *self < 0.0 {
            return None;
        }
        Some(self.floor() as u64)
    }
}

/// `a <= b` up to `tol`.
#[inline]
pub fn approx_le<T: Scalar>(a: &T, b: &T, tol: &T) -> bool {
    *a <= b.clone() + tol.clone()
}

/// `a < b` by more than `tol`.
#[inline]
pub fn definitely_lt<T: Scalar>(a: &T, b: &T, tol: &T) -> bool {
    a.clone() + tol.clone() < *b
}

#[inline]
pub fn approx_eq<T: Scalar>(a: &T, b: &T, tol: &T) -> bool {
    (a.clone() - b.clone()).abs() <= *tol
}

#[inline]
pub fn approx_zero<T: Scalar>(a: &T, tol: &T) -> bool {
    a.abs() <= *tol
}

/// Parses `a/b`, an integer, or a plain decimal (`0.35`, `1e-3`) into an
/// exact rational. Decimals are converted digit-for-digit, never through a
/// binary float.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    if let Some((num, den)) = text.split_once('/') {
        let num = BigInt::from_str(num.trim()).ok()?;
        let den = BigInt::from_str(den.trim()).ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(BigInt::from_str(&digits).ok()?);
    let scale = exponent - frac_part.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    let factor = num_traits::pow(ten, scale.unsigned_abs() as usize);
    if scale >= 0 {
        value *= factor;
    } else {
        value /= factor;
    }
    if negative {
        value = -value;
    }
    Some(value)
}

/// Renders a rational as `a/b`, or just `a` when the denominator is one.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Exact fractions for rationals, shortest round-trip decimals for floats.
pub fn format_scalar<T: Scalar>(v: &T) -> String {
    if T::EXACT {
        format_rational(&v.to_ratio())
    } else {
        format!("{}", v.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn parses_fractions_and_decimals_exactly() {
        assert_eq!(parse_rational("1/2"), Some(q(1, 2)));
        assert_eq!(parse_rational("0.35"), Some(q(7, 20)));
        assert_eq!(parse_rational("3"), Some(q(3, 1)));
        assert_eq!(parse_rational(".5"), Some(q(1, 2)));
        assert_eq!(parse_rational("1e-4"), Some(q(1, 10_000)));
        assert_eq!(parse_rational("-2.5E1"), Some(q(-25, 1)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational("."), None);
    }

    #[test]
    fn floor_and_format() {
        assert_eq!(q(7, 2).floor_u64(), Some(3));
        assert_eq!(q(-1, 2).floor_u64(), None);
        assert_eq!(3.99f64.floor_u64(), Some(3));
        assert_eq!(f64::INFINITY.floor_u64(), None);
        assert_eq!(format_rational(&q(4, 2)), "2");
        assert_eq!(format_rational(&q(63, 8)), "63/8");
    }
}
