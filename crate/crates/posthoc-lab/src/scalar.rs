//! Arithmetic backends and extended nonnegative reals.
//!
//! Every quantity in this crate is generic over a [`Scalar`]: exact rationals
//! (`num::BigRational`) for audits where zero tolerance is required, or `f64`
//! for large sweeps. The backend is selected per scenario.
//!
//! [`Ext`] adjoins a single `+inf` to the scalar line. Infinity is absorbing
//! under addition; multiplication follows the measure-theoretic convention
//! `0 * inf = 0`, which is what expectations over null sets need.

use std::cmp::Ordering;
use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{FromPrimitive, One, Pow, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Which arithmetic backend a scalar type provides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Rational,
    Double,
}

impl Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Rational => write!(f, "rational"),
            Backend::Double => write!(f, "double"),
        }
    }
}

/// Comparison tolerance for the double backend. The rational backend is exact.
pub const DOUBLE_TOL: f64 = 1e-12;

/// A number usable as probability mass, level, loss or score.
pub trait Scalar:
    Clone
    + PartialEq
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
    + Signed
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    const BACKEND: Backend;

    fn from_ratio(numer: i64, denom: i64) -> Self;

    /// Backend equality: exact for rationals, `DOUBLE_TOL`-relative for doubles.
    fn approx_eq(&self, other: &Self) -> bool;

    /// Strict total order. Panics on NaN, which no constructor admits.
    fn cmp_num(&self, other: &Self) -> Ordering;

    /// `q`-th root when it is exactly representable in the backend.
    ///
    /// Under doubles every nonnegative value reports an (inexact) root; under
    /// rationals `None` marks an irrational root.
    fn nth_root_exact(&self, q: u32) -> Option<Self>;

    /// Parse a decimal or scientific literal. Exact under the rational
    /// backend, so `"0.01"` becomes `1/100`, not a binary approximation.
    fn parse_decimal(text: &str) -> Result<Self>;

    fn to_json(&self) -> Value;

    /// Accepts JSON numbers, `"p/q"` strings and decimal strings.
    fn parse_json(value: &Value) -> Result<Self>;

    /// Order with backend equality collapsed to `Equal`.
    fn cmp_eps(&self, other: &Self) -> Ordering {
        if self.approx_eq(other) {
            Ordering::Equal
        } else {
            self.cmp_num(other)
        }
    }

    fn le_eps(&self, other: &Self) -> bool {
        self.cmp_eps(other) != Ordering::Greater
    }

    fn ge_eps(&self, other: &Self) -> bool {
        self.cmp_eps(other) != Ordering::Less
    }

    fn approx_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Splits `text` into mantissa/exponent and returns `(digits, sign, pow10)`
/// where the represented value is `sign * digits * 10^pow10`.
fn split_decimal(text: &str) -> Result<(String, bool, i64)> {
    let text = text.trim();
    let err = || Error::NumberParse(text.to_string());
    if text.is_empty() {
        return Err(err());
    }
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = text[pos + 1..].parse().map_err(|_| err())?;
            (&text[..pos], exp)
        }
        None => (text, 0),
    };
    let (negative, digits_part) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits_part.find('.') {
        Some(pos) => (&digits_part[..pos], &digits_part[pos + 1..]),
        None => (digits_part, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{int_part}{frac_part}");
    let pow10 = exp - frac_part.len() as i64;
    Ok((digits, negative, pow10))
}

impl Scalar for BigRational {
    const BACKEND: Backend = Backend::Rational;

    fn from_ratio(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        BigRational::new(BigInt::from(numer), BigInt::from(denom))
    }

    fn approx_eq(&self, other: &Self) -> bool {
        self == other
    }

    fn cmp_num(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }

    fn nth_root_exact(&self, q: u32) -> Option<Self> {
        if self.is_negative() {
            return None;
        }
        let rn = self.numer().nth_root(q);
        let rd = self.denom().nth_root(q);
        if Pow::pow(&rn, q) == *self.numer() && Pow::pow(&rd, q) == *self.denom() {
            Some(BigRational::new(rn, rd))
        } else {
            None
        }
    }

    fn parse_decimal(text: &str) -> Result<Self> {
        let (digits, negative, pow10) = split_decimal(text)?;
        let mut numer =
            BigInt::from_str(&digits).map_err(|_| Error::NumberParse(text.to_string()))?;
        if negative {
            numer = -numer;
        }
        let ten = BigInt::from(10);
        let (numer, denom) = if pow10 >= 0 {
            (numer * Pow::pow(&ten, pow10 as u64), BigInt::one())
        } else {
            (numer, Pow::pow(&ten, (-pow10) as u64))
        };
        Ok(BigRational::new(numer, denom))
    }

    fn to_json(&self) -> Value {
        Value::String(self.to_string())
    }

    fn parse_json(value: &Value) -> Result<Self> {
        match value {
            Value::String(s) => {
                if s.contains('/') {
                    BigRational::from_str(s).map_err(|_| Error::NumberParse(s.clone()))
                } else {
                    Self::parse_decimal(s)
                }
            }
            // serde_json's arbitrary_precision feature preserves the literal
            // digits, so decimals re-parse exactly.
            Value::Number(n) => Self::parse_decimal(&n.to_string()),
            other => Err(Error::NumberParse(other.to_string())),
        }
    }
}

impl Scalar for f64 {
    const BACKEND: Backend = Backend::Double;

    fn from_ratio(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        numer as f64 / denom as f64
    }

    fn approx_eq(&self, other: &Self) -> bool {
        let scale = 1f64.max(self.abs()).max(other.abs());
        (self - other).abs() <= DOUBLE_TOL * scale
    }

    fn cmp_num(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).expect("non-finite scalar in comparison")
    }

    fn nth_root_exact(&self, q: u32) -> Option<Self> {
        if *self < 0.0 {
            None
        } else {
            Some(self.powf(1.0 / f64::from(q)))
        }
    }

    fn parse_decimal(text: &str) -> Result<Self> {
        text.trim()
            .parse::<f64>()
            .map_err(|_| Error::NumberParse(text.to_string()))
    }

    fn to_json(&self) -> Value {
        serde_json::Number::from_f64(*self)
            .map(Value::Number)
            .unwrap_or_else(|| Value::String(self.to_string()))
    }

    fn parse_json(value: &Value) -> Result<Self> {
        match value {
            Value::Number(n) => n
                .as_f64()
                .ok_or_else(|| Error::NumberParse(n.to_string())),
            Value::String(s) => match s.split_once('/') {
                Some((num, den)) => {
                    let num: f64 = Self::parse_decimal(num)?;
                    let den: f64 = Self::parse_decimal(den)?;
                    if den == 0.0 {
                        return Err(Error::NumberParse(s.clone()));
                    }
                    Ok(num / den)
                }
                None => Self::parse_decimal(s),
            },
            other => Err(Error::NumberParse(other.to_string())),
        }
    }
}

/// Integer power by repeated multiplication; exponents here are tiny.
pub fn powi<S: Scalar>(base: &S, q: u32) -> S {
    let mut acc = S::one();
    for _ in 0..q {
        acc = acc * base.clone();
    }
    acc
}

/// The scalar line extended with a single `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub enum Ext<S> {
    Finite(S),
    Infinity,
}

impl<S: Scalar> Ext<S> {
    pub fn zero() -> Self {
        Ext::Finite(S::zero())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Ext::Infinity)
    }

    pub fn as_finite(&self) -> Option<&S> {
        match self {
            Ext::Finite(v) => Some(v),
            Ext::Infinity => None,
        }
    }

    pub fn expect_finite(&self) -> Result<&S> {
        self.as_finite().ok_or(Error::UnboundedProfile)
    }

    pub fn add(&self, other: &Self) -> Self {
        match (self, other) {
            (Ext::Finite(a), Ext::Finite(b)) => Ext::Finite(a.clone() + b.clone()),
            _ => Ext::Infinity,
        }
    }

    /// Multiplication with `0 * inf = 0`.
    pub fn mul(&self, other: &Self) -> Self {
        match (self, other) {
            (Ext::Finite(a), Ext::Finite(b)) => Ext::Finite(a.clone() * b.clone()),
            (Ext::Finite(a), Ext::Infinity) | (Ext::Infinity, Ext::Finite(a)) => {
                if a.is_zero() {
                    Ext::zero()
                } else {
                    debug_assert!(!a.is_negative(), "infinity scaled by a negative value");
                    Ext::Infinity
                }
            }
            (Ext::Infinity, Ext::Infinity) => Ext::Infinity,
        }
    }

    pub fn scale(&self, factor: &S) -> Self {
        self.mul(&Ext::Finite(factor.clone()))
    }

    pub fn cmp_ext(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Ext::Infinity, Ext::Infinity) => Ordering::Equal,
            (Ext::Infinity, Ext::Finite(_)) => Ordering::Greater,
            (Ext::Finite(_), Ext::Infinity) => Ordering::Less,
            (Ext::Finite(a), Ext::Finite(b)) => a.cmp_eps(b),
        }
    }

    pub fn le_ext(&self, other: &Self) -> bool {
        self.cmp_ext(other) != Ordering::Greater
    }

    pub fn pow(&self, q: u32) -> Self {
        match self {
            Ext::Finite(v) => Ext::Finite(powi(v, q)),
            Ext::Infinity => Ext::Infinity,
        }
    }

    pub fn approx_f64(&self) -> f64 {
        match self {
            Ext::Finite(v) => v.approx_f64(),
            Ext::Infinity => f64::INFINITY,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Ext::Finite(v) => v.to_json(),
            Ext::Infinity => Value::String("inf".into()),
        }
    }

    pub fn parse_json(value: &Value) -> Result<Self> {
        if let Value::String(s) = value {
            if s == "inf" {
                return Ok(Ext::Infinity);
            }
        }
        Ok(Ext::Finite(S::parse_json(value)?))
    }
}

impl<S: Scalar> Display for Ext<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ext::Finite(v) => Display::fmt(v, f),
            Ext::Infinity => write!(f, "inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type R = BigRational;

    fn r(n: i64, d: i64) -> R {
        R::from_ratio(n, d)
    }

    #[test]
    fn decimal_parse_is_exact() {
        assert_eq!(R::parse_decimal("0.01").unwrap(), r(1, 100));
        assert_eq!(R::parse_decimal("1.1").unwrap(), r(11, 10));
        assert_eq!(R::parse_decimal("-2.5e2").unwrap(), r(-250, 1));
        assert_eq!(R::parse_decimal("3").unwrap(), r(3, 1));
        assert_eq!(R::parse_decimal("1e-3").unwrap(), r(1, 1000));
        assert!(R::parse_decimal("abc").is_err());
        assert!(R::parse_decimal("").is_err());
    }

    #[test]
    fn json_roundtrip_rational() {
        let v = r(29, 300);
        let json = v.to_json();
        assert_eq!(R::parse_json(&json).unwrap(), v);
        // JSON decimal literals are read exactly, not through f64.
        let parsed: Value = serde_json::from_str("0.01").unwrap();
        assert_eq!(R::parse_json(&parsed).unwrap(), r(1, 100));
    }

    #[test]
    fn json_parse_double_accepts_fraction_strings() {
        let v = f64::parse_json(&Value::String("3/4".into())).unwrap();
        assert!(v.approx_eq(&0.75));
    }

    #[test]
    fn nth_root_detects_perfect_powers() {
        assert_eq!(r(9, 4).nth_root_exact(2), Some(r(3, 2)));
        assert_eq!(r(2, 1).nth_root_exact(2), None);
        assert_eq!(r(27, 8).nth_root_exact(3), Some(r(3, 2)));
    }

    #[test]
    fn ext_arithmetic_conventions() {
        let zero: Ext<R> = Ext::zero();
        assert_eq!(zero.mul(&Ext::Infinity), Ext::zero());
        assert_eq!(Ext::Finite(r(1, 2)).mul(&Ext::Infinity), Ext::Infinity);
        assert_eq!(Ext::Finite(r(1, 2)).add(&Ext::Infinity), Ext::<R>::Infinity);
        assert!(Ext::Finite(r(5, 1)).cmp_ext(&Ext::Infinity) == Ordering::Less);
    }

    #[test]
    fn double_tolerance_treats_nearby_as_equal() {
        assert!(1.0f64.approx_eq(&(1.0 + 1e-13)));
        assert!(!1.0f64.approx_eq(&(1.0 + 1e-9)));
    }
}
