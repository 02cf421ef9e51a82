//! Exact rational scalars, parsing, serialization, and the extended value
//! domain used for thresholds.
//!
//! Every quantity the auction reasons about (times, values, prices, ratios)
//! is a [`Rational`]. The wire format is always the canonical reduced
//! fraction "p/q", including "1/1" for integers, so that equal outputs are
//! byte-equal. The parser is more permissive on input and accepts plain
//! integers ("7", "-3") and finite decimals ("0.25"), both converted
//! exactly.
//!
//! Thresholds live in the extended domain: a threshold of infinity means the
//! item is not for sale yet. [`Extended`] keeps that case out of the
//! arithmetic type, and the order `Finite(_) < Infinite` matches the
//! mechanism's reading of prices.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;

pub type Rational = num_rational::BigRational;

/// Shorthand for small rational constants.
pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Errors from [`parse_rational`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid rational literal {0:?}")]
    Invalid(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

/// Parses "p/q", a plain integer, or a finite decimal, all exactly.
///
/// No whitespace, exponents, or special values; a zero denominator is an
/// error, not infinity.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    if text.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    let invalid = || ParseRationalError::Invalid(text.to_owned());
    let (sign, body) = match text.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, text.strip_prefix('+').unwrap_or(text)),
    };
    if body.is_empty() {
        return Err(invalid());
    }
    let parse_digits = |digits: &str| -> Result<BigInt, ParseRationalError> {
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(invalid());
        }
        digits.parse::<BigInt>().map_err(|_| invalid())
    };
    let magnitude = if let Some((num, den)) = body.split_once('/') {
        let numer = parse_digits(num)?;
        let denom = parse_digits(den)?;
        if denom.is_zero() {
            return Err(ParseRationalError::ZeroDenominator(text.to_owned()));
        }
        Rational::new(numer, denom)
    } else if let Some((whole, frac)) = body.split_once('.') {
        // Decimals are exact: "0.25" is 25/100 before reduction.
        let whole = if whole.is_empty() {
            BigInt::zero()
        } else {
            parse_digits(whole)?
        };
        let frac_digits = parse_digits(frac)?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        Rational::new(whole * &scale + frac_digits, scale)
    } else {
        Rational::from_integer(parse_digits(body)?)
    };
    Ok(if sign < 0 { -magnitude } else { magnitude })
}

/// Formats a rational as the canonical reduced fraction "p/q".
pub fn format_rational(value: &Rational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

/// Nearest f64, for Monte Carlo summaries and human-oriented output only.
pub fn rational_to_f64(value: &Rational) -> f64 {
    let numer = bigint_to_f64(value.numer());
    let denom = bigint_to_f64(value.denom());
    numer / denom
}

fn bigint_to_f64(value: &BigInt) -> f64 {
    // Via string to keep the dependency surface small; values here are tiny.
    value.to_string().parse::<f64>().unwrap_or(f64::NAN)
}

/// Serde adapter for a required rational field.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Rational, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(de)?;
        parse_rational(&text).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Option<Rational>`.
pub mod serde_rational_opt {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Option<Rational>, ser: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => ser.serialize_some(&format_rational(v)),
            None => ser.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Option<Rational>, D::Error> {
        let text = Option::<String>::deserialize(de)?;
        text.map(|t| parse_rational(&t).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// Serde adapter for `Vec<Rational>`.
pub mod serde_rational_seq {
    use super::*;

    pub fn serialize<S: Serializer>(values: &[Rational], ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_seq(values.iter().map(format_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<Rational>, D::Error> {
        let texts = Vec::<String>::deserialize(de)?;
        texts
            .iter()
            .map(|t| parse_rational(t).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// A value extended with a single point at positive infinity.
///
/// `Finite(v) < Infinite` for every `v`, and finite values compare as usual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extended<V> {
    Finite(V),
    Infinite,
}

impl<V> Extended<V> {
    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn as_finite(&self) -> Option<&V> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }
}

impl<V: Ord> PartialOrd for Extended<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<V: Ord> Ord for Extended<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => a.cmp(b),
            (Extended::Finite(_), Extended::Infinite) => Ordering::Less,
            (Extended::Infinite, Extended::Finite(_)) => Ordering::Greater,
            (Extended::Infinite, Extended::Infinite) => Ordering::Equal,
        }
    }
}

/// Posted threshold: a finite price or "not for sale yet".
pub type Threshold = Extended<Rational>;

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{}", format_rational(v)),
            Extended::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let text = String::deserialize(de)?;
        if text == "inf" {
            Ok(Extended::Infinite)
        } else {
            parse_rational(&text)
                .map(Extended::Finite)
                .map_err(serde::de::Error::custom)
        }
    }
}

/// True when the bid meets the threshold, with infinity never met.
pub fn meets_threshold(bid: &Rational, threshold: &Threshold) -> bool {
    match threshold {
        Extended::Finite(t) => bid >= t,
        Extended::Infinite => false,
    }
}

/// Exact nonnegative check used by input validation.
pub fn is_nonnegative(value: &Rational) -> bool {
    !value.is_negative()
}

/// 1/1, handy when building ratios.
pub fn one() -> Rational {
    Rational::one()
}

/// 0/1.
pub fn zero() -> Rational {
    Rational::zero()
}
