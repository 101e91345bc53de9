//! Exact rational helpers.
//!
//! Thresholds are carried as `Ratio<i64>` and serialized as `"num/den"`
//! strings (integers print without the `/1`).

use num_rational::Ratio;
use num_traits::ToPrimitive;
use thiserror::Error;

pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RationalError {
    #[error("cannot parse {0:?} as a rational")]
    Parse(String),
    #[error("value {0} is not finite")]
    NotFinite(f64),
    #[error("value {0} does not fit an i64 rational")]
    Overflow(f64),
}

/// Converts a float through its shortest round-trip decimal form, so `0.1`
/// becomes exactly `1/10` rather than the binary expansion of the double.
pub fn from_f64(x: f64) -> Result<Rational, RationalError> {
    if !x.is_finite() {
        return Err(RationalError::NotFinite(x));
    }
    let text = format!("{x}");
    parse_decimal(&text).ok_or(RationalError::Overflow(x))
}

fn parse_decimal(text: &str) -> Option<Rational> {
    let (negative, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let mut numer: i64 = 0;
    let mut denom: i64 = 1;
    for ch in int_part.chars().chain(frac_part.chars()) {
        let d = ch.to_digit(10)? as i64;
        numer = numer.checked_mul(10)?.checked_add(d)?;
    }
    for _ in 0..frac_part.len() {
        denom = denom.checked_mul(10)?;
    }
    let r = Rational::new(numer, denom);
    Some(if negative { -r } else { r })
}

/// Parses `"num/den"`, an integer, or a decimal literal.
pub fn parse(text: &str) -> Result<Rational, RationalError> {
    let t = text.trim();
    let err = || RationalError::Parse(text.to_string());
    if let Some((num, den)) = t.split_once('/') {
        let num: i64 = num.trim().parse().map_err(|_| err())?;
        let den: i64 = den.trim().parse().map_err(|_| err())?;
        if den == 0 {
            return Err(err());
        }
        return Ok(Rational::new(num, den));
    }
    parse_decimal(t).ok_or_else(err)
}

pub fn format(r: &Rational) -> String {
    r.to_string()
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Serde adapter writing a rational as its `"num/den"` string.
pub mod as_string {
    use super::Rational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        super::parse(&text).map_err(serde::de::Error::custom)
    }
}
