//! Exact rational time arithmetic.
//!
//! All model times (works, deadlines, periods, grid instants, segment
//! endpoints) are `Ratio<i128>` so that hyperperiod computation, grid
//! construction and schedule realization are drift-free. Floating point
//! is confined to the LP solver and energy evaluation.

use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Rat = Ratio<i128>;

/// Shorthand constructor. Panics on a zero denominator.
pub fn rat(num: i128, den: i128) -> Rat {
    Ratio::new(num, den)
}

pub fn rat_int(n: i128) -> Rat {
    Ratio::from_integer(n)
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RatParseError {
    #[error("empty value where a rational was expected")]
    Empty,
    #[error("invalid rational literal `{0}`")]
    Invalid(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
    #[error("value `{0}` overflows 128-bit rational range")]
    Overflow(String),
}

/// Parse `"num/den"`, integer, or decimal literals (optionally with a
/// power-of-ten exponent) into an exact rational. Decimals map onto
/// power-of-ten denominators, so `"0.15"` becomes `3/20` exactly.
pub fn parse_rat(text: &str) -> Result<Rat, RatParseError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(RatParseError::Empty);
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: i128 = num
            .trim()
            .parse()
            .map_err(|_| RatParseError::Invalid(text.to_string()))?;
        let d: i128 = den
            .trim()
            .parse()
            .map_err(|_| RatParseError::Invalid(text.to_string()))?;
        if d == 0 {
            return Err(RatParseError::ZeroDenominator(text.to_string()));
        }
        return Ok(Ratio::new(n, d));
    }
    parse_decimal(s).ok_or_else(|| RatParseError::Invalid(text.to_string()))
}

fn parse_decimal(s: &str) -> Option<Rat> {
    let (mantissa, exp10) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = s[pos + 1..].parse().ok()?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (-1i128, rest),
        None => (1i128, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((a, b)) => (a, b),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut num: i128 = 0;
    for b in int_part.bytes().chain(frac_part.bytes()) {
        num = num.checked_mul(10)?.checked_add((b - b'0') as i128)?;
    }
    num = num.checked_mul(sign)?;
    let shift = exp10 - frac_part.len() as i32;
    let mut value = Ratio::from_integer(num);
    if shift > 0 {
        value *= Ratio::from_integer(pow10(shift as u32)?);
    } else if shift < 0 {
        value /= Ratio::from_integer(pow10((-shift) as u32)?);
    }
    Some(value)
}

fn pow10(e: u32) -> Option<i128> {
    10i128.checked_pow(e)
}

/// Canonical text form: `"7"` for integers, `"3/2"` otherwise.
pub fn format_rat(r: &Rat) -> String {
    if r.denom() == &1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Nearest rational on the `1/denom` grid. Used to snap LP output onto
/// exact arithmetic before schedule realization.
pub fn round_to_denom(x: f64, denom: i128) -> Rat {
    let scaled = x * denom as f64;
    debug_assert!(scaled.is_finite());
    Ratio::new(scaled.round() as i128, denom)
}

/// Least common multiple of positive rationals: the smallest `L` with
/// `L / v` integral for every `v`.
pub fn rats_lcm(values: &[Rat]) -> Rat {
    assert!(!values.is_empty(), "lcm of empty set");
    let mut acc = values[0];
    assert!(acc.is_positive(), "lcm requires positive values");
    for v in &values[1..] {
        assert!(v.is_positive(), "lcm requires positive values");
        let num = acc.numer().lcm(v.numer());
        let den = acc.denom().gcd(v.denom());
        acc = Ratio::new(num, den);
    }
    acc
}

/// A rational in a JSON document: accepted as a `"num/den"` string or as
/// a decimal number, emitted as a number when the value round-trips
/// through its shortest decimal form and as `"num/den"` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct JsonRat(pub Rat);

impl From<Rat> for JsonRat {
    fn from(r: Rat) -> Self {
        JsonRat(r)
    }
}

impl Serialize for JsonRat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.denom() == &1 {
            if let Some(n) = self.0.numer().to_i64() {
                return serializer.serialize_i64(n);
            }
        }
        let f = rat_to_f64(&self.0);
        if f.is_finite() && parse_decimal(&format!("{f}")) == Some(self.0) {
            serializer.serialize_f64(f)
        } else {
            serializer.serialize_str(&format_rat(&self.0))
        }
    }
}

struct JsonRatVisitor;

impl<'de> Visitor<'de> for JsonRatVisitor {
    type Value = JsonRat;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "a number or a \"num/den\" string")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<JsonRat, E> {
        Ok(JsonRat(rat_int(v as i128)))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<JsonRat, E> {
        Ok(JsonRat(rat_int(v as i128)))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<JsonRat, E> {
        if !v.is_finite() {
            return Err(E::custom("non-finite number"));
        }
        parse_decimal(&format!("{v}"))
            .map(JsonRat)
            .ok_or_else(|| E::custom(format!("cannot represent {v} as a rational")))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<JsonRat, E> {
        parse_rat(v).map(JsonRat).map_err(E::custom)
    }

    fn visit_map<A: de::MapAccess<'de>>(self, map: A) -> Result<JsonRat, A::Error> {
        // With serde_json's arbitrary_precision feature a JSON number
        // reaches deserialize_any as a one-entry map carrying the exact
        // source text; serde_json::Number knows how to decode it.
        let number =
            serde_json::Number::deserialize(de::value::MapAccessDeserializer::new(map))?;
        parse_decimal(&number.to_string())
            .map(JsonRat)
            .ok_or_else(|| de::Error::custom(format!("cannot represent {number} as a rational")))
    }
}

impl<'de> Deserialize<'de> for JsonRat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<JsonRat, D::Error> {
        deserializer.deserialize_any(JsonRatVisitor)
    }
}

/// Snap a non-negative f64 to the 1e-9 grid, clamping tiny negatives to 0.
pub fn snap_unit(x: f64) -> Rat {
    if x <= 0.0 {
        Rat::zero()
    } else {
        round_to_denom(x, 1_000_000_000)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_strings() {
        assert_eq!(parse_rat("3/2").unwrap(), rat(3, 2));
        assert_eq!(parse_rat(" -7/4 ").unwrap(), rat(-7, 4));
        assert_eq!(parse_rat("4/6").unwrap(), rat(2, 3));
    }

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_rat("0.15").unwrap(), rat(3, 20));
        assert_eq!(parse_rat("10").unwrap(), rat_int(10));
        assert_eq!(parse_rat("-2.5").unwrap(), rat(-5, 2));
        assert_eq!(parse_rat("1e3").unwrap(), rat_int(1000));
        assert_eq!(parse_rat("2.5e-1").unwrap(), rat(1, 4));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_rat("").is_err());
        assert!(parse_rat("abc").is_err());
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("1.2.3").is_err());
    }

    #[test]
    fn lcm_of_rationals() {
        assert_eq!(rats_lcm(&[rat_int(5), rat_int(10)]), rat_int(10));
        assert_eq!(rats_lcm(&[rat_int(7)]), rat_int(7));
        // smallest L with L/(3/2) and L/2 integral
        assert_eq!(rats_lcm(&[rat(3, 2), rat_int(2)]), rat_int(6));
        assert_eq!(rats_lcm(&[rat(1, 2), rat(1, 3)]), rat_int(1));
    }

    #[test]
    fn json_rat_round_trip() {
        let v: JsonRat = serde_json::from_str("0.15").unwrap();
        assert_eq!(v.0, rat(3, 20));
        let v: JsonRat = serde_json::from_str("\"7/3\"").unwrap();
        assert_eq!(v.0, rat(7, 3));
        assert_eq!(serde_json::to_string(&JsonRat(rat(3, 20))).unwrap(), "0.15");
        assert_eq!(serde_json::to_string(&JsonRat(rat(1, 3))).unwrap(), "\"1/3\"");
        assert_eq!(serde_json::to_string(&JsonRat(rat_int(10))).unwrap(), "10");
    }

    #[test]
    fn round_to_denom_snaps() {
        assert_eq!(round_to_denom(0.5, 1_000_000_000), rat(1, 2));
        assert_eq!(round_to_denom(1.0 / 3.0, 3), rat(1, 3));
    }
}
