//! Exact rational values: literal parsing, decimal rendering and the
//! `{decimal, exact}` JSON form used by every report.

use std::fmt;
use std::str::FromStr;

use num::{BigInt, BigRational, Integer, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Rational = BigRational;

/// Significant digits used for every printed decimal.
pub const DISPLAY_DIGITS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRationalError(pub String);

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `p/q`, plain decimals (`0.64`, `-3`), and scientific notation
/// (`1.5e-3`) into an exact rational. No floating point is involved.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((p, q)) = s.split_once('/') {
        let num = BigInt::from_str(p.trim()).map_err(|_| err())?;
        let den = BigInt::from_str(q.trim()).map_err(|_| err())?;
        if den.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(num, den));
    }

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = s[pos + 1..].parse().map_err(|_| err())?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(err());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let joined = format!("{whole}{frac}");
    let mut num = BigInt::from_str(if joined.is_empty() { "0" } else { &joined }).map_err(|_| err())?;
    if negative {
        num = -num;
    }
    let scale = exponent - frac.len() as i64;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        Rational::from_integer(num * num::pow(ten, scale as usize))
    } else {
        Rational::new(num, num::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

/// Exact `p/q` form (integers render without a denominator).
pub fn to_exact_string(x: &Rational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

fn round_half_even(x: &Rational) -> BigInt {
    let floor = x.floor();
    let frac = x - &floor;
    let half = ratio(1, 2);
    let mut n = floor.to_integer();
    if frac > half || (frac == half && n.is_odd()) {
        n += 1;
    }
    n
}

fn pow10(e: usize) -> BigInt {
    num::pow(BigInt::from(10u32), e)
}

/// Renders `x` as a plain decimal with at most `digits` significant digits,
/// rounding half to even. Trailing fractional zeros are dropped.
pub fn to_decimal(x: &Rational, digits: usize) -> String {
    assert!(digits >= 1);
    if x.is_zero() {
        return "0".to_string();
    }
    let negative = x.is_negative();
    let a = x.abs();

    // exponent e with 10^e <= a < 10^(e+1)
    let mut e = a.numer().to_string().len() as i64 - a.denom().to_string().len() as i64;
    let ten_pow = |e: i64| -> Rational {
        if e >= 0 {
            Rational::from_integer(pow10(e as usize))
        } else {
            Rational::new(BigInt::one(), pow10((-e) as usize))
        }
    };
    while a < ten_pow(e) {
        e -= 1;
    }
    while a >= ten_pow(e + 1) {
        e += 1;
    }

    let mut scale = digits as i64 - 1 - e;
    let mut n = round_half_even(&(&a * ten_pow(scale)));
    if n == pow10(digits) {
        n /= 10;
        scale -= 1;
    }

    let mut body = n.to_string();
    if scale > 0 {
        let scale = scale as usize;
        if body.len() <= scale {
            body = format!("{}{}", "0".repeat(scale - body.len() + 1), body);
        }
        let split = body.len() - scale;
        let (int_part, frac_part) = body.split_at(split);
        let frac_part = frac_part.trim_end_matches('0');
        body = if frac_part.is_empty() {
            int_part.to_string()
        } else {
            format!("{int_part}.{frac_part}")
        };
    } else if scale < 0 {
        body.push_str(&"0".repeat((-scale) as usize));
    }
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

/// Fixed number of fractional digits, round half to even.
pub fn to_fixed(x: &Rational, places: usize) -> String {
    let scaled = round_half_even(&(x * Rational::from_integer(pow10(places))));
    let negative = scaled.is_negative();
    let mut body = scaled.abs().to_string();
    if places > 0 {
        if body.len() <= places {
            body = format!("{}{}", "0".repeat(places - body.len() + 1), body);
        }
        body.insert(body.len() - places, '.');
    }
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn positive_part(x: Rational) -> Rational {
    if x.is_negative() {
        Rational::zero()
    } else {
        x
    }
}

/// A rational with its serialized `{decimal, exact}` pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Exact(pub Rational);

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&to_decimal(&self.0, DISPLAY_DIGITS))
    }
}

#[derive(Serialize, Deserialize)]
struct ExactRepr {
    decimal: String,
    exact: String,
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ExactRepr { decimal: to_decimal(&self.0, DISPLAY_DIGITS), exact: to_exact_string(&self.0) }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = ExactRepr::deserialize(deserializer)?;
        parse_rational(&repr.exact).map(Exact).map_err(serde::de::Error::custom)
    }
}

/// A rational literal as it appears in user-facing JSON: either a string
/// (`"1/8"`, `"0.64"`) or a bare JSON number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Literal(pub Rational);

impl<'de> Deserialize<'de> for Literal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        let text = match &value {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Number(n) => n.to_string(),
            other => return Err(serde::de::Error::custom(format!("expected rational, got {other}"))),
        };
        parse_rational(&text).map(Literal).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Literal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&to_exact_string(&self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_literal_forms() {
        assert_eq!(parse_rational("1/8").unwrap(), ratio(1, 8));
        assert_eq!(parse_rational("0.64").unwrap(), ratio(16, 25));
        assert_eq!(parse_rational("-3").unwrap(), int(-3));
        assert_eq!(parse_rational("1.5e-3").unwrap(), ratio(3, 2000));
        assert_eq!(parse_rational("2E2").unwrap(), int(200));
        assert_eq!(parse_rational(".5").unwrap(), ratio(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn decimal_rendering_rounds_half_even() {
        assert_eq!(to_decimal(&ratio(225, 128), 10), "1.7578125");
        assert_eq!(to_decimal(&ratio(2, 3), 10), "0.6666666667");
        assert_eq!(to_decimal(&ratio(1, 3), 4), "0.3333");
        // 0.125 -> 0.12 (tie to even), 0.375 -> 0.38
        assert_eq!(to_decimal(&ratio(1, 8), 2), "0.12");
        assert_eq!(to_decimal(&ratio(3, 8), 2), "0.38");
        assert_eq!(to_decimal(&int(-1234567), 3), "-1230000");
        assert_eq!(to_decimal(&ratio(9999, 1000), 3), "10");
        assert_eq!(to_decimal(&ratio(1, 1000), 10), "0.001");
        assert_eq!(to_decimal(&int(0), 10), "0");
    }

    #[test]
    fn fixed_rendering() {
        assert_eq!(to_fixed(&ratio(1, 8), 2), "0.12");
        assert_eq!(to_fixed(&ratio(-1, 8), 1), "-0.1");
        assert_eq!(to_fixed(&ratio(1, 3), 0), "0");
        assert_eq!(to_fixed(&ratio(3443, 10000), 2), "0.34");
    }

    #[test]
    fn exact_round_trips_through_json() {
        let x = Exact(ratio(-7, 12));
        let text = serde_json::to_string(&x).unwrap();
        assert_eq!(text, r#"{"decimal":"-0.5833333333","exact":"-7/12"}"#);
        let back: Exact = serde_json::from_str(&text).unwrap();
        assert_eq!(back, x);
    }
}
