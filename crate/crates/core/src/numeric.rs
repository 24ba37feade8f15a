//! Small numeric helpers: rationals, logarithms of big integers, and the
//! `Nats` wrapper that keeps `-inf` explicit in serialized output.

use crate::error::{Error, Result};
use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Rational = Ratio<i64>;

pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: `{s}`"));
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        Ok(Ratio::new(n, d))
    } else if let Ok(n) = s.parse::<i64>() {
        Ok(Ratio::from_integer(n))
    } else if let Some((ip, fp)) = s.split_once('.') {
        // finite decimal such as 0.125
        if fp.is_empty() || fp.len() > 15 || !fp.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = ip.trim_start().starts_with('-');
        let ip: i64 = if ip.is_empty() || ip == "-" { 0 } else { ip.parse().map_err(|_| bad())? };
        let den = 10i64.pow(fp.len() as u32);
        let frac: i64 = fp.parse().map_err(|_| bad())?;
        let num = ip.abs() * den + frac;
        Ok(Ratio::new(if neg { -num } else { num }, den))
    } else {
        Err(bad())
    }
}

pub fn format_rational(r: &Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Serde adapter writing rationals as `"a/b"` strings.
pub mod rational_str {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(n) => Ok(Ratio::from_integer(n)),
            Repr::Text(t) => parse_rational(&t).map_err(serde::de::Error::custom),
        }
    }
}

/// Serde adapter for lists of rationals.
pub mod rational_vec_str {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        let strs: Vec<String> = v.iter().map(format_rational).collect();
        strs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rational>, D::Error> {
        let v: Vec<String> = Vec::deserialize(d)?;
        v.iter().map(|t| parse_rational(t).map_err(serde::de::Error::custom)).collect()
    }
}

/// Natural log of a non-negative big integer; `ln 0 = -inf`.
pub fn ln_biguint(n: &BigUint) -> f64 {
    if n.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = n.bits();
    if bits <= 1000 {
        if let Some(f) = n.to_f64() {
            if f.is_finite() {
                return f.ln();
            }
        }
    }
    let shift = bits.saturating_sub(64);
    let top = (n >> shift).to_f64().unwrap_or(f64::MAX);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn ln_abs_bigint(n: &BigInt) -> f64 {
    ln_biguint(&n.abs().to_biguint().expect("absolute value is non-negative"))
}

/// Entropy value in nats per site. `-inf` (empty microstate space) is kept
/// explicit and written as the string `"-inf"`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Nats(pub f64);

impl Nats {
    pub const NEG_INFINITY: Nats = Nats(f64::NEG_INFINITY);

    pub fn is_neg_infinite(&self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// `(1/d) ln(count)`.
    pub fn per_site(count: &BigUint, d: usize) -> Nats {
        Nats(ln_biguint(count) / d as f64)
    }
}

impl Serialize for Nats {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0 < 0.0 {
            s.serialize_str("-inf")
        } else if self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("nan")
        }
    }
}

impl<'de> Deserialize<'de> for Nats {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Nats, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Nats(v)),
            Repr::Text(t) => match t.as_str() {
                "-inf" => Ok(Nats(f64::NEG_INFINITY)),
                "inf" => Ok(Nats(f64::INFINITY)),
                "nan" => Ok(Nats(f64::NAN)),
                _ => Err(serde::de::Error::custom(format!("bad entropy value `{t}`"))),
            },
        }
    }
}

/// Exact test `num / (scale * d) < r^2` for a sum of squared numerators.
#[derive(Clone, Copy, Debug)]
pub struct SqBound {
    lhs_mul: u128,
    rhs: u128,
}

impl SqBound {
    pub fn new(r: &Rational, scale: u64, d: usize) -> SqBound {
        let (n, m) = (r.numer().unsigned_abs() as u128, r.denom().unsigned_abs() as u128);
        SqBound { lhs_mul: m * m, rhs: n * n * scale as u128 * d as u128 }
    }

    /// `num / (scale d) < r^2`
    pub fn below(&self, num: u128) -> bool {
        num * self.lhs_mul < self.rhs
    }

    /// `num / (scale d) > r^2`
    pub fn above(&self, num: u128) -> bool {
        num * self.lhs_mul > self.rhs
    }

    /// Largest sum that still satisfies `below`, if any.
    pub fn max_below(&self) -> Option<u128> {
        if self.rhs == 0 {
            None
        } else {
            Some((self.rhs - 1) / self.lhs_mul)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rationals() {
        assert_eq!(parse_rational("1/16").unwrap(), Ratio::new(1, 16));
        assert_eq!(parse_rational("3").unwrap(), Ratio::from_integer(3));
        assert_eq!(parse_rational("0.125").unwrap(), Ratio::new(1, 8));
        assert_eq!(parse_rational("-0.5").unwrap(), Ratio::new(-1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn big_logs() {
        let n = BigUint::from(3u32).pow(500);
        assert!((ln_biguint(&n) - 500.0 * 3f64.ln()).abs() < 1e-9);
        let m = BigUint::from(2u32).pow(64) - 1u32;
        assert!((ln_biguint(&m) - 64.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(ln_biguint(&BigUint::zero()), f64::NEG_INFINITY);
    }

    #[test]
    fn nats_roundtrip() {
        let s = serde_json::to_string(&Nats::NEG_INFINITY).unwrap();
        assert_eq!(s, "\"-inf\"");
        let back: Nats = serde_json::from_str(&s).unwrap();
        assert!(back.is_neg_infinite());
        let v: Nats = serde_json::from_str("0.5").unwrap();
        assert_eq!(v, Nats(0.5));
    }

    #[test]
    fn sq_bound_is_strict() {
        // rho^2 = num / (1 * 4); threshold 1/2 -> rho^2 < 1/4 <=> num < 1
        let b = SqBound::new(&Ratio::new(1, 2), 1, 4);
        assert!(b.below(0));
        assert!(!b.below(1));
        assert!(!b.above(1));
        assert!(b.above(2));
        assert_eq!(b.max_below(), Some(0));
    }
}
