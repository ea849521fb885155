//! Exact rational helpers shared by every exact module.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::str::FromStr;

use crate::{Error, Result};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

/// Parses `"p/q"` or an integer literal.
pub fn parse_q(s: &str) -> Result<Q> {
    let t = s.trim();
    if t.is_empty() || t.len() > 4096 {
        return Err(Error::Parse(format!("bad rational {s:?}")));
    }
    Q::from_str(t).map_err(|e| Error::Parse(format!("bad rational {s:?}: {e}")))
}

/// Canonical `"p/q"` text; integers keep the `/1` so files are uniform.
pub fn fmt_q(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        let n = x.numer().to_f64().unwrap_or(f64::NAN);
        let d = x.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Exact rational for a finite float (dyadic expansion).
pub fn from_f64(x: f64) -> Result<Q> {
    Q::from_float(x).ok_or_else(|| Error::Invalid(format!("non-finite float {x}")))
}

pub fn abs(x: &Q) -> Q {
    x.abs()
}

pub fn binom(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u64 = 1;
    for i in 0..k {
        r = r * (n - i) as u64 / (i + 1) as u64;
    }
    r
}

pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Serde adapter writing rationals as `"p/q"` strings.
pub mod as_string {
    use super::{fmt_q, parse_q, Q};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_q(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        assert_eq!(parse_q("3/6").unwrap(), q(1, 2));
        assert_eq!(parse_q("-2").unwrap(), qi(-2));
        assert_eq!(fmt_q(&q(-4, 8)), "-1/2");
        assert_eq!(fmt_q(&qi(1)), "1/1");
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("x").is_err());
        assert!(parse_q("").is_err());
    }

    #[test]
    fn small_combinatorics() {
        assert_eq!(binom(4, 2), 6);
        assert_eq!(binom(8, 0), 1);
        assert_eq!(binom(3, 5), 0);
        assert_eq!(factorial(4), 24);
        assert_eq!(factorial(0), 1);
    }

    #[test]
    fn float_conversion_is_exact_for_dyadics() {
        assert_eq!(from_f64(0.375).unwrap(), q(3, 8));
        assert!(from_f64(f64::NAN).is_err());
        assert!((to_f64(&q(1, 3)) - 1.0 / 3.0).abs() < 1e-15);
    }
}
