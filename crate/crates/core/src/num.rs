//! Exact rational helpers: parsing, formatting, powers of `1+ε`, exact
//! logarithms and certified root bounds.

use std::fmt;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact rational number used for every quantity in the crate.
pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"3"`, `"-3/4"`, `"1.25"` or `"1e-3"`-free decimals into an exact rational.
pub fn parse_q(field: &str, s: &str) -> Result<Q> {
    let err = |msg: &str| Error::Parse { field: field.to_string(), msg: format!("{msg}: {s:?}") };
    let t = s.trim();
    if t.is_empty() {
        return Err(err("empty rational"));
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| err("bad numerator"))?;
        let d: BigInt = d.trim().parse().map_err(|_| err("bad denominator"))?;
        if d.is_zero() {
            return Err(err("zero denominator"));
        }
        return Ok(Q::new(n, d));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err("bad decimal"));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(err("bad decimal"));
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| err("bad decimal"))? };
    let den = num_traits::pow(BigInt::from(10), frac_part.len());
    let v = Q::new(num, den);
    Ok(if neg { -v } else { v })
}

/// Canonical text form: integers as `"n"`, otherwise `"n/d"`.
pub fn fmt_q(v: &Q) -> String {
    if v.is_integer() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

pub fn to_f64(v: &Q) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// `base^e` for any integer exponent (base must be non-zero when `e < 0`).
pub fn pow_i(base: &Q, e: i64) -> Q {
    if e >= 0 {
        num_traits::pow(base.clone(), e as usize)
    } else {
        num_traits::pow(base.recip(), (-e) as usize)
    }
}

/// Serde adapter: rationals cross every interface as strings.
pub mod qstr {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_q("rational", &s).map_err(serde::de::Error::custom)
    }
}

/// The accuracy parameter ε, a rational in `(0, 1]`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Epsilon {
    value: Q,
    base: Q,
}

impl fmt::Debug for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Epsilon({})", fmt_q(&self.value))
    }
}

impl Serialize for Epsilon {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(&self.value))
    }
}

impl<'de> Deserialize<'de> for Epsilon {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let v = parse_q("epsilon", &s).map_err(serde::de::Error::custom)?;
        Epsilon::new(v).map_err(serde::de::Error::custom)
    }
}

impl Epsilon {
    pub fn new(value: Q) -> Result<Self> {
        if !value.is_positive() || value > Q::one() {
            return Err(Error::Config(format!("epsilon must lie in (0, 1], got {}", fmt_q(&value))));
        }
        let base = Q::one() + &value;
        Ok(Self { value, base })
    }

    pub fn from_ratio(n: i64, d: i64) -> Result<Self> {
        Self::new(qr(n, d))
    }

    pub fn value(&self) -> &Q {
        &self.value
    }

    /// `1 + ε`.
    pub fn base(&self) -> &Q {
        &self.base
    }

    /// `R_x = (1+ε)^x`.
    pub fn pow(&self, x: i64) -> Q {
        pow_i(&self.base, x)
    }

    /// `|I_x| = ε·(1+ε)^x`.
    pub fn interval_len(&self, x: i64) -> Q {
        &self.value * self.pow(x)
    }

    /// Largest `x` with `(1+ε)^x ≤ t`.
    pub fn floor_log(&self, t: &Q) -> Result<i64> {
        if !t.is_positive() {
            return Err(Error::Domain(format!("logarithm of non-positive value {}", fmt_q(t))));
        }
        let est = (log_f64(t) / log_f64(&self.base)).floor();
        let mut x = if est.is_finite() { est as i64 } else { 0 };
        while self.pow(x) > *t {
            x -= 1;
        }
        while self.pow(x + 1) <= *t {
            x += 1;
        }
        Ok(x)
    }

    /// Smallest `x` with `(1+ε)^x ≥ t`.
    pub fn ceil_log(&self, t: &Q) -> Result<i64> {
        let x = self.floor_log(t)?;
        Ok(if self.pow(x) == *t { x } else { x + 1 })
    }

    /// `Some(x)` iff `t = (1+ε)^x` exactly.
    pub fn exact_log(&self, t: &Q) -> Option<i64> {
        let x = self.floor_log(t).ok()?;
        (self.pow(x) == *t).then_some(x)
    }

    /// Rounds `t` up to the next power of `1+ε`.
    pub fn round_up(&self, t: &Q) -> Result<Q> {
        Ok(self.pow(self.ceil_log(t)?))
    }

    /// Index `x` of the interval `I_x = [R_x, R_{x+1})` containing `t ≥ 1`.
    pub fn interval_of(&self, t: &Q) -> Result<i64> {
        if *t < Q::one() {
            return Err(Error::Domain(format!(
                "time {} precedes the first release date 1",
                fmt_q(t)
            )));
        }
        self.floor_log(t)
    }

    /// Snapped completion time: the smallest `R_y ≥ c` (a job finishing inside
    /// `I_x` is charged `R_{x+1}`).
    pub fn snap(&self, c: &Q) -> Result<Q> {
        Ok(self.pow(self.ceil_log(c)?))
    }
}

/// Natural logarithm of a positive rational, robust to huge numerators.
pub fn log_f64(v: &Q) -> f64 {
    fn ln_big(b: &BigInt) -> f64 {
        let bits = b.bits();
        if bits < 1000 {
            return b.to_f64().unwrap_or(f64::MAX).ln();
        }
        let shift = bits - 64;
        let top: BigInt = b >> shift;
        top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
    }
    ln_big(v.numer()) - ln_big(v.denom())
}

/// Certified enclosure `[lo, hi]` of `v^(a/b)` for positive `v`, with
/// `hi - lo ≤ 2^-bits·scale`. Exact (`lo == hi`) whenever the power is rational.
pub fn rational_power_bounds(v: &Q, a: u32, b: u32, bits: u32) -> (Q, Q) {
    assert!(v.is_positive() && b >= 1);
    let p = num_traits::pow(v.clone(), a as usize);
    if b == 1 {
        return (p.clone(), p);
    }
    let (n, d) = (p.numer().clone(), p.denom().clone());
    // v^(a/b) = (n·d^(b-1))^(1/b) / d
    let radicand = &n * num_traits::pow(d.clone(), (b - 1) as usize);
    let r = radicand.nth_root(b);
    if num_traits::pow(r.clone(), b as usize) == radicand {
        let exact = Q::new(r, d);
        return (exact.clone(), exact);
    }
    let scale = BigInt::one() << (bits as usize);
    let scaled = &radicand * num_traits::pow(scale.clone(), b as usize);
    let root = scaled.nth_root(b);
    let den = &d * &scale;
    let lo = Q::new(root.clone(), den.clone());
    let hi = Q::new(root + BigInt::one(), den);
    (lo, hi)
}

pub fn is_integer_valued(v: &Q) -> bool {
    v.is_integer()
}

/// `⌈v⌉` as `i64`.
pub fn ceil_i64(v: &Q) -> i64 {
    v.ceil().to_integer().to_i64().expect("ceil out of i64 range")
}

pub fn floor_i64(v: &Q) -> i64 {
    v.floor().to_integer().to_i64().expect("floor out of i64 range")
}

pub fn sign_of(v: &Q) -> Sign {
    v.numer().sign()
}
