//! Fixed-point decimals for logarithmic reporting.
//!
//! Values are integers scaled by 10^60 and printed with 50 fractional digits.
//! Only reporting goes through here; decisions stay in exact rationals.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

use crate::arith::{power_exponent_below, pow, Prime, Rational};

const SCALE_DIGITS: u32 = 60;
const GUARD_DIGITS: u32 = 12;
pub const DISPLAY_DIGITS: usize = 50;

static SCALE: Lazy<BigInt> = Lazy::new(|| BigInt::from(10u32).pow(SCALE_DIGITS));
static WIDE: Lazy<BigInt> = Lazy::new(|| BigInt::from(10u32).pow(SCALE_DIGITS + GUARD_DIGITS));
static LN2_WIDE: Lazy<BigInt> = Lazy::new(|| {
    // ln 2 = 2 atanh(1/3)
    atanh_wide(&(&*WIDE / BigInt::from(3))) * 2
});

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Decimal(BigInt);

impl Decimal {
    pub fn zero() -> Self {
        Decimal(BigInt::zero())
    }

    pub fn from_int(n: i64) -> Self {
        Decimal(BigInt::from(n) * &*SCALE)
    }

    /// Truncates toward negative infinity at the last stored digit.
    pub fn from_rational(q: &Rational) -> Self {
        Decimal((q.numer() * &*SCALE).div_floor(q.denom()))
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn abs(&self) -> Self {
        Decimal(self.0.abs())
    }

    pub fn div(&self, other: &Decimal) -> Self {
        assert!(!other.0.is_zero(), "decimal division by zero");
        Decimal((&self.0 * &*SCALE).div_floor(&other.0))
    }

    pub fn mul_rational(&self, q: &Rational) -> Self {
        Decimal((&self.0 * q.numer()).div_floor(q.denom()))
    }

    pub fn to_f64(&self) -> f64 {
        // Enough for plotting and human summaries.
        let s = format!("{self}");
        s.parse().unwrap_or(f64::NAN)
    }

    /// ln q for q > 0.
    pub fn ln(q: &Rational) -> Self {
        assert!(q.is_positive(), "ln of non-positive rational");
        let two = Prime::new(2).expect("2 is prime");
        let k = power_exponent_below(q, two, false);
        let m = q / pow(&Rational::from_integer(BigInt::from(2)), k);
        // m in [1, 2); s in [0, 1/3)
        let s = (&m - Rational::one()) / (&m + Rational::one());
        let s_wide = (s.numer() * &*WIDE).div_floor(s.denom());
        let wide = atanh_wide(&s_wide) * 2 + &*LN2_WIDE * BigInt::from(k);
        Decimal(round_div(&wide, &BigInt::from(10u32).pow(GUARD_DIGITS)))
    }

    pub fn ln_int(n: u64) -> Self {
        Decimal::ln(&Rational::from_integer(BigInt::from(n)))
    }
}

fn round_div(a: &BigInt, b: &BigInt) -> BigInt {
    let (q, r) = a.div_mod_floor(b);
    if &r * 2 >= *b {
        q + 1
    } else {
        q
    }
}

/// atanh(s) for |s| <= 1/3 in the wide fixed-point scale.
fn atanh_wide(s: &BigInt) -> BigInt {
    let s2 = (s * s) / &*WIDE;
    let mut power = s.clone();
    let mut acc = BigInt::zero();
    let mut n = 1u64;
    while !power.is_zero() {
        acc += &power / BigInt::from(n);
        power = (&power * &s2) / &*WIDE;
        n += 2;
    }
    acc
}

impl Add for &Decimal {
    type Output = Decimal;
    fn add(self, o: &Decimal) -> Decimal {
        Decimal(&self.0 + &o.0)
    }
}

impl Sub for &Decimal {
    type Output = Decimal;
    fn sub(self, o: &Decimal) -> Decimal {
        Decimal(&self.0 - &o.0)
    }
}

impl Mul for &Decimal {
    type Output = Decimal;
    fn mul(self, o: &Decimal) -> Decimal {
        Decimal((&self.0 * &o.0).div_floor(&*SCALE))
    }
}

impl Neg for &Decimal {
    type Output = Decimal;
    fn neg(self) -> Decimal {
        Decimal(-&self.0)
    }
}

impl Neg for Decimal {
    type Output = Decimal;
    fn neg(self) -> Decimal {
        Decimal(-self.0)
    }
}

impl Add for Decimal {
    type Output = Decimal;
    fn add(self, o: Decimal) -> Decimal {
        &self + &o
    }
}

impl Sub for Decimal {
    type Output = Decimal;
    fn sub(self, o: Decimal) -> Decimal {
        &self - &o
    }
}

impl Mul for Decimal {
    type Output = Decimal;
    fn mul(self, o: Decimal) -> Decimal {
        &self * &o
    }
}

impl std::iter::Sum for Decimal {
    fn sum<I: Iterator<Item = Decimal>>(iter: I) -> Decimal {
        iter.fold(Decimal::zero(), |a, b| a + b)
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cut = BigInt::from(10u32).pow(SCALE_DIGITS - DISPLAY_DIGITS as u32);
        let v = round_div(&self.0.abs(), &cut);
        let unit = BigInt::from(10u32).pow(DISPLAY_DIGITS as u32);
        let (ip, fp) = v.div_rem(&unit);
        let sign = if self.0.is_negative() && !v.is_zero() { "-" } else { "" };
        write!(f, "{sign}{ip}.{:0>width$}", fp.to_string(), width = DISPLAY_DIGITS)
    }
}

impl fmt::Debug for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Decimal({self})")
    }
}

impl Serialize for Decimal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_decimal(&s).ok_or_else(|| serde::de::Error::custom(format!("bad decimal {s:?}")))
    }
}

fn parse_decimal(s: &str) -> Option<Decimal> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let (ip, fp) = body.split_once('.').unwrap_or((body, ""));
    if fp.len() > SCALE_DIGITS as usize {
        return None;
    }
    let digits = format!("{ip}{fp:0<width$}", width = SCALE_DIGITS as usize);
    let v: BigInt = digits.parse().ok()?;
    Some(Decimal(if neg { -v } else { v }))
}

impl ToPrimitive for Decimal {
    fn to_i64(&self) -> Option<i64> {
        (&self.0 / &*SCALE).to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        (&self.0 / &*SCALE).to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        Some(Decimal::to_f64(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{int, rat};

    #[test]
    fn ln2_digits() {
        let s = Decimal::ln_int(2).to_string();
        assert_eq!(s, "0.69314718055994530941723212145817656807550013436026");
    }

    #[test]
    fn ln10_digits() {
        let s = Decimal::ln_int(10).to_string();
        assert_eq!(s, "2.30258509299404568401799145468436420760110148862877");
    }

    #[test]
    fn ln_product_is_sum() {
        let a = Decimal::ln_int(210);
        let b = Decimal::ln_int(2) + Decimal::ln_int(3) + Decimal::ln_int(5) + Decimal::ln_int(7);
        assert!((&a - &b).abs() < Decimal::from_rational(&rat(1, 1_000_000_000_000)).mul_rational(&rat(1, 1_000_000_000_000)));
        assert!(a.to_string().starts_with("5.3471"));
    }

    #[test]
    fn ln_of_fraction_negative() {
        let v = Decimal::ln(&rat(1, 2520));
        assert!(v.is_negative());
        assert!(v.to_string().starts_with("-7.8320"));
        assert_eq!(Decimal::ln(&int(1)), Decimal::zero());
    }

    #[test]
    fn serde_roundtrip() {
        let v = Decimal::ln_int(3);
        let s = serde_json::to_string(&v).unwrap();
        let back: Decimal = serde_json::from_str(&s).unwrap();
        assert_eq!(back.to_string(), v.to_string());
    }
}
