//! Exact rationals, primes, p-adic absolute values and the place-wise floor.
//!
//! Every quantity in the crate is a [`Rational`]; nothing set-theoretic is
//! ever decided in floating point.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `"num/den"` or `"num"`. Decimal points and exponents are rejected.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let t = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let ok = |x: &str| {
        let x = x.strip_prefix(['-', '+']).unwrap_or(x);
        !x.is_empty() && x.bytes().all(|b| b.is_ascii_digit())
    };
    if !ok(n) || !ok(d) {
        return Err(bad());
    }
    let n = BigInt::from_str(n).map_err(|_| bad())?;
    let d = BigInt::from_str(d).map_err(|_| bad())?;
    if d.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rational::new(n, d))
}

pub fn fmt_rational(q: &Rational) -> String {
    // BigRational's Display already omits a unit denominator.
    q.to_string()
}

/// serde adapter writing rationals as `"num/den"` strings.
pub mod qser {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rational(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(
            q: &Option<Rational>,
            s: S,
        ) -> std::result::Result<S::Ok, S::Error> {
            match q {
                Some(q) => s.serialize_some(&fmt_rational(q)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> std::result::Result<Option<Rational>, D::Error> {
            let s = Option::<String>::deserialize(d)?;
            s.map(|s| parse_rational(&s).map_err(serde::de::Error::custom))
                .transpose()
        }
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(
            v: &[Rational],
            s: S,
        ) -> std::result::Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for q in v {
                seq.serialize_element(&fmt_rational(q))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> std::result::Result<Vec<Rational>, D::Error> {
            let v = Vec::<String>::deserialize(d)?;
            v.iter()
                .map(|s| parse_rational(s).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

/// A rational prime. Construction runs a deterministic trial-division check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct Prime(u64);

impl Prime {
    pub fn new(value: u64) -> Result<Self> {
        if is_prime(value) {
            Ok(Prime(value))
        } else {
            Err(Error::Domain(format!("{value} is not prime")))
        }
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn as_bigint(self) -> BigInt {
        BigInt::from(self.0)
    }

    pub fn as_rational(self) -> Rational {
        Rational::from_integer(self.as_bigint())
    }
}

impl TryFrom<u64> for Prime {
    type Error = Error;
    fn try_from(v: u64) -> Result<Self> {
        Prime::new(v)
    }
}

impl From<Prime> for u64 {
    fn from(p: Prime) -> u64 {
        p.0
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// All primes `<= bound`, ascending (plain sieve).
pub fn primes_up_to(bound: u64) -> Vec<Prime> {
    if bound < 2 {
        return Vec::new();
    }
    let n = bound as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(Prime(i as u64));
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// The first `m` primes.
pub fn first_primes(m: usize) -> Vec<Prime> {
    let mut out = Vec::with_capacity(m);
    let mut n = 2u64;
    while out.len() < m {
        if is_prime(n) {
            out.push(Prime(n));
        }
        n += 1;
    }
    out
}

fn int_valuation(n: &BigInt, p: &BigInt) -> i64 {
    debug_assert!(!n.is_zero());
    let mut v = 0;
    let mut m = n.clone();
    loop {
        let (q, r) = m.div_rem(p);
        if !r.is_zero() {
            return v;
        }
        m = q;
        v += 1;
    }
}

/// `v_p(q)`; `None` for `q = 0`.
pub fn valuation(q: &Rational, p: Prime) -> Option<i64> {
    if q.is_zero() {
        return None;
    }
    let pb = p.as_bigint();
    Some(int_valuation(q.numer(), &pb) - int_valuation(q.denom(), &pb))
}

/// `p^e` for any integer exponent.
pub fn prime_power(p: Prime, e: i64) -> Rational {
    pow(&p.as_rational(), e)
}

pub fn pow(base: &Rational, e: i64) -> Rational {
    let mag = e.unsigned_abs();
    let mut acc = Rational::one();
    let mut b = base.clone();
    let mut k = mag;
    while k > 0 {
        if k & 1 == 1 {
            acc *= &b;
        }
        k >>= 1;
        if k > 0 {
            b = &b * &b;
        }
    }
    if e < 0 {
        acc.recip()
    } else {
        acc
    }
}

/// `|q|_p = p^{-v_p(q)}`, with `|0|_p = 0`.
pub fn padic_abs(q: &Rational, p: Prime) -> Rational {
    match valuation(q, p) {
        None => Rational::zero(),
        Some(v) => prime_power(p, -v),
    }
}

/// `⌊r⌋_p = p^j` with `p^j <= r < p^{j+1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PAdicFloor {
    pub base: Prime,
    pub exponent: i64,
    #[serde(with = "qser")]
    pub value: Rational,
}

/// Largest `j` with `p^j <= r` (`strict = false`) or `p^j < r` (`strict = true`).
///
/// Binary search on exact powers; the bracket comes from bit lengths since
/// `|log_p r| <= |log_2 r| < |bits(num) - bits(den)| + 1`.
pub fn power_exponent_below(r: &Rational, p: Prime, strict: bool) -> i64 {
    debug_assert!(r.is_positive());
    let bn = r.numer().bits() as i64;
    let bd = r.denom().bits() as i64;
    let span = (bn - bd).abs() + 2;
    let below = |j: i64| -> bool {
        let pj = prime_power(p, j);
        match pj.cmp(r) {
            Ordering::Less => true,
            Ordering::Equal => !strict,
            Ordering::Greater => false,
        }
    };
    // invariant: below(lo) holds, below(hi) fails
    let (mut lo, mut hi) = (-span, span);
    debug_assert!(below(lo) && !below(hi));
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn floor_i(r: &Rational, p: Prime) -> Result<PAdicFloor> {
    if !r.is_positive() {
        return Err(Error::Domain(format!("floor_i needs r > 0, got {r}")));
    }
    let exponent = power_exponent_below(r, p, false);
    Ok(PAdicFloor {
        base: p,
        exponent,
        value: prime_power(p, exponent),
    })
}

/// Value-only shorthand for [`floor_i`] on an argument known to be positive.
pub(crate) fn floor_val(r: &Rational, p: Prime) -> Rational {
    prime_power(p, power_exponent_below(r, p, false))
}

/// Largest power of `p` strictly below `r > 0`: the closed radius of the open
/// p-adic ball `{|u| < r}`.
pub(crate) fn power_strictly_below(r: &Rational, p: Prime) -> Rational {
    prime_power(p, power_exponent_below(r, p, true))
}

/// Absolute value of `q` at place `p` of `P`, or archimedean when `p` is `None`.
pub fn place_abs(q: &Rational, p: Option<Prime>) -> Rational {
    match p {
        None => q.abs(),
        Some(p) => padic_abs(q, p),
    }
}

/// Prime factors of `|n|` (trial division; inputs here are small maps and
/// lattice scales).
pub fn prime_factors(n: &BigInt) -> Vec<BigInt> {
    let mut out = Vec::new();
    let mut m = n.abs();
    let mut d = BigInt::from(2);
    while &d * &d <= m {
        if (&m % &d).is_zero() {
            out.push(d.clone());
            while (&m % &d).is_zero() {
                m /= &d;
            }
        }
        d += 1;
    }
    if m > BigInt::one() {
        out.push(m);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: u64) -> Prime {
        Prime::new(v).unwrap()
    }

    #[test]
    fn padic_abs_examples() {
        assert_eq!(padic_abs(&int(12), p(2)), rat(1, 4));
        assert_eq!(padic_abs(&rat(5, 6), p(3)), int(3));
        assert_eq!(padic_abs(&int(7), p(5)), int(1));
        assert_eq!(padic_abs(&int(0), p(5)), int(0));
    }

    #[test]
    fn floor_examples() {
        assert_eq!(floor_i(&int(8), p(2)).unwrap().value, int(8));
        assert_eq!(floor_i(&int(5), p(2)).unwrap().value, int(4));
        let f = floor_i(&rat(3, 10), p(3)).unwrap();
        assert_eq!(f.value, rat(1, 9));
        assert_eq!(f.exponent, -2);
    }

    #[test]
    fn floor_rejects_nonpositive() {
        assert!(matches!(floor_i(&int(0), p(2)), Err(Error::Domain(_))));
        assert!(floor_i(&rat(-1, 3), p(3)).is_err());
    }

    #[test]
    fn strict_power_below() {
        assert_eq!(power_strictly_below(&rat(1, 8), p(2)), rat(1, 16));
        assert_eq!(power_strictly_below(&rat(1, 5), p(2)), rat(1, 8));
        assert_eq!(floor_val(&rat(1, 8), p(2)), rat(1, 8));
    }

    #[test]
    fn primality() {
        assert!(Prime::new(1).is_err());
        assert!(Prime::new(91).is_err());
        assert!(Prime::new(97).is_ok());
        let ps: Vec<u64> = primes_up_to(30).into_iter().map(u64::from).collect();
        assert_eq!(ps, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert_eq!(first_primes(6).last().unwrap().value(), 13);
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_rational("3/10").unwrap(), rat(3, 10));
        assert_eq!(parse_rational("-4/2").unwrap(), int(-2));
        assert_eq!(fmt_rational(&int(-2)), "-2");
        assert_eq!(fmt_rational(&rat(6, 4)), "3/2");
        assert!(parse_rational("0.3").is_err());
        assert!(parse_rational("1e3").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn factors() {
        let f: Vec<i64> = prime_factors(&BigInt::from(-360))
            .iter()
            .map(|b| i64::try_from(b).unwrap())
            .collect();
        assert_eq!(f, vec![2, 3, 5]);
    }
}
