//! The restricted product X_P = R x prod Q_p for a finite prime set P, with
//! its max-metric, balls, cylinders and the diagonal lattice Δ(R).
//!
//! Place index 0 is the real place; index i > 0 is the i-th prime of P.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::arith::{
    floor_val, fmt_rational, padic_abs, parse_rational, power_strictly_below, prime_factors,
    qser, valuation, Prime, Rational,
};
use crate::error::{Error, Result};

/// Candidate cap for lattice enumerations.
pub const DEFAULT_SEARCH_CAP: usize = 2_000_000;

#[derive(Clone, Debug)]
pub struct PrimeSet(Arc<Vec<Prime>>);

impl PartialEq for PrimeSet {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}
impl Eq for PrimeSet {}

impl PrimeSet {
    pub fn new(primes: Vec<Prime>) -> Result<Self> {
        if primes.is_empty() {
            return Err(Error::Domain("prime set must be nonempty".into()));
        }
        if primes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("primes must be strictly increasing".into()));
        }
        Ok(PrimeSet(Arc::new(primes)))
    }

    pub fn from_u64(values: &[u64]) -> Result<Self> {
        let mut ps = values
            .iter()
            .map(|&v| Prime::new(v))
            .collect::<Result<Vec<_>>>()?;
        ps.sort();
        let n = ps.len();
        ps.dedup();
        if ps.len() != n {
            return Err(Error::Domain("duplicate prime".into()));
        }
        PrimeSet::new(ps)
    }

    pub fn primes(&self) -> &[Prime] {
        &self.0
    }

    /// Number of primes (l - 1).
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of places including the real one (l).
    pub fn places(&self) -> usize {
        self.0.len() + 1
    }

    /// The prime at place `i`, `None` for the real place.
    pub fn prime_at(&self, i: usize) -> Result<Option<Prime>> {
        match i {
            0 => Ok(None),
            _ if i <= self.len() => Ok(Some(self.0[i - 1])),
            _ => Err(Error::PlaceOutOfRange {
                index: i,
                places: self.places(),
            }),
        }
    }

    pub fn index_of(&self, p: Prime) -> Option<usize> {
        self.0.iter().position(|&q| q == p).map(|k| k + 1)
    }

    pub fn largest(&self) -> Prime {
        *self.0.last().expect("nonempty")
    }

    /// Whether every prime factor of `n` lies in P.
    pub fn supports(&self, n: &BigInt) -> bool {
        prime_factors(n)
            .iter()
            .all(|f| self.0.iter().any(|p| &p.as_bigint() == f))
    }

    /// Membership in R = Z[1/p : p in P].
    pub fn in_ring(&self, q: &Rational) -> bool {
        self.supports(q.denom())
    }

    /// Whether q is a unit of R.
    pub fn is_unit(&self, q: &Rational) -> bool {
        !q.is_zero() && self.supports(q.denom()) && self.supports(q.numer())
    }

    pub fn to_u64(&self) -> Vec<u64> {
        self.0.iter().map(|p| p.value()).collect()
    }

    /// Ceiling for β at a place: 1/3 for the real place, 1/p otherwise.
    pub fn beta_ceiling(&self, i: usize) -> Result<Rational> {
        Ok(match self.prime_at(i)? {
            None => Rational::new(1.into(), 3.into()),
            Some(p) => p.as_rational().recip(),
        })
    }
}

impl Serialize for PrimeSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_u64().serialize(s)
    }
}

impl<'de> Deserialize<'de> for PrimeSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<u64>::deserialize(d)?;
        PrimeSet::from_u64(&v).map_err(serde::de::Error::custom)
    }
}

/// Distance contribution of place `i` between two coordinates.
pub fn place_distance(primes: &PrimeSet, i: usize, a: &Rational, b: &Rational) -> Result<Rational> {
    let diff = a - b;
    Ok(match primes.prime_at(i)? {
        None => diff.abs(),
        Some(p) => padic_abs(&diff, p) / p.as_rational(),
    })
}

#[derive(Clone, PartialEq, Eq)]
pub struct Point {
    primes: PrimeSet,
    coords: Vec<Rational>,
}

impl Point {
    pub fn new(primes: &PrimeSet, real: Rational, padic: Vec<Rational>) -> Result<Self> {
        if padic.len() != primes.len() {
            return Err(Error::Domain(format!(
                "expected {} p-adic coordinates, got {}",
                primes.len(),
                padic.len()
            )));
        }
        let mut coords = Vec::with_capacity(primes.places());
        coords.push(real);
        coords.extend(padic);
        Ok(Point {
            primes: primes.clone(),
            coords,
        })
    }

    pub fn zero(primes: &PrimeSet) -> Self {
        Point::diagonal(primes, &Rational::zero())
    }

    /// Δ(q): the diagonal image of a rational.
    pub fn diagonal(primes: &PrimeSet, q: &Rational) -> Self {
        Point {
            primes: primes.clone(),
            coords: vec![q.clone(); primes.places()],
        }
    }

    /// Reads `"q"` as the diagonal point Δ(q) and `"x0;x1,...,xl"` as explicit
    /// coordinates. Surrounding parentheses are allowed.
    pub fn parse(primes: &PrimeSet, s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')');
        match t.split_once(';') {
            None => Ok(Point::diagonal(primes, &parse_rational(t.trim())?)),
            Some((real, rest)) => {
                let padic = if rest.trim().is_empty() {
                    Vec::new()
                } else {
                    rest.split(',')
                        .map(|c| parse_rational(c.trim()))
                        .collect::<Result<Vec<_>>>()?
                };
                Point::new(primes, parse_rational(real.trim())?, padic)
            }
        }
    }

    /// `(q; 0, ..., 0)`.
    pub fn real_only(primes: &PrimeSet, q: Rational) -> Self {
        let mut p = Point::zero(primes);
        p.coords[0] = q;
        p
    }

    pub fn primes(&self) -> &PrimeSet {
        &self.primes
    }

    pub fn real(&self) -> &Rational {
        &self.coords[0]
    }

    pub fn coord(&self, i: usize) -> &Rational {
        &self.coords[i]
    }

    pub fn coords(&self) -> &[Rational] {
        &self.coords
    }

    pub fn with_coord(&self, i: usize, q: Rational) -> Result<Self> {
        self.primes.prime_at(i)?;
        let mut out = self.clone();
        out.coords[i] = q;
        Ok(out)
    }

    fn check(&self, other: &Point) -> Result<()> {
        if self.primes != other.primes {
            Err(Error::PrimeSetMismatch)
        } else {
            Ok(())
        }
    }

    pub fn add(&self, other: &Point) -> Result<Point> {
        self.check(other)?;
        Ok(self.zip(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Point) -> Result<Point> {
        self.check(other)?;
        Ok(self.zip(other, |a, b| a - b))
    }

    pub fn add_diagonal(&self, q: &Rational) -> Point {
        self.map(|c| c + q)
    }

    pub fn scale(&self, q: &Rational) -> Point {
        self.map(|c| c * q)
    }

    pub fn map(&self, f: impl Fn(&Rational) -> Rational) -> Point {
        Point {
            primes: self.primes.clone(),
            coords: self.coords.iter().map(f).collect(),
        }
    }

    fn zip(&self, other: &Point, f: impl Fn(&Rational, &Rational) -> Rational) -> Point {
        Point {
            primes: self.primes.clone(),
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    /// Whether this point lies on the diagonal Δ(Q).
    pub fn diagonal_value(&self) -> Option<&Rational> {
        let c0 = &self.coords[0];
        self.coords.iter().all(|c| c == c0).then_some(c0)
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({};", fmt_rational(&self.coords[0]))?;
        let rest: Vec<String> = self.coords[1..].iter().map(fmt_rational).collect();
        write!(f, " {})", rest.join(", "))
    }
}

#[derive(Serialize)]
struct PointRepr {
    real: String,
    padic: BTreeMap<u64, String>,
}

/// Keys are read as strings: buffered content (tagged enums) turns map keys
/// into strings, which a `u64` key would then reject.
#[derive(Deserialize)]
struct PointIn {
    real: String,
    padic: BTreeMap<String, String>,
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PointRepr {
            real: fmt_rational(&self.coords[0]),
            padic: self
                .primes
                .primes()
                .iter()
                .zip(&self.coords[1..])
                .map(|(p, c)| (p.value(), fmt_rational(c)))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = PointIn::deserialize(d)?;
        let mut entries = repr
            .padic
            .iter()
            .map(|(k, v)| {
                let p = k
                    .parse::<u64>()
                    .map_err(|_| D::Error::custom(format!("bad prime key {k:?}")))?;
                Ok((p, v))
            })
            .collect::<std::result::Result<Vec<_>, D::Error>>()?;
        entries.sort_by_key(|(p, _)| *p);
        let keys: Vec<u64> = entries.iter().map(|(p, _)| *p).collect();
        let primes = PrimeSet::from_u64(&keys).map_err(D::Error::custom)?;
        let real = parse_rational(&repr.real).map_err(D::Error::custom)?;
        let padic = entries
            .iter()
            .map(|(_, s)| parse_rational(s))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        Point::new(&primes, real, padic).map_err(D::Error::custom)
    }
}

/// `max(|x0 - z0|, max_p (1/p)|x_p - z_p|_p)`.
pub fn distance(x: &Point, z: &Point) -> Result<Rational> {
    x.check(z)?;
    let mut best = Rational::zero();
    for i in 0..x.primes.places() {
        let d = place_distance(&x.primes, i, &x.coords[i], &z.coords[i])?;
        if d > best {
            best = d;
        }
    }
    Ok(best)
}

/// Distance from `w` to the diagonal point Δ(z), without building Δ(z).
pub fn distance_to_diagonal(w: &Point, z: &Rational) -> Rational {
    let mut best = (&w.coords[0] - z).abs();
    for (p, c) in w.primes.primes().iter().zip(&w.coords[1..]) {
        let d = padic_abs(&(c - z), *p) / p.as_rational();
        if d > best {
            best = d;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    #[serde(with = "qser")]
    pub radius: Rational,
    pub closed: bool,
}

/// Image of a ball or cylinder under a coordinate projection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Projection {
    /// `|u - center| <= radius` (closed) or `< radius` (open).
    Interval {
        center: Rational,
        radius: Rational,
        closed: bool,
    },
    /// `|u - center|_p <= radius`, radius a power of p.
    PAdic {
        prime: Prime,
        center: Rational,
        radius: Rational,
    },
}

impl Projection {
    pub fn contains(&self, u: &Rational) -> bool {
        match self {
            Projection::Interval {
                center,
                radius,
                closed,
            } => {
                let d = (u - center).abs();
                if *closed {
                    &d <= radius
                } else {
                    &d < radius
                }
            }
            Projection::PAdic {
                prime,
                center,
                radius,
            } => &padic_abs(&(u - center), *prime) <= radius,
        }
    }

    /// Whether `inner` lies inside `self` (same place assumed).
    pub fn contains_projection(&self, inner: &Projection) -> bool {
        match (self, inner) {
            (
                Projection::Interval {
                    center: c2,
                    radius: r2,
                    closed: outer_closed,
                },
                Projection::Interval {
                    center: c1,
                    radius: r1,
                    closed: inner_closed,
                },
            ) => {
                let reach = (c1 - c2).abs() + r1;
                if !outer_closed && *inner_closed {
                    &reach < r2
                } else {
                    &reach <= r2
                }
            }
            (
                Projection::PAdic {
                    prime,
                    center: c2,
                    radius: r2,
                },
                Projection::PAdic {
                    center: c1,
                    radius: r1,
                    ..
                },
            ) => r1 <= r2 && &padic_abs(&(c1 - c2), *prime) <= r2,
            _ => false,
        }
    }

    pub fn disjoint(&self, other: &Projection) -> bool {
        match (self, other) {
            (
                Projection::Interval {
                    center: c1,
                    radius: r1,
                    closed: k1,
                },
                Projection::Interval {
                    center: c2,
                    radius: r2,
                    closed: k2,
                },
            ) => {
                let gap = (c1 - c2).abs();
                let reach = r1 + r2;
                if *k1 && *k2 {
                    gap > reach
                } else {
                    gap >= reach
                }
            }
            (
                Projection::PAdic {
                    prime,
                    center: c1,
                    radius: r1,
                },
                Projection::PAdic {
                    center: c2,
                    radius: r2,
                    ..
                },
            ) => &padic_abs(&(c1 - c2), *prime) > r1.max(r2),
            _ => false,
        }
    }

    /// Infimum of the weighted place distance between the two sets.
    pub fn gap(&self, other: &Projection) -> Rational {
        if !self.disjoint(other) {
            return Rational::zero();
        }
        match (self, other) {
            (
                Projection::Interval {
                    center: c1,
                    radius: r1,
                    ..
                },
                Projection::Interval {
                    center: c2,
                    radius: r2,
                    ..
                },
            ) => (c1 - c2).abs() - r1 - r2,
            (
                Projection::PAdic {
                    prime,
                    center: c1,
                    ..
                },
                Projection::PAdic { center: c2, .. },
            ) => padic_abs(&(c1 - c2), *prime) / prime.as_rational(),
            _ => Rational::zero(),
        }
    }
}

impl Ball {
    pub fn closed(center: Point, radius: Rational) -> Result<Self> {
        Ball::new(center, radius, true)
    }

    pub fn new(center: Point, radius: Rational, closed: bool) -> Result<Self> {
        if !radius.is_positive() {
            return Err(Error::Domain(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Ball {
            center,
            radius,
            closed,
        })
    }

    pub fn primes(&self) -> &PrimeSet {
        self.center.primes()
    }

    pub fn projection(&self, i: usize) -> Result<Projection> {
        let c = self.center.coord_checked(i)?.clone();
        Ok(match self.primes().prime_at(i)? {
            None => Projection::Interval {
                center: c,
                radius: self.radius.clone(),
                closed: self.closed,
            },
            Some(p) => {
                let pr = &self.radius * p.as_rational();
                let radius = if self.closed {
                    floor_val(&pr, p)
                } else {
                    power_strictly_below(&pr, p)
                };
                Projection::PAdic {
                    prime: p,
                    center: c,
                    radius,
                }
            }
        })
    }

    pub fn projections(&self) -> Vec<Projection> {
        (0..self.primes().places())
            .map(|i| self.projection(i).expect("index in range"))
            .collect()
    }

    pub fn contains_point(&self, x: &Point) -> Result<bool> {
        let d = distance(&self.center, x)?;
        Ok(if self.closed {
            d <= self.radius
        } else {
            d < self.radius
        })
    }

    /// Exact containment of `inner` in `self`, checked place by place.
    pub fn contains_ball(&self, inner: &Ball) -> Result<bool> {
        self.center.check(&inner.center)?;
        for i in 0..self.primes().places() {
            if !self.projection(i)?.contains_projection(&inner.projection(i)?) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn disjoint_from_cylinder(&self, c: &Cylinder) -> Result<bool> {
        self.center.check(&c.anchor)?;
        Ok(self
            .projection(c.constraining_index)?
            .disjoint(&c.projection()?))
    }

    pub fn disjoint_from_ball(&self, other: &Ball) -> Result<bool> {
        self.center.check(&other.center)?;
        for i in 0..self.primes().places() {
            if self.projection(i)?.disjoint(&other.projection(i)?) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// `inf { d(x, z) : x in self, z in other }`.
    pub fn gap(&self, other: &Ball) -> Result<Rational> {
        self.center.check(&other.center)?;
        let mut best = Rational::zero();
        for i in 0..self.primes().places() {
            let g = self.projection(i)?.gap(&other.projection(i)?);
            if g > best {
                best = g;
            }
        }
        Ok(best)
    }

    pub fn shrink(&self, factor: &Rational) -> Ball {
        Ball {
            center: self.center.clone(),
            radius: &self.radius * factor,
            closed: self.closed,
        }
    }
}

impl Point {
    fn coord_checked(&self, i: usize) -> Result<&Rational> {
        self.coords.get(i).ok_or(Error::PlaceOutOfRange {
            index: i,
            places: self.coords.len(),
        })
    }
}

/// The open cylinder `C(anchor, ε, i) = { x : d_i(x_i, anchor_i) < ε }`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cylinder {
    pub anchor: Point,
    #[serde(with = "qser")]
    pub epsilon: Rational,
    pub constraining_index: usize,
    #[serde(with = "qser")]
    pub normalized_radius: Rational,
}

impl Cylinder {
    pub fn new(anchor: Point, epsilon: Rational, i: usize) -> Result<Self> {
        cylinder_normalize(anchor, epsilon, i)
    }

    pub fn primes(&self) -> &PrimeSet {
        self.anchor.primes()
    }

    pub fn projection(&self) -> Result<Projection> {
        let i = self.constraining_index;
        let c = self.anchor.coord_checked(i)?.clone();
        Ok(match self.primes().prime_at(i)? {
            None => Projection::Interval {
                center: c,
                radius: self.epsilon.clone(),
                closed: false,
            },
            Some(p) => Projection::PAdic {
                prime: p,
                center: c,
                radius: &self.normalized_radius * p.as_rational(),
            },
        })
    }

    pub fn contains_point(&self, x: &Point) -> Result<bool> {
        self.anchor.check(x)?;
        Ok(self
            .projection()?
            .contains(x.coord_checked(self.constraining_index)?))
    }
}

pub fn cylinder_normalize(anchor: Point, epsilon: Rational, i: usize) -> Result<Cylinder> {
    if !epsilon.is_positive() {
        return Err(Error::Domain(format!("cylinder epsilon must be positive, got {epsilon}")));
    }
    let normalized_radius = match anchor.primes().prime_at(i)? {
        None => epsilon.clone(),
        Some(p) => {
            let pr = p.as_rational();
            power_strictly_below(&(&epsilon * &pr), p) / pr
        }
    };
    Ok(Cylinder {
        anchor,
        epsilon,
        constraining_index: i,
        normalized_radius,
    })
}

pub fn ball_contains(outer: &Ball, inner: &Ball) -> Result<bool> {
    outer.contains_ball(inner)
}

pub fn ball_cylinder_disjoint(b: &Ball, c: &Cylinder) -> Result<bool> {
    b.disjoint_from_cylinder(c)
}

/// A bounded search for elements z of `scale · R`:
/// `|z - real_center| <= real_radius` (or `<` when `real_strict`) and
/// `|z - padic_centers[p]|_p <= padic_radii[p]` at each prime of P.
#[derive(Clone, Debug)]
pub struct RingSearch {
    pub scale: Rational,
    pub real_center: Rational,
    pub real_radius: Rational,
    pub real_strict: bool,
    pub padic_centers: Vec<Rational>,
    pub padic_radii: Vec<Rational>,
}

impl RingSearch {
    /// Conditions equivalent to `d(w, Δ(z)) < t` (strict) or `<= t`.
    pub fn around(w: &Point, scale: &Rational, t: &Rational, strict: bool) -> RingSearch {
        let ps = w.primes().primes();
        RingSearch {
            scale: scale.clone(),
            real_center: w.real().clone(),
            real_radius: t.clone(),
            real_strict: strict,
            padic_centers: w.coords()[1..].to_vec(),
            padic_radii: ps
                .iter()
                .map(|p| {
                    let pt = t * p.as_rational();
                    if strict {
                        power_strictly_below(&pt, *p)
                    } else {
                        floor_val(&pt, *p)
                    }
                })
                .collect(),
        }
    }
}

/// p-integral rational reduced mod `m = p^f`.
fn residue(q: &Rational, m: &BigInt) -> BigInt {
    let den = q.denom().mod_floor(m);
    let inv = mod_inverse(&den, m);
    (q.numer().mod_floor(m) * inv).mod_floor(m)
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> BigInt {
    if m.is_one() {
        return BigInt::zero();
    }
    let g = a.extended_gcd(m);
    debug_assert!(g.gcd.is_one(), "non-invertible residue");
    g.x.mod_floor(m)
}

/// All solutions of a [`RingSearch`], ascending. Errors when the candidate
/// count would exceed `cap`.
pub fn enumerate_ring(primes: &PrimeSet, q: &RingSearch, cap: usize) -> Result<Vec<Rational>> {
    if q.scale.is_zero() {
        return Err(Error::Domain("ring scale must be nonzero".into()));
    }
    if q.padic_centers.len() != primes.len() || q.padic_radii.len() != primes.len() {
        return Err(Error::Domain("ring search arity mismatch".into()));
    }
    // z = scale * u with u in R; rewrite every condition in terms of u.
    let a = &q.scale;
    let c0 = &q.real_center / a;
    let t0 = &q.real_radius / a.abs();
    if t0.is_negative() || (q.real_strict && t0.is_zero()) {
        return Ok(Vec::new());
    }
    let mut denom = BigInt::one();
    let mut congr: Vec<(Rational, i64, Prime)> = Vec::with_capacity(primes.len());
    for ((p, c), rho) in primes.primes().iter().zip(&q.padic_centers).zip(&q.padic_radii) {
        if !rho.is_positive() {
            return Ok(Vec::new());
        }
        let va = valuation(a, *p).expect("nonzero scale");
        // |u - c/a|_p <= floor(rho) * |a|_p^{-1} = p^e
        let e = crate::arith::power_exponent_below(rho, *p, false) + va;
        let cu = c / a;
        let vc = valuation(&cu, *p).map(|v| -v).unwrap_or(i64::MIN);
        let big_e = 0.max(e).max(vc);
        denom *= p.as_bigint().pow(big_e as u32);
        congr.push((cu, e, *p));
    }
    let d_rat = Rational::from_integer(denom.clone());
    let (mut k_res, mut modulus) = (BigInt::zero(), BigInt::one());
    for (cu, e, p) in &congr {
        let vd = valuation(&d_rat, *p).unwrap_or(0);
        let f = vd - e;
        if f <= 0 {
            continue;
        }
        let m = p.as_bigint().pow(f as u32);
        let r = residue(&(cu * &d_rat), &m);
        // CRT merge of k ≡ k_res (mod modulus) with k ≡ r (mod m)
        let t = ((r - &k_res).mod_floor(&m) * mod_inverse(&modulus.mod_floor(&m), &m)).mod_floor(&m);
        k_res += &modulus * t;
        modulus *= &m;
        k_res = k_res.mod_floor(&modulus);
    }
    let lo_r = (&c0 - &t0) * &d_rat;
    let hi_r = (&c0 + &t0) * &d_rat;
    let (lo, hi) = if q.real_strict {
        (lo_r.floor().to_integer() + 1, hi_r.ceil().to_integer() - 1)
    } else {
        (lo_r.ceil().to_integer(), hi_r.floor().to_integer())
    };
    if lo > hi {
        return Ok(Vec::new());
    }
    let first = &lo + (&k_res - &lo).mod_floor(&modulus);
    if first > hi {
        return Ok(Vec::new());
    }
    let count = (&hi - &first) / &modulus + 1;
    if count > BigInt::from(cap) {
        return Err(Error::Budget(format!(
            "{count} lattice candidates exceed the cap of {cap}"
        )));
    }
    let mut out = Vec::new();
    let mut k = first;
    while k <= hi {
        out.push(Rational::new(k.clone(), denom.clone()) * a);
        k += &modulus;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatticeDistance {
    Within {
        #[serde(with = "qser")]
        distance: Rational,
        #[serde(with = "qser")]
        witness: Rational,
    },
    AtLeast {
        #[serde(with = "qser")]
        bound: Rational,
    },
}

impl LatticeDistance {
    pub fn distance(&self) -> Option<&Rational> {
        match self {
            LatticeDistance::Within { distance, .. } => Some(distance),
            LatticeDistance::AtLeast { .. } => None,
        }
    }

    /// Whether the true distance is `>= t`.
    pub fn at_least(&self, t: &Rational) -> bool {
        match self {
            LatticeDistance::Within { distance, .. } => distance >= t,
            LatticeDistance::AtLeast { bound } => bound >= t,
        }
    }
}

/// `min_{z in R} d(w, Δ(z))` when below `search_bound`.
pub fn lattice_distance(w: &Point, search_bound: &Rational) -> Result<LatticeDistance> {
    lattice_distance_scaled(w, &Rational::one(), search_bound)
}

/// As [`lattice_distance`] over the scaled lattice Δ(a·R).
pub fn lattice_distance_scaled(
    w: &Point,
    scale: &Rational,
    search_bound: &Rational,
) -> Result<LatticeDistance> {
    if !search_bound.is_positive() {
        return Err(Error::Domain("search bound must be positive".into()));
    }
    let q = RingSearch::around(w, scale, search_bound, true);
    let mut best: Option<(Rational, Rational)> = None;
    for z in enumerate_ring(w.primes(), &q, DEFAULT_SEARCH_CAP)? {
        let d = distance_to_diagonal(w, &z);
        if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
            best = Some((d, z));
        }
    }
    Ok(match best {
        Some((distance, witness)) => LatticeDistance::Within { distance, witness },
        None => LatticeDistance::AtLeast {
            bound: search_bound.clone(),
        },
    })
}

/// Smallest positive `d(w, Δ(a z))` over `z in R`, with witness `a z`.
/// Doubles the search bound from `start` until a positive value appears.
pub fn min_positive_lattice_distance(
    w: &Point,
    scale: &Rational,
    start: &Rational,
) -> Result<(Rational, Rational)> {
    if !start.is_positive() {
        return Err(Error::Domain("search bound must be positive".into()));
    }
    let mut bound = start.clone();
    for _ in 0..64 {
        let q = RingSearch::around(w, scale, &bound, false);
        let mut best: Option<(Rational, Rational)> = None;
        for z in enumerate_ring(w.primes(), &q, DEFAULT_SEARCH_CAP)? {
            let d = distance_to_diagonal(w, &z);
            if d.is_positive() && best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                best = Some((d, z));
            }
        }
        if let Some(b) = best {
            return Ok(b);
        }
        bound *= Rational::from_integer(2.into());
    }
    Err(Error::Budget("no positive lattice distance found".into()))
}

/// A random point of `b` (exact rationals with modest denominators).
pub fn sample_in_ball<R: Rng + ?Sized>(b: &Ball, rng: &mut R) -> Point {
    let mut coords = Vec::with_capacity(b.primes().places());
    for i in 0..b.primes().places() {
        coords.push(sample_in_projection(&b.projection(i).expect("in range"), rng));
    }
    Point {
        primes: b.primes().clone(),
        coords,
    }
}

pub fn sample_in_projection<R: Rng + ?Sized>(proj: &Projection, rng: &mut R) -> Rational {
    match proj {
        Projection::Interval {
            center,
            radius,
            closed,
        } => {
            let n: i64 = 1 << 12;
            let k = if *closed {
                rng.gen_range(-n..=n)
            } else {
                rng.gen_range(-n + 1..n)
            };
            center + radius * Rational::new(k.into(), n.into())
        }
        Projection::PAdic {
            prime,
            center,
            radius,
        } => {
            // radius = p^e; center + p^{-e} k with k a p-adic integer
            let k: i64 = rng.gen_range(-4096..=4096);
            let den: i64 = [1, 5, 7, 11, 13][rng.gen_range(0..5)];
            let den = if prime.value() == den as u64 { 1 } else { den };
            let unit = Rational::new(k.into(), den.into());
            // |unit / p^e|_p <= p^e
            center + unit / radius
        }
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.closed { "B̄" } else { "B" };
        write!(f, "{tag}({}, {})", self.center, fmt_rational(&self.radius))
    }
}

impl fmt::Display for Cylinder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "C({}, {}, {})",
            self.anchor,
            fmt_rational(&self.epsilon),
            self.constraining_index
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{int, rat};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p23() -> PrimeSet {
        PrimeSet::from_u64(&[2, 3]).unwrap()
    }

    fn pt(ps: &PrimeSet, x0: Rational, x2: Rational, x3: Rational) -> Point {
        Point::new(ps, x0, vec![x2, x3]).unwrap()
    }

    #[test]
    fn parse_points() {
        let ps = p23();
        assert_eq!(Point::parse(&ps, "1/2").unwrap(), Point::diagonal(&ps, &rat(1, 2)));
        assert_eq!(
            Point::parse(&ps, "(1/8; 0, -3)").unwrap(),
            pt(&ps, rat(1, 8), int(0), int(-3))
        );
        assert!(Point::parse(&ps, "1;2").is_err());
        assert!(Point::parse(&ps, "x").is_err());
    }

    #[test]
    fn json_keys_sort_numerically() {
        let ps = PrimeSet::from_u64(&[2, 11]).unwrap();
        let x = Point::new(&ps, rat(1, 3), vec![int(5), rat(1, 11)]).unwrap();
        let c = Cylinder::new(x.clone(), rat(1, 9), 2).unwrap();
        let back: Cylinder = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let v = serde_json::json!({"real": "1/3", "padic": {"11": "1/11", "2": "5"}});
        assert_eq!(serde_json::from_value::<Point>(v).unwrap(), x);
    }

    #[test]
    fn distance_examples() {
        let ps = p23();
        let o = Point::zero(&ps);
        let z = pt(&ps, rat(1, 4), rat(3, 4), rat(1, 6));
        assert_eq!(distance(&o, &z).unwrap(), int(2));
        assert_eq!(distance(&z, &z).unwrap(), int(0));
        let z = pt(&ps, rat(1, 4), int(2), int(3));
        assert_eq!(distance(&o, &z).unwrap(), rat(1, 4));
    }

    #[test]
    fn distance_rejects_mismatched_sets() {
        let a = Point::zero(&p23());
        let b = Point::zero(&PrimeSet::from_u64(&[2, 5]).unwrap());
        assert_eq!(distance(&a, &b), Err(Error::PrimeSetMismatch));
    }

    #[test]
    fn projection_examples() {
        let ps = p23();
        let b = Ball::closed(Point::zero(&ps), rat(1, 4)).unwrap();
        match b.projection(1).unwrap() {
            Projection::PAdic { radius, .. } => assert_eq!(radius, rat(1, 2)),
            _ => panic!(),
        }
        match b.projection(2).unwrap() {
            Projection::PAdic { radius, .. } => assert_eq!(radius, rat(1, 3)),
            _ => panic!(),
        }
        assert_eq!(
            b.projection(0).unwrap(),
            Projection::Interval {
                center: int(0),
                radius: rat(1, 4),
                closed: true
            }
        );
        assert!(matches!(
            b.projection(3),
            Err(Error::PlaceOutOfRange { index: 3, .. })
        ));
    }

    #[test]
    fn normalize_examples() {
        let ps = PrimeSet::from_u64(&[2]).unwrap();
        let x = Point::zero(&ps);
        let c = cylinder_normalize(x.clone(), rat(1, 16), 1).unwrap();
        assert_eq!(c.normalized_radius, rat(1, 32));
        let c = cylinder_normalize(x.clone(), rat(1, 10), 1).unwrap();
        assert_eq!(c.normalized_radius, rat(1, 16));
        let c = cylinder_normalize(x.clone(), rat(1, 10), 0).unwrap();
        assert_eq!(c.normalized_radius, rat(1, 10));
        assert!(cylinder_normalize(x, int(0), 0).is_err());
    }

    #[test]
    fn normalize_preserves_point_set() {
        let ps = PrimeSet::from_u64(&[2]).unwrap();
        let x = Point::zero(&ps);
        let c = cylinder_normalize(x.clone(), rat(1, 16), 1).unwrap();
        // {|y|_2 <= 1/16}
        let inside = Point::new(&ps, int(5), vec![int(16)]).unwrap();
        let outside = Point::new(&ps, int(5), vec![int(8)]).unwrap();
        assert!(c.contains_point(&inside).unwrap());
        assert!(!c.contains_point(&outside).unwrap());
        let again = cylinder_normalize(x, c.normalized_radius.clone(), 1).unwrap();
        assert!(again.normalized_radius <= c.normalized_radius);
    }

    #[test]
    fn containment_examples() {
        let ps = p23();
        let o = Point::zero(&ps);
        let b = Ball::closed(o.clone(), rat(1, 4)).unwrap();
        assert!(b.contains_ball(&b).unwrap());
        let big = Ball::closed(o.clone(), int(1)).unwrap();
        let far = Ball::closed(Point::real_only(&ps, int(2)), rat(1, 4)).unwrap();
        assert!(!big.contains_ball(&far).unwrap());
        let inner = Ball::closed(pt(&ps, int(0), int(2), int(0)), rat(1, 16)).unwrap();
        assert!(b.contains_ball(&inner).unwrap());
    }

    #[test]
    fn open_closed_containment() {
        let ps = p23();
        let o = Point::zero(&ps);
        let open = Ball::new(o.clone(), rat(1, 4), false).unwrap();
        let closed = Ball::closed(o, rat(1, 4)).unwrap();
        assert!(closed.contains_ball(&open).unwrap());
        assert!(!open.contains_ball(&closed).unwrap());
    }

    #[test]
    fn disjoint_examples() {
        let ps = p23();
        let o = Point::zero(&ps);
        let b = Ball::closed(o.clone(), rat(1, 4)).unwrap();
        let c = Cylinder::new(o.clone(), rat(1, 1000), 2).unwrap();
        assert!(!b.disjoint_from_cylinder(&c).unwrap());
        let b = Ball::closed(pt(&ps, int(0), int(2), int(0)), rat(1, 16)).unwrap();
        let c = Cylinder::new(o.clone(), rat(1, 16), 1).unwrap();
        assert!(b.disjoint_from_cylinder(&c).unwrap());
        let c = Cylinder::new(Point::real_only(&ps, int(10)), int(1), 0).unwrap();
        let b = Ball::closed(o, int(1)).unwrap();
        assert!(b.disjoint_from_cylinder(&c).unwrap());
    }

    #[test]
    fn lattice_distance_examples() {
        let ps = p23();
        let w = Point::diagonal(&ps, &rat(5, 6));
        assert_eq!(
            lattice_distance(&w, &int(1)).unwrap(),
            LatticeDistance::Within {
                distance: int(0),
                witness: rat(5, 6)
            }
        );
        let w = Point::real_only(&ps, rat(1, 2));
        assert_eq!(
            lattice_distance(&w, &int(1)).unwrap(),
            LatticeDistance::Within {
                distance: rat(1, 2),
                witness: int(0)
            }
        );
        let (d, _) = min_positive_lattice_distance(&Point::zero(&ps), &int(1), &rat(1, 2)).unwrap();
        assert_eq!(d, int(1));
        assert!(lattice_distance(&w, &int(0)).is_err());
    }

    #[test]
    fn lattice_distance_matches_brute_force() {
        let ps = p23();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..12 {
            let c = |rng: &mut ChaCha8Rng| rat(rng.gen_range(-40..40), rng.gen_range(1..13));
            let w = pt(&ps, c(&mut rng), c(&mut rng), c(&mut rng));
            let fast = lattice_distance(&w, &int(2)).unwrap();
            // brute force over k / (2^a 3^b)
            let mut best: Option<Rational> = None;
            // exponents above 4 cannot reach distance < 2 for these w
            for a in 0..5u32 {
                for b in 0..5u32 {
                    let den = 2i64.pow(a) * 3i64.pow(b);
                    let lo = ((w.real() - int(2)) * int(den)).floor().to_integer();
                    let hi = ((w.real() + int(2)) * int(den)).ceil().to_integer();
                    let mut k = lo;
                    while k <= hi {
                        let z = Rational::new(k.clone(), den.into());
                        let d = distance_to_diagonal(&w, &z);
                        if d < int(2) && best.as_ref().map_or(true, |x| &d < x) {
                            best = Some(d);
                        }
                        k += 1;
                    }
                }
            }
            assert_eq!(fast.distance().cloned(), best, "w = {w}");
        }
    }

    #[test]
    fn scaled_lattice_discreteness() {
        let ps = p23();
        let o = Point::zero(&ps);
        let (d, _) = min_positive_lattice_distance(&o, &rat(1, 243), &rat(1, 2)).unwrap();
        assert_eq!(d, int(1));
        // 5·R: the best element is 5/6 with distance max(5/6, 1, 1)
        let (d, z) = min_positive_lattice_distance(&o, &int(5), &rat(1, 2)).unwrap();
        assert_eq!((d, z.abs()), (int(1), rat(5, 6)));
    }

    #[test]
    fn samples_stay_in_ball() {
        let ps = p23();
        let b = Ball::closed(pt(&ps, rat(1, 3), rat(1, 2), int(4)), rat(1, 20)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            assert!(b.contains_point(&sample_in_ball(&b, &mut rng)).unwrap());
        }
    }

    #[test]
    fn point_json_schema() {
        let ps = p23();
        let x = pt(&ps, rat(1, 4), rat(3, 4), int(2));
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, r#"{"real":"1/4","padic":{"2":"3/4","3":"2"}}"#);
        let back: Point = serde_json::from_str(&s).unwrap();
        assert_eq!(back, x);
    }
}
