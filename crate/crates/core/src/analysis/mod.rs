//! Counting and dimension estimates: Chebyshev-type sums, the products
//! P_P(x), Haar ball bounds, packing counts and the F* Cantor scheme.

pub mod fixtures;
mod fstar;
mod packing;

pub use fstar::{audit_tree, fstar_tree, psi_word, CantorTree, TreeAudit, TreeNode};
pub use packing::{
    default_truncation, dimension_sweep, hausdorff_lower, nc_bruteforce, nc_lower, truncation_sweep, DimensionRow,
};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{
    padic_abs, power_exponent_below, prime_power, primes_up_to, qser, rat, Prime, Rational,
};
use crate::error::{Error, Result};
use crate::hp::Decimal;
use crate::solenoid::{Point, PrimeSet};

/// Either all primes or a fixed finite set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimeFamily {
    All,
    Finite(PrimeSet),
}

impl PrimeFamily {
    /// Primes of the family below `x` (or up to `x` when `inclusive`).
    pub fn primes_below(&self, x: &Rational, inclusive: bool) -> Vec<Prime> {
        let keep = |p: &Prime| {
            let pr = p.as_rational();
            if inclusive {
                &pr <= x
            } else {
                &pr < x
            }
        };
        match self {
            PrimeFamily::All => {
                let bound = x.floor().to_integer().to_u64().unwrap_or(0);
                primes_up_to(bound).into_iter().filter(keep).collect()
            }
            PrimeFamily::Finite(ps) => ps.primes().iter().copied().filter(keep).collect(),
        }
    }
}

fn check_above_one(x: &Rational) -> Result<()> {
    if x <= &Rational::one() {
        return Err(Error::Domain(format!("x must exceed 1, got {x}")));
    }
    Ok(())
}

/// `θ_P(x) = Σ_{p <= x, p in P} ln p`.
pub fn theta_p(x: &Rational, family: &PrimeFamily) -> Result<Decimal> {
    check_above_one(x)?;
    Ok(family
        .primes_below(x, true)
        .into_iter()
        .map(|p| Decimal::ln_int(p.value()))
        .sum())
}

/// `P_P(x) = Π_{p < x} ⌊p/x⌋_p`.
pub fn pp_product(x: &Rational, family: &PrimeFamily) -> Result<Rational> {
    check_above_one(x)?;
    let mut out = Rational::one();
    for p in family.primes_below(x, false) {
        let e = power_exponent_below(&(p.as_rational() / x), p, false);
        out *= prime_power(p, e);
    }
    Ok(out)
}

/// The same product regrouped by exponent: p contributes p^{-k} exactly when
/// `p^k < x <= p^{k+1}`.
pub fn pp_product_double(x: &Rational, family: &PrimeFamily) -> Result<Rational> {
    check_above_one(x)?;
    let primes = family.primes_below(x, false);
    let mut out = Rational::one();
    let mut k = 1u32;
    while Rational::from_integer(BigInt::from(2).pow(k)) < *x {
        for p in &primes {
            let pk = Rational::from_integer(p.as_bigint().pow(k));
            let pk1 = &pk * p.as_rational();
            if &pk < x && x <= &pk1 {
                out /= pk;
            }
        }
        k += 1;
    }
    Ok(out)
}

/// `θ_P(x^{1/k})`: primes with `p^k <= x`.
fn theta_root(x: &Rational, k: u32, family: &PrimeFamily) -> Decimal {
    family
        .primes_below(x, true)
        .into_iter()
        .filter(|p| Rational::from_integer(p.as_bigint().pow(k)) <= *x)
        .map(|p| Decimal::ln_int(p.value()))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProdBound {
    #[serde(with = "qser")]
    pub x: Rational,
    #[serde(with = "qser")]
    pub product: Rational,
    pub theta: Decimal,
    pub neg_ln_product: Decimal,
    /// `-ln P_P(x) - θ_P(x)`.
    pub margin: Decimal,
    /// `-c (ln x)^2` with the recorded constant.
    pub floor: Decimal,
    /// `Σ_{k<=ℓ} θ(x^{1/k}) - ℓ(θ(x^{1/(ℓ+1)}) + ln x)`.
    pub intermediate: Decimal,
    /// `-ln P_P(x) >= θ_P(x)`.
    pub dominates: bool,
    /// margin >= floor and intermediate <= -ln P_P(x).
    pub ok: bool,
}

pub fn prod_bound_check(x: &Rational, family: &PrimeFamily) -> Result<ProdBound> {
    if x <= &rat(2, 1) {
        return Err(Error::Domain("prod_bound_check needs x > 2".into()));
    }
    let product = pp_product(x, family)?;
    let theta = theta_p(x, family)?;
    let neg_ln_product = -Decimal::ln(&product);
    let ln_x = Decimal::ln(x);
    let margin = &neg_ln_product - &theta;
    let floor = -(&ln_x * &ln_x).mul_rational(&rat(fixtures::PROD_BOUND_FACTOR, 1));
    // ℓ with 2^ℓ < x <= 2^{ℓ+1}
    let mut ell = 0u32;
    while Rational::from_integer(BigInt::from(2).pow(ell + 1)) < *x {
        ell += 1;
    }
    let mut intermediate = Decimal::zero();
    for k in 1..=ell {
        intermediate = intermediate + theta_root(x, k, family);
    }
    let tail = theta_root(x, ell + 1, family) + ln_x;
    intermediate = intermediate - tail.mul_rational(&rat(ell as i64, 1));
    let ok = margin >= floor && intermediate <= neg_ln_product;
    Ok(ProdBound {
        x: x.clone(),
        product,
        dominates: neg_ln_product >= theta,
        theta,
        neg_ln_product,
        margin,
        floor,
        intermediate,
        ok,
    })
}

/// One row of the `P_P(1/r) <= r^{c (1/r)/ln(1/r)}` check, in logarithms:
/// `-ln P_P(1/r) >= c / r`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecayRow {
    #[serde(with = "qser")]
    pub r: Rational,
    pub neg_ln_product: Decimal,
    pub required: Decimal,
    pub ok: bool,
}

pub fn pp_decay_check(r: &Rational, family: &PrimeFamily) -> Result<DecayRow> {
    if !r.is_positive() || r >= &Rational::one() {
        return Err(Error::Domain("r must lie in (0,1)".into()));
    }
    let product = pp_product(&r.recip(), family)?;
    let neg_ln_product = -Decimal::ln(&product);
    let (cn, cd) = fixtures::PP_DECAY_CONSTANT;
    let required = Decimal::from_rational(&(rat(cn, cd) / r));
    Ok(DecayRow {
        r: r.clone(),
        ok: neg_ln_product >= required,
        neg_ln_product,
        required,
    })
}

/// `2r · P_P(1/r)`, the bound on the normalized Haar measure of an r-ball.
pub fn haar_ball_bound(r: &Rational, family: &PrimeFamily) -> Result<Rational> {
    if !r.is_positive() || r >= &Rational::one() {
        return Err(Error::Domain("r must lie in (0,1)".into()));
    }
    Ok(rat(2, 1) * r * pp_product(&r.recip(), family)?)
}

/// Exact measure of `B̄(center, r) ∩ ([0,1] × Π Z_p)` for the product of
/// Lebesgue measure and Haar measures normalized by `μ(Z_p) = 1`.
pub fn haar_ball_measure(center: &Point, r: &Rational) -> Result<Rational> {
    if !r.is_positive() {
        return Err(Error::Domain("r must be positive".into()));
    }
    let zero = Rational::zero();
    let one = Rational::one();
    let lo = (center.real() - r).max(zero.clone());
    let hi = (center.real() + r).min(one.clone());
    let mut out = if hi > lo { hi - lo } else { zero.clone() };
    for (k, p) in center.primes().primes().iter().enumerate() {
        let c = center.coord(k + 1);
        let level = prime_power(*p, power_exponent_below(&(r * p.as_rational()), *p, false));
        let in_zp = padic_abs(c, *p) <= one;
        let m = if in_zp {
            level.min(one.clone())
        } else if level >= padic_abs(c, *p) {
            one.clone()
        } else {
            zero.clone()
        };
        out *= m;
    }
    Ok(out)
}

/// One table row: either a product check at `x` or a dimension bound at β.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountingReport {
    #[serde(with = "qser::opt", skip_serializing_if = "Option::is_none", default)]
    pub x: Option<Rational>,
    #[serde(with = "qser::opt", skip_serializing_if = "Option::is_none", default)]
    pub beta: Option<Rational>,
    pub theta: Option<Decimal>,
    #[serde(with = "qser::opt", skip_serializing_if = "Option::is_none", default)]
    pub product: Option<Rational>,
    pub bound_check: Option<bool>,
    pub dim_lower: Option<Decimal>,
}

impl From<&ProdBound> for CountingReport {
    fn from(b: &ProdBound) -> Self {
        CountingReport {
            x: Some(b.x.clone()),
            beta: None,
            theta: Some(b.theta.clone()),
            product: Some(b.product.clone()),
            bound_check: Some(b.ok),
            dim_lower: None,
        }
    }
}

impl From<&DimensionRow> for CountingReport {
    fn from(r: &DimensionRow) -> Self {
        CountingReport {
            x: None,
            beta: Some(r.beta.clone()),
            theta: None,
            product: None,
            bound_check: None,
            dim_lower: Some(r.dim_lower.clone()),
        }
    }
}
