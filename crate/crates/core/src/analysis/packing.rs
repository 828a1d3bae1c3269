//! Disjoint sub-ball counts and the dimension bounds built on them.

use num_traits::{One, Signed, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fixtures;
use crate::arith::{first_primes, power_exponent_below, prime_power, qser, rat, Prime, Rational};
use crate::error::{Error, Result};
use crate::hp::Decimal;
use crate::solenoid::{Ball, Cylinder, Point, PrimeSet};

fn check_beta(beta: &Rational, ps: &PrimeSet, i: usize) -> Result<()> {
    ps.prime_at(i)?;
    let mut ceiling = ps.beta_ceiling(0)?;
    for k in 1..ps.places() {
        ceiling = ceiling.min(ps.beta_ceiling(k)?);
    }
    if !beta.is_positive() || beta >= &ceiling {
        return Err(Error::Parameter(format!(
            "beta must lie in (0, {ceiling}), got {beta}"
        )));
    }
    Ok(())
}

/// Real-place children: centers `-1 + (3k + 3/2)β` (in units of the parent
/// radius) that stay inside the parent.
pub(crate) fn real_count(beta: &Rational) -> u64 {
    let t = (rat(2, 1) / beta - rat(5, 2)) / rat(3, 1);
    if t.is_negative() {
        return 0;
    }
    t.floor().to_integer().to_u64().unwrap_or(0) + 1
}

/// `(p ⌊β⌋_p)^{-1}`, a lower bound for `⌊pr⌋_p / ⌊pβr⌋_p` at every radius.
pub(crate) fn padic_count(beta: &Rational, p: Prime) -> u64 {
    let e = power_exponent_below(beta, p, false);
    // ⌊β⌋_p = p^e with e <= -1
    p.value().pow((-e - 1) as u32)
}

/// Constructive number of pairwise separated sub-balls of radius βr inside a
/// ball of radius r that avoid a cylinder constraining place `i`.
pub fn nc_lower(beta: &Rational, ps: &PrimeSet, i: usize) -> Result<u64> {
    check_beta(beta, ps, i)?;
    let mut real = real_count(beta);
    if i == 0 {
        real = real.saturating_sub(2);
    }
    let mut total = real;
    for (k, p) in ps.primes().iter().enumerate() {
        let mut f = padic_count(beta, *p);
        if k + 1 == i {
            f -= 1;
        }
        total = total.saturating_mul(f);
    }
    Ok(total)
}

/// Largest number of sub-balls at one place, found by searching a finite
/// candidate grid inside the unit ball centered at 0.
fn place_max(beta: &Rational, ps: &PrimeSet, place: usize, constrained: bool) -> Result<u64> {
    let origin = Point::zero(ps);
    let blocked = Cylinder::new(origin.clone(), beta.clone(), place)?;
    let parent = Ball::closed(origin.clone(), Rational::one())?;
    let candidates: Vec<Rational> = match ps.prime_at(place)? {
        None => {
            // pitch β/4 from -1+β to 1-β
            let pitch = beta / rat(4, 1);
            let steps = ((rat(2, 1) - rat(2, 1) * beta) / &pitch)
                .floor()
                .to_integer()
                .to_u64()
                .unwrap_or(0);
            (0..=steps)
                .map(|k| rat(-1, 1) + beta + &pitch * rat(k as i64, 1))
                .collect()
        }
        Some(p) => {
            let outer = power_exponent_below(&p.as_rational(), p, false);
            let inner = power_exponent_below(&(beta * p.as_rational()), p, false);
            let classes = p.value().pow((outer - inner) as u32);
            if classes > 1 << 16 {
                return Err(Error::Budget(format!("{classes} cosets at p = {p}")));
            }
            // j p^{-outer} runs over the cosets of the child radius
            let step = prime_power(p, -outer);
            (0..classes).map(|j| &step * rat(j as i64, 1)).collect()
        }
    };
    let child = |c: &Rational| -> Result<Ball> {
        Ball::closed(origin.with_coord(place, c.clone())?, beta.clone())
    };
    // Conflicts form intervals on the line and classes of an equivalence
    // relation at p-adic places; in both cases a greedy left-to-right pass
    // is optimal.
    let mut chosen: Vec<Ball> = Vec::new();
    for c in &candidates {
        let b = child(c)?;
        if !parent.projection(place)?.contains_projection(&b.projection(place)?) {
            continue;
        }
        if constrained && !b.disjoint_from_cylinder(&blocked)? {
            continue;
        }
        let mut ok = true;
        for other in &chosen {
            let g = b.projection(place)?.gap(&other.projection(place)?);
            if g < *beta || !b.projection(place)?.disjoint(&other.projection(place)?) {
                ok = false;
                break;
            }
        }
        if ok {
            chosen.push(b);
        }
    }
    Ok(chosen.len() as u64)
}

/// Exact packing count by search, one place at a time; the product of
/// per-place maxima is itself a valid packing of the product ball.
pub fn nc_bruteforce(beta: &Rational, ps: &PrimeSet, i: usize) -> Result<u64> {
    check_beta(beta, ps, i)?;
    let (mn, md) = fixtures::BRUTE_MIN_BETA;
    if beta < &rat(mn, md) || ps.primes().iter().any(|p| p.value() > 3) {
        return Err(Error::Budget(format!(
            "brute force needs P within {{2,3}} and beta >= {mn}/{md}"
        )));
    }
    let mut total = 1u64;
    for place in 0..ps.places() {
        total *= place_max(beta, ps, place, place == i)?;
    }
    Ok(total)
}

/// `min_i ln nc_lower(β, i) / |ln β|`, or 0 when some count is at most 1.
pub fn hausdorff_lower(beta: &Rational, ps: &PrimeSet) -> Result<Decimal> {
    let n = min_count(beta, ps)?;
    Ok(dim_from_count(n, beta))
}

fn min_count(beta: &Rational, ps: &PrimeSet) -> Result<u64> {
    let mut best = u64::MAX;
    for i in 0..ps.places() {
        best = best.min(nc_lower(beta, ps, i)?);
    }
    Ok(best)
}

fn dim_from_count(n: u64, beta: &Rational) -> Decimal {
    if n <= 1 {
        return Decimal::zero();
    }
    Decimal::ln_int(n).div(&Decimal::ln(beta).abs())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionRow {
    #[serde(with = "qser")]
    pub beta: Rational,
    pub primes: PrimeSet,
    /// `nc_lower` for each constraining place.
    pub counts: Vec<u64>,
    pub branching: u64,
    pub dim_lower: Decimal,
}

fn row(beta: &Rational, ps: &PrimeSet) -> Result<DimensionRow> {
    let counts = (0..ps.places())
        .map(|i| nc_lower(beta, ps, i))
        .collect::<Result<Vec<_>>>()?;
    let branching = *counts.iter().min().unwrap_or(&0);
    Ok(DimensionRow {
        beta: beta.clone(),
        primes: ps.clone(),
        dim_lower: dim_from_count(branching, beta),
        counts,
        branching,
    })
}

/// Dimension bounds over a list of β, in input order.
pub fn dimension_sweep(betas: &[Rational], ps: &PrimeSet) -> Result<Vec<DimensionRow>> {
    betas.par_iter().map(|b| row(b, ps)).collect()
}

/// Dimension bounds at fixed β for the first m primes, m = 1..=max.
pub fn truncation_sweep(beta: &Rational, max: usize) -> Result<Vec<DimensionRow>> {
    (1..=max)
        .into_par_iter()
        .map(|m| {
            let ps = PrimeSet::new(first_primes(m))?;
            row(beta, &ps)
        })
        .collect()
}

/// The β and truncation schedule recorded in the fixtures.
pub fn default_truncation() -> Result<Vec<DimensionRow>> {
    let (n, d) = fixtures::TRUNCATION_BETA;
    truncation_sweep(&rat(n, d), fixtures::TRUNCATION_MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p23() -> PrimeSet {
        PrimeSet::from_u64(&[2, 3]).unwrap()
    }

    #[test]
    fn lower_counts() {
        assert_eq!(nc_lower(&rat(1, 12), &p23(), 0).unwrap(), 432);
        assert_eq!(nc_lower(&rat(1, 12), &p23(), 1).unwrap(), 8 * 7 * 9);
        assert_eq!(nc_lower(&rat(1, 12), &p23(), 2).unwrap(), 8 * 8 * 8);
        assert!(nc_lower(&rat(1, 3), &p23(), 0).is_err());
        assert!(nc_lower(&rat(1, 12), &p23(), 3).is_err());
    }

    #[test]
    fn power_of_p_drops() {
        let two = PrimeSet::from_u64(&[2]).unwrap();
        assert_eq!(padic_count(&rat(1, 4), Prime::new(2).unwrap()), 2);
        assert_eq!(padic_count(&rat(3, 16), Prime::new(2).unwrap()), 4);
        assert_eq!(nc_lower(&rat(1, 4), &two, 2 - 1).unwrap(), real_count(&rat(1, 4)));
    }

    #[test]
    fn brute_dominates() {
        for ps in [vec![2], vec![3], vec![2, 3]] {
            let ps = PrimeSet::from_u64(&ps).unwrap();
            for d in 4..=24 {
                let beta = rat(1, d);
                if check_beta(&beta, &ps, 0).is_err() {
                    continue;
                }
                for i in 0..ps.places() {
                    let lo = nc_lower(&beta, &ps, i).unwrap();
                    let hi = nc_bruteforce(&beta, &ps, i).unwrap();
                    assert!(hi >= lo, "{ps:?} beta={beta} i={i}: {hi} < {lo}");
                }
            }
        }
    }

    #[test]
    fn brute_anchor() {
        let got: Vec<u64> = (0..3)
            .map(|i| nc_bruteforce(&rat(1, 6), &p23(), i).unwrap())
            .collect();
        assert_eq!(got, fixtures::BRUTE_ANCHOR_SIXTH);
    }

    #[test]
    fn brute_budget() {
        assert!(nc_bruteforce(&rat(1, 25), &p23(), 0).is_err());
        let five = PrimeSet::from_u64(&[5]).unwrap();
        assert!(nc_bruteforce(&rat(1, 6), &five, 0).is_err());
    }

    #[test]
    fn dimension_values() {
        let d = hausdorff_lower(&rat(1, 48), &p23()).unwrap();
        assert!(d > Decimal::from_rational(&rat(5, 2)));
        let rows = dimension_sweep(&[rat(1, 12), rat(1, 24), rat(1, 48)], &p23()).unwrap();
        assert_eq!(rows[0].branching, 432);
        assert_eq!(rows[1].branching, 2016);
        let tol = Decimal::from_rational(&rat(fixtures::HALVING_TOLERANCE.0, fixtures::HALVING_TOLERANCE.1));
        for w in rows.windows(2) {
            assert!(w[1].dim_lower >= &w[0].dim_lower - &tol);
        }
    }

    #[test]
    fn truncation_grows() {
        let rows = default_truncation().unwrap();
        assert_eq!(rows.len(), 6);
        for w in rows.windows(2) {
            assert!(w[1].dim_lower > w[0].dim_lower);
        }
    }
}
