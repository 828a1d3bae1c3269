//! Affine endomorphisms x ↦ (m/n)x + a of X_P and the constants that the
//! orbit-avoidance strategy is built from.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{fmt_rational, padic_abs, pow, qser, Rational};
use crate::error::{Error, Result};
use crate::solenoid::{
    min_positive_lattice_distance, Cylinder, Point, PrimeSet,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineEndo {
    #[serde(with = "qser")]
    pub linear: Rational,
    pub translation: Point,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralData {
    #[serde(with = "qser::vec")]
    pub lambdas: Vec<Rational>,
    #[serde(with = "qser")]
    pub lambda_a: Rational,
    pub i0: usize,
    pub ell: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvoidanceParams {
    #[serde(with = "qser")]
    pub beta: Rational,
    #[serde(with = "qser")]
    pub r0: Rational,
    #[serde(with = "qser")]
    pub mu: Rational,
    pub ell: u32,
    #[serde(with = "qser")]
    pub a_scale: Rational,
    #[serde(with = "qser")]
    pub delta_unif: Rational,
    #[serde(with = "qser")]
    pub b: Rational,
    #[serde(with = "qser")]
    pub t0: Rational,
    #[serde(with = "qser")]
    pub epsilon: Rational,
    pub k0: u32,
    #[serde(with = "qser")]
    pub delta: Rational,
    #[serde(with = "qser")]
    pub r_cap: Rational,
    pub spectral: SpectralData,
}

/// Per-place radii of A^{-j}B(w, t) and the cylinder that encloses it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enclosure {
    pub center: Point,
    pub place_radii: Vec<Rational>,
    pub cylinder: Cylinder,
}

impl AffineEndo {
    pub fn new(linear: Rational, translation: Point) -> Result<Self> {
        if linear.is_zero() {
            return Err(Error::Domain("linear part must be nonzero".into()));
        }
        if !translation.primes().in_ring(&linear) {
            return Err(Error::Domain(format!(
                "linear part {} is not in Z[1/P]",
                fmt_rational(&linear)
            )));
        }
        Ok(AffineEndo {
            linear,
            translation,
        })
    }

    pub fn linear_map(primes: &PrimeSet, linear: Rational) -> Result<Self> {
        AffineEndo::new(linear, Point::zero(primes))
    }

    pub fn primes(&self) -> &PrimeSet {
        self.translation.primes()
    }

    /// |m/n| at every place, index 0 archimedean.
    pub fn lambdas(&self) -> Vec<Rational> {
        place_abs_all(self.primes(), &self.linear)
    }

    pub fn is_degenerate(&self) -> bool {
        let one = Rational::one();
        self.linear.abs() == one
    }

    /// Whether the translation is trivial on the solenoid, i.e. lies in Δ(R).
    pub fn translation_is_trivial(&self) -> bool {
        self.translation
            .diagonal_value()
            .is_some_and(|q| self.primes().in_ring(q))
    }

    /// Whether the lift is invertible over R (n/m in R as well).
    pub fn is_invertible_over_ring(&self) -> bool {
        self.primes().is_unit(&self.linear)
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        x.scale(&self.linear).add(&self.translation)
    }

    pub fn apply_iter(&self, j: u32, x: &Point) -> Result<Point> {
        let mut out = x.clone();
        for _ in 0..j {
            out = self.apply(&out)?;
        }
        Ok(out)
    }

    pub fn apply_inv(&self, x: &Point) -> Result<Point> {
        Ok(x.sub(&self.translation)?.scale(&self.linear.recip()))
    }

    pub fn apply_inv_iter(&self, j: u32, x: &Point) -> Result<Point> {
        let mut out = x.clone();
        for _ in 0..j {
            out = self.apply_inv(&out)?;
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<AffineEndo> {
        let inv = self.linear.recip();
        AffineEndo::new(inv.clone(), self.translation.scale(&(-inv)))
    }
}

pub fn place_abs_all(primes: &PrimeSet, q: &Rational) -> Vec<Rational> {
    let mut out = Vec::with_capacity(primes.places());
    out.push(q.abs());
    out.extend(primes.primes().iter().map(|p| padic_abs(q, *p)));
    out
}

/// λ_A = max_i |m/n|_i and the minimal ℓ with λ_A^{-ℓ} < μ.
pub fn spectral_data(a: &AffineEndo, mu: &Rational) -> Result<SpectralData> {
    if a.is_degenerate() {
        return Err(Error::DegenerateLinear(fmt_rational(&a.linear)));
    }
    if !mu.is_positive() || mu >= &Rational::one() {
        return Err(Error::Parameter(format!("mu must lie in (0,1), got {mu}")));
    }
    let lambdas = a.lambdas();
    let (i0, lambda_a) = lambdas
        .iter()
        .enumerate()
        .fold((0, lambdas[0].clone()), |(bi, bv), (i, v)| {
            if v > &bv {
                (i, v.clone())
            } else {
                (bi, bv)
            }
        });
    debug_assert!(lambda_a > Rational::one());
    let inv = lambda_a.recip();
    let mut ell = 1u32;
    let mut power = inv.clone();
    while &power >= mu {
        power *= &inv;
        ell += 1;
    }
    Ok(SpectralData {
        lambdas,
        lambda_a,
        i0,
        ell,
    })
}

/// The image A^{-j}B(w, t) and its enclosing cylinder C(A^{-j}w, λ_A^{-j}t, i0).
pub fn resonant_enclosure(a: &AffineEndo, w: &Point, j: u32, t: &Rational) -> Result<Enclosure> {
    if !t.is_positive() {
        return Err(Error::Domain("enclosure radius must be positive".into()));
    }
    let spec = spectral_data(a, &Rational::new(1.into(), 2.into()))?;
    let center = a.apply_inv_iter(j, w)?;
    let place_radii = spec
        .lambdas
        .iter()
        .map(|l| t * pow(&l.recip(), j as i64))
        .collect();
    let eps = t * pow(&spec.lambda_a.recip(), j as i64);
    let cylinder = Cylinder::new(center.clone(), eps, spec.i0)?;
    Ok(Enclosure {
        center,
        place_radii,
        cylinder,
    })
}

/// Upper bound on β at the place where λ_A is attained.
pub fn beta_ceiling(a: &AffineEndo) -> Result<Rational> {
    let spec = spectral_data(a, &Rational::new(1.into(), 2.into()))?;
    a.primes().beta_ceiling(spec.i0)
}

/// `sup_{x in closed unit ball} d(A^{-j}x, 0)`, evaluated place by place.
///
/// A^{-j}x = q^j x + c_j with q = n/m, c_j = A^{-j}(0). At the real place the
/// sup is |q|^j + |c_j|; at p it is max(|q|_p^j, |c_j|_p / p) because the
/// image of the unit projection is the p-adic ball of radius p|q|_p^j.
pub fn unit_ball_sup(a: &AffineEndo, j: u32) -> Result<Rational> {
    let q = a.linear.recip();
    let c = a.apply_inv_iter(j, &Point::zero(a.primes()))?;
    let qj = pow(&q, j as i64);
    let mut best = qj.abs() + c.real().abs();
    for (k, p) in a.primes().primes().iter().enumerate() {
        let scale = padic_abs(&qj, *p);
        let off = padic_abs(c.coord(k + 1), *p) / p.as_rational();
        let v = scale.max(off);
        if v > best {
            best = v;
        }
    }
    Ok(best)
}

pub fn avoidance_params(
    a: &AffineEndo,
    y: &Point,
    r0: &Rational,
    beta: &Rational,
) -> Result<AvoidanceParams> {
    if a.is_degenerate() {
        return Err(Error::DegenerateLinear(fmt_rational(&a.linear)));
    }
    let ceiling = beta_ceiling(a)?;
    if !beta.is_positive() || beta >= &ceiling {
        return Err(Error::Parameter(format!(
            "beta {} must lie in (0, {})",
            fmt_rational(beta),
            fmt_rational(&ceiling)
        )));
    }
    if !r0.is_positive() || r0 >= &Rational::new(1.into(), 2.into()) {
        return Err(Error::Parameter(format!(
            "initial radius {} must lie in (0, 1/2)",
            fmt_rational(r0)
        )));
    }
    let two = Rational::from_integer(BigInt::from(2));
    let mu = beta * beta / &two;
    let spectral = spectral_data(a, &mu)?;
    let ell = spectral.ell;
    let m = Rational::from_integer(a.linear.numer().clone());
    let a_scale = pow(&m, -(ell as i64));
    let origin = Point::zero(a.primes());
    let half = Rational::new(1.into(), 2.into());
    let (delta_unif, _) = min_positive_lattice_distance(&origin, &a_scale, &half)?;

    let mut b = Rational::one();
    for j in 0..=ell {
        let s = unit_ball_sup(a, j)?;
        if s > b {
            b = s;
        }
    }

    let three_b = Rational::from_integer(BigInt::from(3)) * &b;
    let mut min_gap: Option<Rational> = None;
    for j in 0..=ell {
        let w = y.sub(&a.apply_inv_iter(j, y)?)?;
        let (d, _) = min_positive_lattice_distance(&w, &a_scale, &half)?;
        if min_gap.as_ref().map_or(true, |g| &d < g) {
            min_gap = Some(d);
        }
    }
    let t0 = min_gap.expect("ell >= 1") / &three_b;
    let epsilon = &mu * &t0 / &two;
    let r_cap = Rational::one();
    // smallest k0 with μ^{k0} < min(εμ/r0, 1/R)
    let target = (&epsilon * &mu / r0).min(r_cap.recip());
    let mut k0 = 0u32;
    let mut power = Rational::one();
    while power >= target {
        power *= &mu;
        k0 += 1;
    }
    let delta = pow(&mu, k0 as i64 + 1) * r0;
    Ok(AvoidanceParams {
        beta: beta.clone(),
        r0: r0.clone(),
        mu,
        ell,
        a_scale,
        delta_unif,
        b,
        t0,
        epsilon,
        k0,
        delta,
        r_cap,
        spectral,
    })
}

impl AvoidanceParams {
    /// R_n = λ_A^{-j}.
    pub fn r_n(&self, j: u32) -> Rational {
        pow(&self.spectral.lambda_a.recip(), j as i64)
    }

    /// Exponents j with λ_A^{-j} in [μ^{k+1-k0}, μ^{k-k0}).
    pub fn window_exponents(&self, k: u32) -> Vec<u32> {
        let lo = pow(&self.mu, k as i64 + 1 - self.k0 as i64);
        let hi = pow(&self.mu, k as i64 - self.k0 as i64);
        let mut out = Vec::new();
        let mut j = 0u32;
        loop {
            let r = self.r_n(j);
            if r < lo {
                break;
            }
            if r < hi {
                out.push(j);
            }
            j += 1;
        }
        out
    }

    /// Every j with λ_A^{-j} >= μ^{k+1-k0}: the sets handled by windows <= k.
    pub fn exponents_through(&self, k: u32) -> Vec<u32> {
        let lo = pow(&self.mu, k as i64 + 1 - self.k0 as i64);
        (0..).take_while(|&j| self.r_n(j) >= lo).collect()
    }

    /// Window index of a radius: the k with βμ^k r0 < r <= μ^k r0, if any.
    pub fn window_of(&self, r: &Rational) -> Option<u32> {
        if r > &self.r0 || !r.is_positive() {
            return None;
        }
        let mut k = 0u32;
        let mut top = self.r0.clone();
        loop {
            let next = &top * &self.mu;
            if r > &next {
                return (r > &(&self.beta * &top)).then_some(k);
            }
            top = next;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{int, rat};
    use crate::solenoid::{sample_in_ball, Ball};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p23() -> PrimeSet {
        PrimeSet::from_u64(&[2, 3]).unwrap()
    }

    #[test]
    fn spectral_examples() {
        let ps = p23();
        let a = AffineEndo::linear_map(&ps, rat(3, 2)).unwrap();
        let s = spectral_data(&a, &rat(9, 200)).unwrap();
        assert_eq!(s.lambdas, vec![rat(3, 2), int(2), rat(1, 3)]);
        assert_eq!((s.lambda_a, s.i0, s.ell), (int(2), 1, 5));
        let a = AffineEndo::linear_map(&ps, int(6)).unwrap();
        let s = spectral_data(&a, &rat(1, 10)).unwrap();
        assert_eq!((s.lambda_a, s.i0, s.ell), (int(6), 0, 2));
        let a = AffineEndo::linear_map(&ps, int(-1)).unwrap();
        assert!(matches!(
            spectral_data(&a, &rat(1, 10)),
            Err(Error::DegenerateLinear(_))
        ));
    }

    #[test]
    fn rejects_linear_outside_ring() {
        assert!(AffineEndo::linear_map(&p23(), rat(1, 5)).is_err());
        assert!(AffineEndo::linear_map(&p23(), int(0)).is_err());
    }

    #[test]
    fn apply_examples() {
        let ps = p23();
        let x = Point::real_only(&ps, int(1));
        let id = AffineEndo::linear_map(&ps, int(1)).unwrap();
        assert_eq!(id.apply(&x).unwrap(), x);
        let a = AffineEndo::new(rat(3, 2), Point::real_only(&ps, int(1))).unwrap();
        assert_eq!(a.apply_inv_iter(0, &x).unwrap(), x);
        assert_eq!(a.apply(&x).unwrap(), Point::real_only(&ps, rat(5, 2)));
        let back = a.apply(&a.apply_inv_iter(1, &x).unwrap()).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn enclosure_examples() {
        let ps = p23();
        let a = AffineEndo::linear_map(&ps, rat(3, 2)).unwrap();
        let w = Point::zero(&ps);
        let e = resonant_enclosure(&a, &w, 1, &rat(1, 10)).unwrap();
        assert_eq!(e.cylinder.epsilon, rat(1, 20));
        assert_eq!(e.cylinder.constraining_index, 1);
        let e0 = resonant_enclosure(&a, &w, 0, &rat(1, 10)).unwrap();
        assert_eq!(e0.cylinder.epsilon, rat(1, 10));
    }

    #[test]
    fn enclosure_contains_sampled_images() {
        let ps = p23();
        let a = AffineEndo::new(rat(3, 2), Point::new(&ps, rat(1, 3), vec![int(1), rat(1, 2)]).unwrap()).unwrap();
        let w = Point::new(&ps, rat(2, 7), vec![rat(1, 4), int(5)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for j in 0..5 {
            let t = rat(1, 10);
            let e = resonant_enclosure(&a, &w, j, &t).unwrap();
            let ball = Ball::new(w.clone(), t.clone(), false).unwrap();
            for _ in 0..100 {
                let x = sample_in_ball(&ball, &mut rng);
                let img = a.apply_inv_iter(j, &x).unwrap();
                assert!(e.cylinder.contains_point(&img).unwrap());
            }
        }
    }

    #[test]
    fn params_reference_instance() {
        let ps = p23();
        let a = AffineEndo::linear_map(&ps, rat(3, 2)).unwrap();
        let y = Point::zero(&ps);
        let p = avoidance_params(&a, &y, &rat(1, 4), &rat(3, 10)).unwrap();
        assert_eq!(p.mu, rat(9, 200));
        assert_eq!(p.ell, 5);
        assert_eq!(p.a_scale, rat(1, 243));
        assert_eq!(p.delta_unif, int(1));
        assert_eq!(p.b, int(243));
        assert_eq!(p.t0, rat(1, 729));
        assert_eq!(p.epsilon, rat(1, 32400));
        assert_eq!(p.k0, 4);
        assert_eq!(p.delta, pow(&rat(9, 200), 5) * rat(1, 4));
        assert!(p.delta < p.epsilon);
    }

    #[test]
    fn params_translation_free_collapse() {
        let ps = p23();
        let a = AffineEndo::linear_map(&ps, int(6)).unwrap();
        let p = avoidance_params(&a, &Point::zero(&ps), &rat(1, 4), &rat(1, 4)).unwrap();
        assert_eq!(p.t0, &p.delta_unif / (int(3) * &p.b));
    }

    #[test]
    fn params_reject_bad_beta() {
        let ps = p23();
        let a = AffineEndo::linear_map(&ps, rat(3, 2)).unwrap();
        let y = Point::zero(&ps);
        assert!(matches!(
            avoidance_params(&a, &y, &rat(1, 4), &rat(1, 2)),
            Err(Error::Parameter(_))
        ));
        assert!(avoidance_params(&a, &y, &rat(1, 2), &rat(1, 4)).is_err());
    }

    #[test]
    fn unit_ball_sup_matches_sampling() {
        let ps = p23();
        let a = AffineEndo::new(rat(3, 2), Point::new(&ps, rat(1, 5), vec![rat(1, 2), int(3)]).unwrap()).unwrap();
        let ball = Ball::closed(Point::zero(&ps), int(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let o = Point::zero(&ps);
        for j in 0..4 {
            let sup = unit_ball_sup(&a, j).unwrap();
            for _ in 0..300 {
                let x = sample_in_ball(&ball, &mut rng);
                let d = crate::solenoid::distance(&a.apply_inv_iter(j, &x).unwrap(), &o).unwrap();
                assert!(d <= sup);
            }
        }
    }

    #[test]
    fn windows_partition_exponents() {
        let ps = p23();
        let a = AffineEndo::linear_map(&ps, rat(3, 2)).unwrap();
        let p = avoidance_params(&a, &Point::zero(&ps), &rat(1, 4), &rat(3, 10)).unwrap();
        assert!(p.window_exponents(p.k0 - 2).is_empty());
        assert_eq!(p.window_exponents(p.k0 - 1), vec![0]);
        assert_eq!(p.window_exponents(p.k0), vec![1, 2, 3, 4]);
        assert_eq!(p.window_of(&rat(1, 4)), Some(0));
        assert_eq!(p.window_of(&rat(3, 40)), None);
        assert_eq!(p.window_of(&(rat(1, 4) * rat(9, 200))), Some(1));
    }
}
