use caw_core::affine::AffineEndo;
use caw_core::arith::{floor_i, padic_abs, prime_factors, prime_power, rat, Prime, Rational};
use caw_core::solenoid::{
    ball_cylinder_disjoint, cylinder_normalize, distance, sample_in_ball, Ball, Point, PrimeSet,
};
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn p23() -> PrimeSet {
    PrimeSet::from_u64(&[2, 3]).unwrap()
}

fn small_prime() -> impl Strategy<Value = Prime> {
    prop::sample::select(vec![2u64, 3, 5, 7, 11, 13, 97]).prop_map(|p| Prime::new(p).unwrap())
}

fn rational() -> impl Strategy<Value = Rational> {
    (-2000i64..2000, 1i64..2000).prop_map(|(n, d)| rat(n, d))
}

fn nonzero() -> impl Strategy<Value = Rational> {
    rational().prop_filter("nonzero", |q| !q.is_zero())
}

fn positive() -> impl Strategy<Value = Rational> {
    (1i64..2000, 1i64..2000).prop_map(|(n, d)| rat(n, d))
}

fn point() -> impl Strategy<Value = Point> {
    (rational(), rational(), rational())
        .prop_map(|(a, b, c)| Point::new(&p23(), a, vec![b, c]).unwrap())
}

fn radius() -> impl Strategy<Value = Rational> {
    (1i64..100, 1i64..400).prop_map(|(n, d)| rat(n, d))
}

proptest! {
    #[test]
    fn floor_scales_with_powers(r in positive(), p in small_prime(), m in -20i64..=20) {
        let pm = prime_power(p, m);
        let lhs = floor_i(&(&pm * &r), p).unwrap().value;
        let rhs = pm * floor_i(&r, p).unwrap().value;
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn floor_is_the_largest_power_below(r in positive(), p in small_prime()) {
        let f = floor_i(&r, p).unwrap();
        prop_assert!(f.value <= r);
        prop_assert!(&f.value * p.as_rational() > r);
    }

    #[test]
    fn ultrametric(x in rational(), y in rational(), p in small_prime()) {
        let (ax, ay) = (padic_abs(&x, p), padic_abs(&y, p));
        let s = padic_abs(&(&x + &y), p);
        prop_assert!(s <= ax.clone().max(ay.clone()));
        if ax != ay {
            prop_assert_eq!(s, ax.max(ay));
        }
    }

    #[test]
    fn product_formula(q in nonzero()) {
        let mut prod = q.abs();
        let mut support: Vec<_> = prime_factors(q.numer());
        support.extend(prime_factors(q.denom()));
        support.sort();
        support.dedup();
        for p in support {
            let p: u64 = p.try_into().unwrap();
            prod *= padic_abs(&q, Prime::new(p).unwrap());
        }
        prop_assert!(prod.is_one());
    }

    #[test]
    fn translation_invariance(x in point(), z in point(), t in point()) {
        let d = distance(&x, &z).unwrap();
        let moved = distance(&x.add(&t).unwrap(), &z.add(&t).unwrap()).unwrap();
        prop_assert_eq!(d, moved);
    }

    #[test]
    fn membership_is_per_place(c in point(), r in radius(), x in point()) {
        let b = Ball::closed(c, r).unwrap();
        let every = b
            .projections()
            .iter()
            .enumerate()
            .all(|(i, proj)| proj.contains(x.coord(i)));
        prop_assert_eq!(b.contains_point(&x).unwrap(), every);
        prop_assert_eq!(b.contains_point(&x).unwrap(), distance(&x, &b.center).unwrap() <= b.radius);
    }

    #[test]
    fn normalize_is_stable(a in point(), eps in radius(), i in 0usize..3, seed in any::<u64>()) {
        let c = cylinder_normalize(a.clone(), eps.clone(), i).unwrap();
        let again = cylinder_normalize(a.clone(), eps, i).unwrap();
        prop_assert_eq!(&c, &again);
        // the largest epsilon describing the same set normalizes to the same radius
        let top = match p23().prime_at(i).unwrap() {
            None => c.normalized_radius.clone(),
            Some(p) => &c.normalized_radius * p.as_rational(),
        };
        let canon = cylinder_normalize(a.clone(), top, i).unwrap();
        prop_assert_eq!(&canon.normalized_radius, &c.normalized_radius);
        let probe = Ball::closed(a, rat(1, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let x = sample_in_ball(&probe, &mut rng);
            prop_assert_eq!(c.contains_point(&x).unwrap(), canon.contains_point(&x).unwrap());
        }
    }

    #[test]
    fn disjointness_agrees_with_sampling(
        bc in point(), r in radius(), a in point(), eps in radius(), i in 0usize..3, seed in any::<u64>()
    ) {
        let b = Ball::closed(bc, r).unwrap();
        let c = cylinder_normalize(a, eps, i).unwrap();
        if ball_cylinder_disjoint(&b, &c).unwrap() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..50 {
                let x = sample_in_ball(&b, &mut rng);
                prop_assert!(!c.contains_point(&x).unwrap());
            }
        } else {
            // a cylinder constrains one place, so overlap is decided there
            let proj = c.projection().unwrap();
            let bp = b.projection(i).unwrap();
            prop_assert!(!proj.disjoint(&bp));
        }
    }

    #[test]
    fn inverse_iterates_undo(x in point(), j in 0u32..=12, pick in 0usize..4) {
        let lin = [rat(3, 2), rat(6, 1), rat(-2, 3), rat(4, 9)][pick].clone();
        let a = AffineEndo::new(lin, Point::diagonal(&p23(), &rat(1, 5))).unwrap();
        let back = a.apply_iter(j, &a.apply_inv_iter(j, &x).unwrap()).unwrap();
        prop_assert_eq!(&back, &x);
        let fwd = a.apply_inv_iter(j, &a.apply_iter(j, &x).unwrap()).unwrap();
        prop_assert_eq!(fwd, x);
    }

    #[test]
    fn sampled_points_stay_inside(c in point(), r in radius(), seed in any::<u64>()) {
        let b = Ball::closed(c, r).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            prop_assert!(b.contains_point(&sample_in_ball(&b, &mut rng)).unwrap());
        }
    }
}

#[test]
fn metric_is_symmetric_with_zero_diagonal() {
    let x = Point::new(&p23(), rat(1, 3), vec![rat(5, 4), rat(2, 9)]).unwrap();
    let z = Point::zero(&p23());
    assert_eq!(distance(&x, &x).unwrap(), Rational::zero());
    assert_eq!(distance(&x, &z).unwrap(), distance(&z, &x).unwrap());
    assert!(distance(&x, &z).unwrap().is_positive());
}
