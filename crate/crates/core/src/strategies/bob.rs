use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{bob_escape, spec::BobSpec, spec::StrongAliceSpec, spec::StrongBobSpec};
use crate::arith::{power_exponent_below, prime_power, Rational};
use crate::error::Result;
use crate::game::{
    legal_bob, legal_strong_bob, BobStrategy, Descriptor, StrongAlice, StrongBob,
};
use crate::solenoid::{Ball, Cylinder, Point};

fn descriptor<T: serde::Serialize>(name: &str, spec: &T) -> Descriptor {
    Descriptor::new(name, serde_json::to_value(spec).unwrap_or(json!(null)))
}

/// Keeps the current ball whenever that is legal.
#[derive(Clone, Debug, Default)]
pub struct StayPutBob;

impl BobStrategy for StayPutBob {
    fn descriptor(&self) -> Descriptor {
        descriptor("stay_put", &BobSpec::StayPut)
    }

    fn respond(
        &mut self,
        prev: &Ball,
        blocked: &Cylinder,
        _beta: &Rational,
        _rng: &mut ChaCha8Rng,
    ) -> Option<Ball> {
        prev.disjoint_from_cylinder(blocked)
            .ok()
            .filter(|&d| d)
            .map(|_| prev.clone())
    }
}

/// Always answers with the explicit escape ball.
#[derive(Clone, Debug, Default)]
pub struct EscapeBob;

impl BobStrategy for EscapeBob {
    fn descriptor(&self) -> Descriptor {
        descriptor("escape", &BobSpec::Escape)
    }

    fn respond(
        &mut self,
        prev: &Ball,
        blocked: &Cylinder,
        beta: &Rational,
        _rng: &mut ChaCha8Rng,
    ) -> Option<Ball> {
        bob_escape(prev, blocked, beta).ok()
    }
}

/// A random sub-ball: radius `f·r` and a center shifted at each place by a
/// random amount that keeps it inside `prev`.
fn random_subball(prev: &Ball, factor: &Rational, rng: &mut ChaCha8Rng) -> Result<Ball> {
    let r = &prev.radius;
    let inner = factor * r;
    let slack = r - &inner;
    let mut coords = Vec::with_capacity(prev.primes().places());
    coords.push(prev.center.real() + &slack * Rational::new(rng.gen_range(-64..=64).into(), 64.into()));
    for (k, p) in prev.primes().primes().iter().enumerate() {
        let e = power_exponent_below(&(r * p.as_rational()), *p, false);
        let step = prime_power(*p, -e);
        let shift = Rational::from_integer(rng.gen_range(-8i64..=8).into()) * step;
        coords.push(prev.center.coord(k + 1) + shift);
    }
    let center = Point::new(prev.primes(), coords[0].clone(), coords[1..].to_vec())?;
    Ball::closed(center, inner)
}

fn random_factor(beta: &Rational, rng: &mut ChaCha8Rng) -> Rational {
    let k: i64 = rng.gen_range(0..=16);
    beta + (Rational::from_integer(1.into()) - beta) * Rational::new(k.into(), 16.into())
}

/// Random legal replies; falls back to the escape ball after 64 misses.
#[derive(Clone, Debug, Default)]
pub struct RandomBob;

impl BobStrategy for RandomBob {
    fn descriptor(&self) -> Descriptor {
        descriptor("random", &BobSpec::Random)
    }

    fn respond(
        &mut self,
        prev: &Ball,
        blocked: &Cylinder,
        beta: &Rational,
        rng: &mut ChaCha8Rng,
    ) -> Option<Ball> {
        for _ in 0..64 {
            let f = random_factor(beta, rng);
            let Ok(b) = random_subball(prev, &f, rng) else {
                continue;
            };
            if legal_bob(prev, blocked, &b, beta).ok {
                return Some(b);
            }
        }
        bob_escape(prev, blocked, beta).ok()
    }
}

/// Strong game: concentric ball of radius exactly α·r.
#[derive(Clone, Debug)]
pub struct ShrinkAlice {
    pub alpha: Rational,
}

impl StrongAlice for ShrinkAlice {
    fn descriptor(&self) -> Descriptor {
        descriptor("shrink", &StrongAliceSpec::Shrink)
    }

    fn choose(&mut self, ball: &Ball) -> Result<Ball> {
        Ball::closed(ball.center.clone(), &self.alpha * &ball.radius)
    }
}

/// Strong game: concentric ball of radius exactly β·r.
#[derive(Clone, Debug, Default)]
pub struct ShrinkBob;

impl StrongBob for ShrinkBob {
    fn descriptor(&self) -> Descriptor {
        descriptor("shrink", &StrongBobSpec::Shrink)
    }

    fn respond(&mut self, alice: &Ball, beta: &Rational, _rng: &mut ChaCha8Rng) -> Option<Ball> {
        Ball::closed(alice.center.clone(), beta * &alice.radius).ok()
    }
}

/// Strong game: random sub-balls of Alice's ball.
#[derive(Clone, Debug, Default)]
pub struct RandomStrongBob;

impl StrongBob for RandomStrongBob {
    fn descriptor(&self) -> Descriptor {
        descriptor("random", &StrongBobSpec::Random)
    }

    fn respond(&mut self, alice: &Ball, beta: &Rational, rng: &mut ChaCha8Rng) -> Option<Ball> {
        for _ in 0..64 {
            let f = random_factor(beta, rng);
            let Ok(b) = random_subball(alice, &f, rng) else {
                continue;
            };
            if legal_strong_bob(alice, &b, beta).ok {
                return Some(b);
            }
        }
        Ball::closed(alice.center.clone(), beta * &alice.radius).ok()
    }
}

/// Adversarial Bob that keeps a chosen point inside his ball for as long as
/// he can.
#[derive(Clone, Debug)]
pub struct ChaseBob {
    pub point: Point,
}

impl BobStrategy for ChaseBob {
    fn descriptor(&self) -> Descriptor {
        descriptor(
            "chase",
            &BobSpec::Chase {
                point: self.point.clone(),
            },
        )
    }

    fn respond(
        &mut self,
        prev: &Ball,
        blocked: &Cylinder,
        beta: &Rational,
        rng: &mut ChaCha8Rng,
    ) -> Option<Ball> {
        let one = Rational::from_integer(1.into());
        let fractions = [
            one.clone(),
            Rational::new(3.into(), 4.into()),
            Rational::new(1.into(), 2.into()),
            beta.clone(),
        ];
        // Keep the point half a radius off-center: center blocks then miss it.
        let half = Rational::new(1.into(), 2.into());
        for f in fractions.iter().filter(|f| *f >= beta) {
            let rho = f * &prev.radius;
            for t in [half.clone(), -half.clone(), Rational::from_integer(0.into())] {
                let c = self.point.real() + &t * &rho;
                let Ok(center) = self.point.with_coord(0, c) else {
                    continue;
                };
                if let Ok(b) = Ball::closed(center, rho.clone()) {
                    if legal_bob(prev, blocked, &b, beta).ok {
                        return Some(b);
                    }
                }
            }
        }
        let mut best: Option<(Rational, Ball)> = None;
        for _ in 0..32 {
            let f = random_factor(beta, rng);
            let Ok(b) = random_subball(prev, &f, rng) else {
                continue;
            };
            if !legal_bob(prev, blocked, &b, beta).ok {
                continue;
            }
            let Ok(d) = crate::solenoid::distance(&b.center, &self.point) else {
                continue;
            };
            if best.as_ref().map_or(true, |(bd, _)| &d < bd) {
                best = Some((d, b));
            }
        }
        best.map(|(_, b)| b)
            .or_else(|| bob_escape(prev, blocked, beta).ok())
    }
}
