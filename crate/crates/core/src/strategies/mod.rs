//! Concrete strategies for both players and the combinators that build new
//! Alice strategies out of old ones.

mod avoidance;
mod bob;
mod combinators;
mod spec;

pub use avoidance::{
    audit_report, audit_windows, certify_orbit, find_resonant, AvoidanceAlice, AvoidanceAudit,
    AvoidanceState, OrbitCertificate, ResonantIndex, WindowAudit,
};
pub use bob::{ChaseBob, RandomBob, RandomStrongBob, ShrinkAlice, ShrinkBob, StayPutBob, EscapeBob};
pub use combinators::{
    caw_to_strong, intersect_strategies, transfer_exponent, AffineTransfer, CawToStrong,
    IdleAlice, Intersection, NeverBlock, TranslationTransfer, TransferConstants,
};
pub use spec::{AliceSpec, BobSpec, StrongAliceSpec, StrongBobSpec};

use num_traits::One;

use crate::arith::{power_exponent_below, prime_power, Rational};
use crate::error::{Error, Result};
use crate::solenoid::{Ball, Cylinder};

/// The archimedean cylinder `C(center(b), β·radius(b), 0)`.
///
/// Any legal reply avoids the middle of the real interval, so its radius is
/// at most `(1-β)·radius(b)/2`.
pub fn idle_block(b: &Ball, beta: &Rational) -> Cylinder {
    idle_block_at(b, beta, 0).expect("the real place always exists")
}

/// Center block at an arbitrary place. At a p-adic place Bob is forced to
/// drop the p-adic level of his ball, which shrinks radii by at least 1/p.
pub fn idle_block_at(b: &Ball, beta: &Rational, index: usize) -> Result<Cylinder> {
    Cylinder::new(b.center.clone(), beta * &b.radius, index)
}

/// A closed ball inside `prev`, outside `blocked`, of radius `factor·radius(prev)`.
///
/// Real place: push the center `(1-factor)·r` away from the anchor.
/// p-adic place: move coordinate i to `anchor_i + p^{-e}` where `p^e = ⌊p r⌋`,
/// which sits at p-adic distance exactly `p^e` from the anchor.
pub(crate) fn escape_ball(prev: &Ball, blocked: &Cylinder, factor: &Rational) -> Result<Ball> {
    let i = blocked.constraining_index;
    let r = &prev.radius;
    let center = match prev.primes().prime_at(i)? {
        None => {
            let x0 = prev.center.real();
            let shift = (Rational::one() - factor) * r;
            let c = if blocked.anchor.real() >= x0 {
                x0 - shift
            } else {
                x0 + shift
            };
            prev.center.with_coord(0, c)?
        }
        Some(p) => {
            let e = power_exponent_below(&(r * p.as_rational()), p, false);
            let c = blocked.anchor.coord(i) + prime_power(p, -e);
            prev.center.with_coord(i, c)?
        }
    };
    let ball = Ball::closed(center, factor * r)?;
    if !prev.contains_ball(&ball)? || !ball.disjoint_from_cylinder(blocked)? {
        return Err(Error::NoEscape(format!("no escape from {blocked} inside {prev}")));
    }
    Ok(ball)
}

/// Bob's explicit legal reply to a legal block.
pub fn bob_escape(prev: &Ball, blocked: &Cylinder, beta: &Rational) -> Result<Ball> {
    if prev.disjoint_from_cylinder(blocked)? {
        return Ball::closed(prev.center.clone(), beta * &prev.radius);
    }
    let ceiling = prev.primes().beta_ceiling(blocked.constraining_index)?;
    if beta >= &ceiling {
        return Err(Error::NoEscape(format!(
            "beta {beta} is not below {ceiling} at place {}",
            blocked.constraining_index
        )));
    }
    escape_ball(prev, blocked, beta)
}

/// Play parameter for a strategy that acts once every `turns` rounds.
pub(crate) fn beta_power(beta: &Rational, turns: usize) -> Rational {
    crate::arith::pow(beta, turns as i64)
}
