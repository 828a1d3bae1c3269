//! Independent re-verification of a transcript.
//!
//! Everything here is recomputed from the raw rationals in the JSON with
//! local helpers, so a bug in the engine's projection code cannot hide
//! itself. Recorded evidence strings are also regenerated and compared.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{fmt_rational, Rational};
use crate::game::{
    legal_alice_with_slack, legal_bob, legal_strong_alice, legal_strong_bob, AliceMove,
    GameTranscript, Outcome, Variant,
};
use crate::solenoid::{Ball, Cylinder, Point};
use crate::strategies::{audit_report, AvoidanceAudit};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub rounds_checked: usize,
    pub discrepancies: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.discrepancies.is_empty()
    }

    fn fail(&mut self, msg: String) {
        self.discrepancies.push(msg);
    }
}

fn padic_abs(q: &Rational, p: u64) -> Rational {
    if q.is_zero() {
        return Rational::zero();
    }
    let p = BigInt::from(p);
    let mut v = 0i64;
    let mut n = q.numer().clone();
    while n.is_multiple_of(&p) {
        n /= &p;
        v += 1;
    }
    let mut d = q.denom().clone();
    while d.is_multiple_of(&p) {
        d /= &p;
        v -= 1;
    }
    power(&p, -v)
}

fn power(p: &BigInt, e: i64) -> Rational {
    let m = Rational::from_integer(num_traits::pow(p.clone(), e.unsigned_abs() as usize));
    if e >= 0 {
        m
    } else {
        m.recip()
    }
}

/// Largest power of p that is `<= x` (or `< x` when `strict`).
fn power_below(x: &Rational, p: u64, strict: bool) -> Rational {
    let pb = BigInt::from(p);
    let pr = Rational::from_integer(pb.clone());
    let mut v = Rational::one();
    let fits = |v: &Rational| if strict { v < x } else { v <= x };
    if fits(&v) {
        while fits(&(&v * &pr)) {
            v *= &pr;
        }
    } else {
        while !fits(&v) {
            v /= &pr;
        }
    }
    v
}

fn primes(x: &Point) -> Vec<u64> {
    x.primes().to_u64()
}

fn raw_distance(x: &Point, y: &Point) -> Rational {
    let mut d = (x.real() - y.real()).abs();
    for (k, p) in primes(x).into_iter().enumerate() {
        let v = padic_abs(&(x.coord(k + 1) - y.coord(k + 1)), p) / Rational::from_integer(p.into());
        if v > d {
            d = v;
        }
    }
    d
}

/// p-adic radius of the closed ball's projection: the largest power <= p r.
fn closed_level(r: &Rational, p: u64) -> Rational {
    power_below(&(r * Rational::from_integer(p.into())), p, false)
}

fn contained(outer: &Ball, inner: &Ball) -> Result<(), String> {
    if outer.primes() != inner.primes() {
        return Err("prime sets differ".into());
    }
    if !outer.closed || !inner.closed {
        return Err("balls must be closed".into());
    }
    if (inner.center.real() - outer.center.real()).abs() + &inner.radius > outer.radius {
        return Err("real projection not contained".into());
    }
    for (k, p) in primes(&outer.center).into_iter().enumerate() {
        let ro = closed_level(&outer.radius, p);
        let ri = closed_level(&inner.radius, p);
        let d = padic_abs(&(inner.center.coord(k + 1) - outer.center.coord(k + 1)), p);
        if ri > ro || d > ro {
            return Err(format!("{p}-adic projection not contained"));
        }
    }
    Ok(())
}

fn cylinder_normalized(c: &Cylinder) -> Rational {
    match c.constraining_index {
        0 => c.epsilon.clone(),
        i => {
            let p = primes(&c.anchor)[i - 1];
            let pr = Rational::from_integer(p.into());
            power_below(&(&c.epsilon * &pr), p, true) / pr
        }
    }
}

fn disjoint(b: &Ball, c: &Cylinder) -> Result<(), String> {
    let i = c.constraining_index;
    if i == 0 {
        if (b.center.real() - c.anchor.real()).abs() < &b.radius + &c.epsilon {
            return Err("real projections overlap".into());
        }
        return Ok(());
    }
    let p = primes(&b.center)[i - 1];
    let pr = Rational::from_integer(p.into());
    let cyl = power_below(&(&c.epsilon * &pr), p, true);
    let ball = closed_level(&b.radius, p);
    let d = padic_abs(&(b.center.coord(i) - c.anchor.coord(i)), p);
    if d <= ball.max(cyl) {
        return Err(format!("{p}-adic projections overlap"));
    }
    Ok(())
}

fn ceiling(c: &Cylinder) -> Rational {
    match c.constraining_index {
        0 => Rational::new(1.into(), 3.into()),
        i => Rational::new(1.into(), primes(&c.anchor)[i - 1].into()),
    }
}

pub fn audit_transcript(t: &GameTranscript) -> AuditReport {
    let mut rep = AuditReport::default();
    let beta = &t.config.beta;
    let half = Rational::new(1.into(), 2.into());
    if !t.initial_ball.closed || t.initial_ball.radius >= half {
        rep.fail("initial ball must be closed with radius < 1/2".into());
    }
    let mut prev = t.initial_ball.clone();
    let n = t.rounds.len();
    for (pos, round) in t.rounds.iter().enumerate() {
        let tag = format!("round {}", round.index);
        if round.index != pos + 1 {
            rep.fail(format!("{tag}: out of order"));
        }
        let next = match (&t.config.variant, &round.alice) {
            (Variant::CylinderAbsolute, AliceMove::Cylinder(c)) => {
                let norm = cylinder_normalized(c);
                if norm != c.normalized_radius {
                    rep.fail(format!("{tag}: stored normalized radius is wrong"));
                }
                if norm > beta * &prev.radius {
                    rep.fail(format!(
                        "{tag}: cylinder radius {} exceeds beta*r = {}",
                        fmt_rational(&norm),
                        fmt_rational(&(beta * &prev.radius))
                    ));
                }
                if beta >= &ceiling(c) {
                    rep.fail(format!("{tag}: beta not below the ceiling of place {}", c.constraining_index));
                }
                let va = legal_alice_with_slack(&prev, c, beta, t.config.fault_slack.as_ref());
                if va.evidence != round.alice_evidence {
                    rep.fail(format!("{tag}: alice evidence does not replay"));
                }
                if let Some(b) = &round.bob {
                    if let Err(e) = contained(&prev, b) {
                        rep.fail(format!("{tag}: bob {e}"));
                    }
                    if let Err(e) = disjoint(b, c) {
                        rep.fail(format!("{tag}: bob ball meets the cylinder: {e}"));
                    }
                    if b.radius < beta * &prev.radius {
                        rep.fail(format!("{tag}: bob radius below beta*r"));
                    }
                    if legal_bob(&prev, c, b, beta).evidence != round.bob_evidence {
                        rep.fail(format!("{tag}: bob evidence does not replay"));
                    }
                }
                round.bob.clone()
            }
            (Variant::Strong, AliceMove::Ball(a)) => {
                let alpha = t.config.alpha.clone().unwrap_or_default();
                if let Err(e) = contained(&prev, a) {
                    rep.fail(format!("{tag}: alice {e}"));
                }
                if a.radius < &alpha * &prev.radius {
                    rep.fail(format!("{tag}: alice radius below alpha*r"));
                }
                if legal_strong_alice(&prev, a, &alpha).evidence != round.alice_evidence {
                    rep.fail(format!("{tag}: alice evidence does not replay"));
                }
                if let Some(b) = &round.bob {
                    if let Err(e) = contained(a, b) {
                        rep.fail(format!("{tag}: bob {e}"));
                    }
                    if b.radius < beta * &a.radius {
                        rep.fail(format!("{tag}: bob radius below beta*r"));
                    }
                    if legal_strong_bob(a, b, beta).evidence != round.bob_evidence {
                        rep.fail(format!("{tag}: bob evidence does not replay"));
                    }
                }
                round.bob.clone()
            }
            _ => {
                rep.fail(format!("{tag}: move kind does not match the variant"));
                None
            }
        };
        rep.rounds_checked += 1;
        match next {
            Some(b) => prev = b,
            None => {
                if pos + 1 != n || t.outcome != Outcome::BobDefaultWin {
                    rep.fail(format!("{tag}: missing bob move"));
                }
            }
        }
    }
    match t.outcome {
        Outcome::Completed => {
            if n != t.config.max_rounds || !t.faults.is_empty() {
                rep.fail("completed outcome with missing rounds or faults".into());
            }
        }
        Outcome::StrategyFault => {
            if t.faults.is_empty() {
                rep.fail("strategy fault outcome without a fault".into());
            }
        }
        Outcome::BobDefaultWin => {}
        Outcome::Running => rep.fail("transcript is unfinished".into()),
    }
    if t.limit_approx != prev.center {
        rep.fail("limit point is not the last center".into());
    }
    let balls = t.balls();
    let two = Rational::from_integer(2.into());
    for (j, bj) in balls.iter().enumerate() {
        if raw_distance(&bj.center, &t.limit_approx) > bj.radius {
            rep.fail(format!("limit point outside ball {j}"));
        }
        if let Some(bk) = balls.get(j + 1) {
            if raw_distance(&bj.center, &bk.center) > &two * &bj.radius {
                rep.fail(format!("centers {j} and {} too far apart", j + 1));
            }
        }
    }
    for issue in t.alice_report.all_issues() {
        rep.fail(format!("strategy issue: {issue}"));
    }
    rep
}

/// Transcript audit together with the window audits of every avoidance
/// strategy in the report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullAudit {
    pub transcript: AuditReport,
    pub avoidance: Vec<AvoidanceAudit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avoidance_error: Option<String>,
}

impl FullAudit {
    pub fn passed(&self) -> bool {
        self.transcript.passed()
            && self.avoidance_error.is_none()
            && self.avoidance.iter().all(AvoidanceAudit::passed)
    }
}

pub fn full_audit(t: &GameTranscript) -> FullAudit {
    let balls: Vec<Ball> = t.balls().into_iter().cloned().collect();
    let (avoidance, avoidance_error) = match audit_report(&t.alice_report, &balls, &t.limit_approx) {
        Ok(v) => (v, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    FullAudit {
        transcript: audit_transcript(t),
        avoidance,
        avoidance_error,
    }
}
