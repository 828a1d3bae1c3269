//! Engines for the cylinder absolute game and the strong game.
//!
//! Every proposed move is checked with exact comparisons before it is
//! accepted, and the comparisons themselves are stored as evidence strings
//! so a transcript can be re-audited from its JSON alone.

use num_traits::Signed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::affine::{AffineEndo, AvoidanceParams};

use crate::arith::{fmt_rational, qser, Rational};
use crate::error::{Error, Result};
use crate::solenoid::{Ball, Cylinder, Point, Projection};
use crate::strategies::bob_escape;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    CylinderAbsolute,
    Strong,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub variant: Variant,
    /// β of the cylinder game, or Bob's parameter in the strong game.
    #[serde(with = "qser")]
    pub beta: Rational,
    /// Alice's parameter in the strong game.
    #[serde(default, with = "qser::opt", skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Rational>,
    pub max_rounds: usize,
    pub seed: u64,
    /// Test hook: loosens the engine's radius check by this amount.
    #[serde(default, with = "qser::opt", skip_serializing_if = "Option::is_none")]
    pub fault_slack: Option<Rational>,
}

impl GameConfig {
    pub fn cylinder(beta: Rational, max_rounds: usize, seed: u64) -> Self {
        GameConfig {
            variant: Variant::CylinderAbsolute,
            beta,
            alpha: None,
            max_rounds,
            seed,
            fault_slack: None,
        }
    }

    pub fn strong(alpha: Rational, beta: Rational, max_rounds: usize, seed: u64) -> Self {
        GameConfig {
            variant: Variant::Strong,
            beta,
            alpha: Some(alpha),
            max_rounds,
            seed,
            fault_slack: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub name: String,
    pub params: serde_json::Value,
}

impl Descriptor {
    pub fn new(name: &str, params: serde_json::Value) -> Self {
        Descriptor {
            name: name.to_string(),
            params,
        }
    }
}

/// One window of the avoidance strategy: the stage at which it was handled
/// and the resonant set it blocked, if any.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub k: u32,
    /// Index into the list of Bob balls (0 = initial ball).
    pub stage: usize,
    pub j: Option<u32>,
    #[serde(default, with = "qser::opt", skip_serializing_if = "Option::is_none")]
    pub z: Option<Rational>,
    /// Set when this window was handled late (radii crossed it in one move).
    pub late: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvoidanceRecord {
    pub map: AffineEndo,
    pub target: Point,
    /// Absent for |m/n| = 1 maps and for strategies that never moved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<AvoidanceParams>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub windows: Vec<WindowRecord>,
    /// Lattice points blocked one at a time (|m/n| = 1 maps).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocked_points: Vec<Point>,
}

/// The coordinates a transfer strategy's children play in: their balls and
/// the map taking outer points to inner ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub map: AffineEndo,
    pub balls: Vec<Ball>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avoidance: Option<AvoidanceRecord>,
    /// Self-detected problems, e.g. an inner game rule broken by a transfer.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub issues: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Frame>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<StrategyReport>,
}

impl StrategyReport {
    pub fn named(name: &str) -> Self {
        StrategyReport {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn all_issues(&self) -> Vec<String> {
        let mut out = self.issues.clone();
        for c in &self.children {
            out.extend(c.all_issues());
        }
        out
    }
}

pub trait AliceStrategy: Send {
    fn descriptor(&self) -> Descriptor;
    /// The cylinder to block against Bob's current ball.
    fn block(&mut self, ball: &Ball) -> Result<Cylinder>;
    /// A Bob ball this strategy saw but did not answer.
    fn observe(&mut self, _ball: &Ball) {}
    fn report(&self) -> StrategyReport {
        StrategyReport::named(&self.descriptor().name)
    }
}

pub trait BobStrategy: Send {
    fn descriptor(&self) -> Descriptor;
    /// A legal reply, or `None` to give up.
    fn respond(
        &mut self,
        prev: &Ball,
        blocked: &Cylinder,
        beta: &Rational,
        rng: &mut ChaCha8Rng,
    ) -> Option<Ball>;
}

pub trait StrongAlice: Send {
    fn descriptor(&self) -> Descriptor;
    fn choose(&mut self, ball: &Ball) -> Result<Ball>;
    fn report(&self) -> StrategyReport {
        StrategyReport::named(&self.descriptor().name)
    }
}

pub trait StrongBob: Send {
    fn descriptor(&self) -> Descriptor;
    fn respond(&mut self, alice: &Ball, beta: &Rational, rng: &mut ChaCha8Rng) -> Option<Ball>;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub ok: bool,
    pub evidence: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Verdict {
            ok: true,
            evidence: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.ok &= ok;
        let mark = if ok { "ok" } else { "FAIL" };
        self.evidence.push(format!("{mark} {line}"));
    }
}

fn q(r: &Rational) -> String {
    fmt_rational(r)
}

/// Containment of projections with a line of evidence.
fn containment_line(i: usize, outer: &Projection, inner: &Projection) -> (bool, String) {
    let ok = outer.contains_projection(inner);
    let line = match (outer, inner) {
        (
            Projection::Interval {
                center: c2,
                radius: r2,
                closed: k2,
            },
            Projection::Interval {
                center: c1,
                radius: r1,
                closed: k1,
            },
        ) => {
            let op = if !k2 && *k1 { "<" } else { "<=" };
            format!(
                "contain[{i}]: |dc| + r' = {} {op} {}",
                q(&((c1 - c2).abs() + r1)),
                q(r2)
            )
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
        ) => format!(
            "contain[{i}]: rho' = {} <= {}, |dc|_{prime} = {} <= {}",
            q(r1),
            q(r2),
            q(&crate::arith::padic_abs(&(c1 - c2), *prime)),
            q(r2)
        ),
        _ => format!("contain[{i}]: projection kinds differ"),
    };
    (ok, line)
}

fn containment(v: &mut Verdict, outer: &Ball, inner: &Ball) {
    if outer.primes() != inner.primes() {
        v.check(false, "prime sets differ".into());
        return;
    }
    for i in 0..outer.primes().places() {
        let (ok, line) = containment_line(
            i,
            &outer.projection(i).expect("in range"),
            &inner.projection(i).expect("in range"),
        );
        v.check(ok, line);
    }
}

/// `normalized_radius(c) <= β·radius(prev)` plus the per-move ceiling on β.
pub fn legal_alice(prev: &Ball, c: &Cylinder, beta: &Rational) -> Verdict {
    legal_alice_with_slack(prev, c, beta, None)
}

pub fn legal_alice_with_slack(
    prev: &Ball,
    c: &Cylinder,
    beta: &Rational,
    slack: Option<&Rational>,
) -> Verdict {
    let mut v = Verdict::new();
    if prev.primes() != c.primes() {
        v.check(false, "prime sets differ".into());
        return v;
    }
    let mut bound = beta * &prev.radius;
    if let Some(s) = slack {
        bound += s;
    }
    v.check(
        c.normalized_radius <= bound,
        format!(
            "alice radius: {} <= beta*r = {}",
            q(&c.normalized_radius),
            q(&bound)
        ),
    );
    match prev.primes().beta_ceiling(c.constraining_index) {
        Ok(ceiling) => v.check(
            beta < &ceiling,
            format!(
                "alice ceiling[{}]: beta = {} < {}",
                c.constraining_index,
                q(beta),
                q(&ceiling)
            ),
        ),
        Err(e) => v.check(false, format!("alice index: {e}")),
    }
    v
}

/// `next ⊆ prev`, `next ∩ blocked = ∅`, `radius(next) >= β·radius(prev)`.
pub fn legal_bob(prev: &Ball, blocked: &Cylinder, next: &Ball, beta: &Rational) -> Verdict {
    let mut v = Verdict::new();
    v.check(next.closed, format!("bob closed: {}", next.closed));
    containment(&mut v, prev, next);
    if v.ok || prev.primes() == next.primes() {
        match next.disjoint_from_cylinder(blocked) {
            Ok(ok) => {
                let i = blocked.constraining_index;
                let bp = next.projection(i).expect("in range");
                let cp = blocked.projection().expect("in range");
                v.check(ok, disjoint_line(i, &bp, &cp));
            }
            Err(e) => v.check(false, format!("disjoint: {e}")),
        }
    }
    let floor = beta * &prev.radius;
    v.check(
        next.radius >= floor,
        format!("bob radius: {} >= beta*r = {}", q(&next.radius), q(&floor)),
    );
    v
}

fn disjoint_line(i: usize, ball: &Projection, cyl: &Projection) -> String {
    match (ball, cyl) {
        (
            Projection::Interval {
                center: c,
                radius: r,
                ..
            },
            Projection::Interval {
                center: a,
                radius: e,
                ..
            },
        ) => format!(
            "disjoint[{i}]: |c - a| = {} >= r + eps = {}",
            q(&(c - a).abs()),
            q(&(r + e))
        ),
        (
            Projection::PAdic {
                prime,
                center: c,
                radius: r,
            },
            Projection::PAdic {
                center: a,
                radius: e,
                ..
            },
        ) => format!(
            "disjoint[{i}]: |c - a|_{prime} = {} > max({}, {})",
            q(&crate::arith::padic_abs(&(c - a), *prime)),
            q(r),
            q(e)
        ),
        _ => format!("disjoint[{i}]: projection kinds differ"),
    }
}

/// Strong game, Alice: `A ⊆ B`, `radius(A) >= α·radius(B)`.
pub fn legal_strong_alice(prev: &Ball, next: &Ball, alpha: &Rational) -> Verdict {
    let mut v = Verdict::new();
    v.check(next.closed, format!("alice closed: {}", next.closed));
    containment(&mut v, prev, next);
    let floor = alpha * &prev.radius;
    v.check(
        next.radius >= floor,
        format!("alice radius: {} >= alpha*r = {}", q(&next.radius), q(&floor)),
    );
    v
}

/// Strong game, Bob: `B ⊆ A`, `radius(B) >= β·radius(A)`.
pub fn legal_strong_bob(alice: &Ball, next: &Ball, beta: &Rational) -> Verdict {
    let mut v = Verdict::new();
    v.check(next.closed, format!("bob closed: {}", next.closed));
    containment(&mut v, alice, next);
    let floor = beta * &alice.radius;
    v.check(
        next.radius >= floor,
        format!("bob radius: {} >= beta*r = {}", q(&next.radius), q(&floor)),
    );
    v
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AliceMove {
    Cylinder(Cylinder),
    Ball(Ball),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveSource {
    Strategy,
    Solver,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub index: usize,
    pub alice: AliceMove,
    pub alice_evidence: Vec<String>,
    pub bob: Option<Ball>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bob_source: Option<MoveSource>,
    pub bob_evidence: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Running,
    BobDefaultWin,
    Completed,
    StrategyFault,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Player {
    Alice,
    Bob,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyFault {
    pub round: usize,
    pub player: Player,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameTranscript {
    pub config: GameConfig,
    pub alice: Descriptor,
    pub bob: Descriptor,
    pub initial_ball: Ball,
    pub rounds: Vec<Round>,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<StrategyFault>,
    pub limit_approx: Point,
    pub alice_report: StrategyReport,
}

impl GameTranscript {
    /// Bob's balls in order, starting with the initial one.
    pub fn balls(&self) -> Vec<&Ball> {
        let mut out = vec![&self.initial_ball];
        out.extend(self.rounds.iter().filter_map(|r| r.bob.as_ref()));
        out
    }

    pub fn final_ball(&self) -> &Ball {
        self.balls().last().copied().expect("initial ball")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }
}

fn check_initial(initial: &Ball) -> Result<()> {
    if !initial.closed {
        return Err(Error::Domain("the initial ball must be closed".into()));
    }
    if initial.radius >= Rational::new(1.into(), 2.into()) {
        return Err(Error::Domain("the initial radius must be below 1/2".into()));
    }
    Ok(())
}

/// Plays the cylinder absolute game for `config.max_rounds` rounds.
pub fn run_game(
    alice: &mut dyn AliceStrategy,
    bob: &mut dyn BobStrategy,
    config: &GameConfig,
    initial: &Ball,
) -> Result<GameTranscript> {
    check_initial(initial)?;
    let beta = &config.beta;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ball = initial.clone();
    let mut rounds = Vec::new();
    let mut faults = Vec::new();
    let mut outcome = Outcome::Completed;
    for index in 1..=config.max_rounds {
        let c = match alice.block(&ball) {
            Ok(c) => c,
            Err(e) => {
                faults.push(StrategyFault {
                    round: index,
                    player: Player::Alice,
                    message: e.to_string(),
                });
                outcome = Outcome::StrategyFault;
                break;
            }
        };
        let va = legal_alice_with_slack(&ball, &c, beta, config.fault_slack.as_ref());
        if !va.ok {
            faults.push(StrategyFault {
                round: index,
                player: Player::Alice,
                message: format!("illegal cylinder {c}: {}", va.evidence.join("; ")),
            });
            outcome = Outcome::StrategyFault;
            break;
        }
        let (next, source) = match bob.respond(&ball, &c, beta, &mut rng) {
            Some(b) => (Some(b), MoveSource::Strategy),
            None => (bob_escape(&ball, &c, beta).ok(), MoveSource::Solver),
        };
        let Some(next) = next else {
            rounds.push(Round {
                index,
                alice: AliceMove::Cylinder(c),
                alice_evidence: va.evidence,
                bob: None,
                bob_source: None,
                bob_evidence: vec!["no legal ball found".into()],
            });
            outcome = Outcome::BobDefaultWin;
            break;
        };
        let vb = legal_bob(&ball, &c, &next, beta);
        if !vb.ok {
            faults.push(StrategyFault {
                round: index,
                player: Player::Bob,
                message: format!("illegal ball {next}: {}", vb.evidence.join("; ")),
            });
            outcome = Outcome::StrategyFault;
            break;
        }
        rounds.push(Round {
            index,
            alice: AliceMove::Cylinder(c),
            alice_evidence: va.evidence,
            bob: Some(next.clone()),
            bob_source: Some(source),
            bob_evidence: vb.evidence,
        });
        ball = next;
    }
    Ok(GameTranscript {
        config: config.clone(),
        alice: alice.descriptor(),
        bob: bob.descriptor(),
        initial_ball: initial.clone(),
        rounds,
        outcome,
        faults,
        limit_approx: ball.center.clone(),
        alice_report: alice.report(),
    })
}

/// Plays the (α, β)-strong game.
pub fn run_strong_game(
    alice: &mut dyn StrongAlice,
    bob: &mut dyn StrongBob,
    config: &GameConfig,
    initial: &Ball,
) -> Result<GameTranscript> {
    check_initial(initial)?;
    let alpha = config
        .alpha
        .clone()
        .ok_or_else(|| Error::Parameter("strong game needs alpha".into()))?;
    let beta = &config.beta;
    let one = Rational::from_integer(1.into());
    if alpha <= Rational::from_integer(0.into()) || alpha >= one || beta >= &one {
        return Err(Error::Parameter("alpha and beta must lie in (0,1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ball = initial.clone();
    let mut rounds = Vec::new();
    let mut faults = Vec::new();
    let mut outcome = Outcome::Completed;
    for index in 1..=config.max_rounds {
        let a = match alice.choose(&ball) {
            Ok(a) => a,
            Err(e) => {
                faults.push(StrategyFault {
                    round: index,
                    player: Player::Alice,
                    message: e.to_string(),
                });
                outcome = Outcome::StrategyFault;
                break;
            }
        };
        let va = legal_strong_alice(&ball, &a, &alpha);
        if !va.ok {
            faults.push(StrategyFault {
                round: index,
                player: Player::Alice,
                message: format!("illegal ball {a}: {}", va.evidence.join("; ")),
            });
            outcome = Outcome::StrategyFault;
            break;
        }
        let (next, source) = match bob.respond(&a, beta, &mut rng) {
            Some(b) => (b, MoveSource::Strategy),
            // Concentric shrink is always legal in the strong game.
            None => (a.shrink(beta), MoveSource::Solver),
        };
        let vb = legal_strong_bob(&a, &next, beta);
        if !vb.ok {
            faults.push(StrategyFault {
                round: index,
                player: Player::Bob,
                message: format!("illegal ball {next}: {}", vb.evidence.join("; ")),
            });
            outcome = Outcome::StrategyFault;
            break;
        }
        rounds.push(Round {
            index,
            alice: AliceMove::Ball(a),
            alice_evidence: va.evidence,
            bob: Some(next.clone()),
            bob_source: Some(source),
            bob_evidence: vb.evidence,
        });
        ball = next;
    }
    Ok(GameTranscript {
        config: config.clone(),
        alice: alice.descriptor(),
        bob: bob.descriptor(),
        initial_ball: initial.clone(),
        rounds,
        outcome,
        faults,
        limit_approx: ball.center.clone(),
        alice_report: alice.report(),
    })
}
