use num_traits::{One, Signed};
use serde_json::json;

use super::{escape_ball, idle_block_at, spec::AliceSpec, spec::StrongAliceSpec};
use crate::affine::AffineEndo;
use crate::arith::{fmt_rational, pow, Rational};
use crate::error::{Error, Result};
use crate::game::{
    legal_bob, AliceStrategy, Descriptor, Frame, StrategyReport, StrongAlice,
};
use crate::solenoid::{Ball, Cylinder, Point};

/// Blocks a cylinder far away from Bob's ball, constraining nothing.
#[derive(Clone, Debug)]
pub struct NeverBlock {
    pub beta: Rational,
}

impl AliceStrategy for NeverBlock {
    fn descriptor(&self) -> Descriptor {
        Descriptor::new("never_block", serde_json::to_value(AliceSpec::NeverBlock).unwrap())
    }

    fn block(&mut self, ball: &Ball) -> Result<Cylinder> {
        let far = ball.center.with_coord(0, ball.center.real() + Rational::from_integer(2.into()))?;
        Cylinder::new(far, &self.beta * &ball.radius, 0)
    }
}

/// Blocks the center of every ball at a fixed place.
#[derive(Clone, Debug)]
pub struct IdleAlice {
    pub beta: Rational,
    pub index: usize,
}

impl AliceStrategy for IdleAlice {
    fn descriptor(&self) -> Descriptor {
        Descriptor::new("idle", serde_json::to_value(AliceSpec::Idle).unwrap())
    }

    fn block(&mut self, ball: &Ball) -> Result<Cylinder> {
        idle_block_at(ball, &self.beta, self.index)
    }
}

/// Round-robin interleaving of several strategies.
///
/// Every part sees every ball; at round t only part `t mod m` answers, the
/// others just observe. A part acts on every m-th ball, so between two of its
/// turns radii shrink by at most β^m; parts are therefore built to play at
/// β^m, which keeps their moves legal at β.
pub struct Intersection {
    parts: Vec<Box<dyn AliceStrategy>>,
    turn: usize,
    acted: Vec<usize>,
}

impl Intersection {
    pub fn new(parts: Vec<Box<dyn AliceStrategy>>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Parameter("an intersection needs at least one strategy".into()));
        }
        let n = parts.len();
        Ok(Intersection {
            parts,
            turn: 0,
            acted: vec![0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Which part answers at round `t` (0-based).
    pub fn schedule(&self, t: usize) -> usize {
        t % self.parts.len()
    }
}

pub fn intersect_strategies(parts: Vec<Box<dyn AliceStrategy>>) -> Result<Intersection> {
    Intersection::new(parts)
}

impl AliceStrategy for Intersection {
    fn descriptor(&self) -> Descriptor {
        let parts: Vec<_> = self.parts.iter().map(|p| p.descriptor()).collect();
        Descriptor::new("intersection", json!({ "parts": parts }))
    }

    fn block(&mut self, ball: &Ball) -> Result<Cylinder> {
        let s = self.schedule(self.turn);
        self.turn += 1;
        for (i, p) in self.parts.iter_mut().enumerate() {
            if i != s {
                p.observe(ball);
            }
        }
        self.acted[s] += 1;
        self.parts[s].block(ball)
    }

    fn observe(&mut self, ball: &Ball) {
        for p in &mut self.parts {
            p.observe(ball);
        }
    }

    fn report(&self) -> StrategyReport {
        let mut rep = StrategyReport::named("intersection");
        rep.notes.push(format!("turns per part: {:?}", self.acted));
        rep.children = self.parts.iter().map(|p| p.report()).collect();
        rep
    }
}

/// Strong-game Alice driven by a cylinder strategy playing at αγ.
pub struct CawToStrong {
    inner: Box<dyn AliceStrategy>,
    inner_spec: Option<AliceSpec>,
    alpha: Rational,
    gamma: Rational,
    last: Option<(Ball, Cylinder)>,
    issues: Vec<String>,
}

/// `inner` must be a cylinder strategy for the game with parameter `α·γ`.
pub fn caw_to_strong(
    inner: Box<dyn AliceStrategy>,
    alpha: Rational,
    gamma: Rational,
) -> Result<CawToStrong> {
    CawToStrong::new(inner, None, alpha, gamma)
}

impl CawToStrong {
    pub(crate) fn new(
        inner: Box<dyn AliceStrategy>,
        inner_spec: Option<AliceSpec>,
        alpha: Rational,
        gamma: Rational,
    ) -> Result<Self> {
        if !gamma.is_positive() || gamma >= Rational::one() {
            return Err(Error::Parameter("gamma must lie in (0,1)".into()));
        }
        if !alpha.is_positive() || alpha >= Rational::new(1.into(), 3.into()) {
            return Err(Error::Parameter("alpha must lie in (0,1/3)".into()));
        }
        Ok(CawToStrong {
            inner,
            inner_spec,
            alpha,
            gamma,
            last: None,
            issues: Vec::new(),
        })
    }

    fn inner_beta(&self) -> Rational {
        &self.alpha * &self.gamma
    }
}

impl StrongAlice for CawToStrong {
    fn descriptor(&self) -> Descriptor {
        match &self.inner_spec {
            Some(s) => Descriptor::new(
                "caw_to_strong",
                serde_json::to_value(StrongAliceSpec::FromCylinder { inner: s.clone() }).unwrap(),
            ),
            None => Descriptor::new(
                "caw_to_strong",
                json!({ "inner": self.inner.descriptor() }),
            ),
        }
    }

    fn choose(&mut self, ball: &Ball) -> Result<Ball> {
        let beta = self.inner_beta();
        if let Some((prev, c)) = &self.last {
            let v = legal_bob(prev, c, ball, &beta);
            if !v.ok {
                self.issues
                    .push(format!("inner game: {}", v.evidence.join("; ")));
            }
        }
        let ceiling = ball.primes().beta_ceiling(ball.primes().places() - 1)?;
        if self.alpha >= ceiling {
            return Err(Error::Parameter(format!(
                "alpha must be below {}",
                fmt_rational(&ceiling)
            )));
        }
        let c = self.inner.block(ball)?;
        let a = if ball.disjoint_from_cylinder(&c)? {
            Ball::closed(ball.center.clone(), &self.alpha * &ball.radius)?
        } else {
            escape_ball(ball, &c, &self.alpha)?
        };
        self.last = Some((ball.clone(), c));
        Ok(a)
    }

    fn report(&self) -> StrategyReport {
        let mut rep = StrategyReport::named("caw_to_strong");
        rep.issues = self.issues.clone();
        rep.children.push(self.inner.report());
        rep
    }
}

/// Constants of an affine transfer: `n` is the smallest positive integer
/// with `λ λ' (β+1) β^{n-2} < 1`, then `β' = β^n` and `η = (β+1) β^{n-1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransferConstants {
    pub lambda: Rational,
    pub lambda_inv: Rational,
    pub n: u32,
    pub inner_beta: Rational,
    pub eta: Rational,
}

fn lambda_of(a: &AffineEndo, q: &Rational) -> Rational {
    crate::affine::place_abs_all(a.primes(), q)
        .into_iter()
        .max()
        .expect("at least the real place")
}

pub fn transfer_exponent(psi: &AffineEndo, beta: &Rational) -> Result<TransferConstants> {
    if !psi.is_invertible_over_ring() {
        return Err(Error::Parameter(format!(
            "{} is not invertible over the ring",
            fmt_rational(&psi.linear)
        )));
    }
    if !beta.is_positive() || beta >= &Rational::one() {
        return Err(Error::Parameter("beta must lie in (0,1)".into()));
    }
    let lambda = lambda_of(psi, &psi.linear);
    let lambda_inv = lambda_of(psi, &psi.linear.recip());
    let one = Rational::one();
    let base = &lambda * &lambda_inv * (beta + &one);
    let mut n = 1u32;
    while &base * pow(beta, n as i64 - 2) >= one {
        n += 1;
    }
    Ok(TransferConstants {
        inner_beta: pow(beta, n as i64),
        eta: (beta + &one) * pow(beta, n as i64 - 1),
        lambda,
        lambda_inv,
        n,
    })
}

/// Shared bookkeeping of the two transfer strategies: the inner game's balls
/// and a legality check of each inner Bob move.
struct InnerGame {
    beta: Rational,
    balls: Vec<Ball>,
    last: Option<(Ball, Cylinder)>,
    issues: Vec<String>,
}

impl InnerGame {
    fn new(beta: Rational) -> Self {
        InnerGame {
            beta,
            balls: Vec::new(),
            last: None,
            issues: Vec::new(),
        }
    }

    fn feed(&mut self, ball: Ball, inner: &mut dyn AliceStrategy) -> Result<Cylinder> {
        if let Some((prev, c)) = &self.last {
            let v = legal_bob(prev, c, &ball, &self.beta);
            if !v.ok {
                self.issues.push(format!(
                    "inner move {}: {}",
                    self.balls.len(),
                    v.evidence.join("; ")
                ));
            }
        }
        self.balls.push(ball.clone());
        let c = inner.block(&ball)?;
        self.last = Some((ball, c.clone()));
        Ok(c)
    }
}

/// Alice for `Ψ^{-1}S ∪ (X \ U)` built from a strategy for S.
///
/// Bob's balls are pushed forward as `B̄(Ψx, λ_Ψ r)` at the wait stages and
/// the inner cylinder is pulled back with radius `λ_Ψ λ_{Ψ^{-1}} η r`.
/// Until `λ_Ψ r < 1/2` (so that the inner game starts legally) Alice idles.
pub struct AffineTransfer {
    inner: Box<dyn AliceStrategy>,
    inner_spec: Option<AliceSpec>,
    psi: AffineEndo,
    psi_inv: AffineEndo,
    region: Option<Ball>,
    beta: Rational,
    constants: TransferConstants,
    idle_index: usize,
    anchor_radius: Option<Rational>,
    outside_region: bool,
    game: InnerGame,
}

impl AffineTransfer {
    /// `inner` must play the game with parameter `transfer_exponent(psi, beta).inner_beta`.
    pub fn new(
        inner: Box<dyn AliceStrategy>,
        psi: AffineEndo,
        region: Option<Ball>,
        beta: Rational,
        game_beta: &Rational,
    ) -> Result<Self> {
        Self::build(inner, None, psi, region, beta, game_beta)
    }

    pub(crate) fn build(
        inner: Box<dyn AliceStrategy>,
        inner_spec: Option<AliceSpec>,
        psi: AffineEndo,
        region: Option<Ball>,
        beta: Rational,
        game_beta: &Rational,
    ) -> Result<Self> {
        let constants = transfer_exponent(&psi, &beta)?;
        let psi_inv = psi.inverse()?;
        let idle_index = if game_beta < &Rational::new(1.into(), 3.into()) {
            0
        } else {
            1
        };
        let ceiling = psi.primes().beta_ceiling(idle_index)?;
        if game_beta >= &ceiling {
            return Err(Error::Parameter("beta too large for an idle block".into()));
        }
        Ok(AffineTransfer {
            inner,
            inner_spec,
            psi,
            psi_inv,
            region,
            game: InnerGame::new(constants.inner_beta.clone()),
            beta,
            constants,
            idle_index,
            anchor_radius: None,
            outside_region: false,
        })
    }

    pub fn constants(&self) -> &TransferConstants {
        &self.constants
    }

    fn is_wait_stage(&self, ball: &Ball) -> Result<bool> {
        match &self.anchor_radius {
            None => {
                if &self.constants.lambda * &ball.radius >= Rational::new(1.into(), 2.into()) {
                    return Ok(false);
                }
                Ok(true)
            }
            Some(prev) => {
                let ratio = &ball.radius / prev;
                Ok(ratio < pow(&self.beta, self.constants.n as i64 - 1))
            }
        }
    }
}

impl AliceStrategy for AffineTransfer {
    fn descriptor(&self) -> Descriptor {
        let inner = match &self.inner_spec {
            Some(s) => serde_json::to_value(s).unwrap(),
            None => serde_json::to_value(self.inner.descriptor()).unwrap(),
        };
        Descriptor::new(
            "affine_transfer",
            json!({
                "inner": inner,
                "psi": self.psi,
                "region": self.region,
                "play_beta": fmt_rational(&self.beta),
            }),
        )
    }

    fn block(&mut self, ball: &Ball) -> Result<Cylinder> {
        if self.outside_region || !self.is_wait_stage(ball)? {
            return idle_block_at(ball, &self.beta, self.idle_index);
        }
        if self.anchor_radius.is_none() {
            if let Some(u) = &self.region {
                if ball.disjoint_from_ball(u)? {
                    // every later ball misses U as well, so Alice has won
                    self.outside_region = true;
                    return idle_block_at(ball, &self.beta, self.idle_index);
                }
            }
        }
        let k = &self.constants;
        let pushed = Ball::closed(self.psi.apply(&ball.center)?, &k.lambda * &ball.radius)?;
        let c = self.game.feed(pushed, self.inner.as_mut())?;
        self.anchor_radius = Some(ball.radius.clone());
        let eps = &k.lambda * &k.lambda_inv * &k.eta * &ball.radius;
        Cylinder::new(self.psi_inv.apply(&c.anchor)?, eps, c.constraining_index)
    }

    fn report(&self) -> StrategyReport {
        let mut rep = StrategyReport::named("affine_transfer");
        rep.issues = self.game.issues.clone();
        rep.notes.push(format!(
            "n = {}, inner beta = {}, eta = {}",
            self.constants.n,
            fmt_rational(&self.constants.inner_beta),
            fmt_rational(&self.constants.eta)
        ));
        if self.outside_region {
            rep.notes.push("ball left the region; idled".into());
        }
        rep.frame = Some(Frame {
            map: self.psi.clone(),
            balls: self.game.balls.clone(),
        });
        rep.children.push(self.inner.report());
        rep
    }
}

/// Alice for `S - a` from a strategy for S: translations are isometries,
/// so balls and cylinders move over unchanged.
pub struct TranslationTransfer {
    inner: Box<dyn AliceStrategy>,
    inner_spec: Option<AliceSpec>,
    shift: AffineEndo,
    game: InnerGame,
}

impl TranslationTransfer {
    pub fn new(inner: Box<dyn AliceStrategy>, shift: Point, beta: Rational) -> Result<Self> {
        Self::build(inner, None, shift, beta)
    }

    pub(crate) fn build(
        inner: Box<dyn AliceStrategy>,
        inner_spec: Option<AliceSpec>,
        shift: Point,
        beta: Rational,
    ) -> Result<Self> {
        Ok(TranslationTransfer {
            inner,
            inner_spec,
            shift: AffineEndo::new(Rational::one(), shift)?,
            game: InnerGame::new(beta),
        })
    }
}

impl AliceStrategy for TranslationTransfer {
    fn descriptor(&self) -> Descriptor {
        let inner = match &self.inner_spec {
            Some(s) => serde_json::to_value(s).unwrap(),
            None => serde_json::to_value(self.inner.descriptor()).unwrap(),
        };
        Descriptor::new(
            "translation_transfer",
            json!({ "inner": inner, "shift": self.shift.translation }),
        )
    }

    fn block(&mut self, ball: &Ball) -> Result<Cylinder> {
        let moved = Ball::closed(self.shift.apply(&ball.center)?, ball.radius.clone())?;
        let c = self.game.feed(moved, self.inner.as_mut())?;
        let anchor = c.anchor.sub(&self.shift.translation)?;
        Ok(Cylinder {
            anchor,
            epsilon: c.epsilon,
            constraining_index: c.constraining_index,
            normalized_radius: c.normalized_radius,
        })
    }

    fn report(&self) -> StrategyReport {
        let mut rep = StrategyReport::named("translation_transfer");
        rep.issues = self.game.issues.clone();
        rep.frame = Some(Frame {
            map: self.shift.clone(),
            balls: self.game.balls.clone(),
        });
        rep.children.push(self.inner.report());
        rep
    }
}
