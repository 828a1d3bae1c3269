use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{idle_block_at, spec::AliceSpec};
use crate::affine::{avoidance_params, beta_ceiling, spectral_data, AffineEndo, AvoidanceParams};
use crate::arith::{fmt_rational, padic_abs, pow, power_strictly_below, qser, Rational};
use crate::error::{Error, Result};
use crate::game::{
    AliceStrategy, AvoidanceRecord, Descriptor, StrategyReport, WindowRecord,
};
use crate::solenoid::{
    enumerate_ring, lattice_distance_scaled, Ball, Cylinder, LatticeDistance, Point, Projection,
    RingSearch, DEFAULT_SEARCH_CAP,
};

/// A resonant set `A^{-j} B(y + Δ(z), δ)` and the center of its enclosure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResonantIndex {
    pub j: u32,
    #[serde(with = "qser")]
    pub z: Rational,
    pub target: Point,
    pub center: Point,
}

/// All z in `scale·R` for which `A^{-j} B(y + Δ(z), δ)` meets `b`.
///
/// Works on the forward image: A^j b is a product of an interval of radius
/// |D|^j r and p-adic balls of radius |D|_p^j ⌊pr⌋, and it meets the open
/// ball B(y+z, δ) exactly when every projection pair meets.
fn forward_hits(
    b: &Ball,
    a: &AffineEndo,
    y: &Point,
    scale: &Rational,
    delta: &Rational,
    j: u32,
) -> Result<Vec<Rational>> {
    let w = a.apply_iter(j, &b.center)?.sub(y)?;
    let lin = pow(&a.linear, j as i64);
    let mut padic_radii = Vec::with_capacity(b.primes().len());
    for (k, p) in b.primes().primes().iter().enumerate() {
        let Projection::PAdic { radius, .. } = b.projection(k + 1)? else {
            unreachable!("place {} is p-adic", k + 1)
        };
        let image = padic_abs(&lin, *p) * radius;
        let open = power_strictly_below(&(delta * p.as_rational()), *p);
        padic_radii.push(image.max(open));
    }
    let q = RingSearch {
        scale: scale.clone(),
        real_center: w.real().clone(),
        real_radius: lin.abs() * &b.radius + delta,
        real_strict: true,
        padic_centers: w.coords()[1..].to_vec(),
        padic_radii,
    };
    enumerate_ring(b.primes(), &q, DEFAULT_SEARCH_CAP)
}

/// The same intersection test done on the preimage side.
fn backward_meets(
    b: &Ball,
    a: &AffineEndo,
    center: &Point,
    delta: &Rational,
    j: u32,
) -> Result<bool> {
    let inv = pow(&a.linear.recip(), j as i64);
    for (i, proj) in b.projections().into_iter().enumerate() {
        let c = center.coord(i);
        let meets = match proj {
            Projection::Interval {
                center: x, radius, ..
            } => (&x - c).abs() < radius + inv.abs() * delta,
            Projection::PAdic {
                prime,
                center: x,
                radius,
            } => {
                let image =
                    padic_abs(&inv, prime) * power_strictly_below(&(delta * prime.as_rational()), prime);
                padic_abs(&(&x - c), prime) <= radius.max(image)
            }
        };
        if !meets {
            return Ok(false);
        }
    }
    Ok(true)
}

fn hits_for(
    b: &Ball,
    a: &AffineEndo,
    y: &Point,
    params: &AvoidanceParams,
    js: &[u32],
) -> Result<Vec<ResonantIndex>> {
    let mut hits = Vec::new();
    for &j in js {
        for z in forward_hits(b, a, y, &params.a_scale, &params.delta, j)? {
            let target = y.add_diagonal(&z);
            let center = a.apply_inv_iter(j, &target)?;
            if !backward_meets(b, a, &center, &params.delta, j)? {
                return Err(Error::InvariantViolation(format!(
                    "forward and backward tests disagree at j={j}, z={}",
                    fmt_rational(&z)
                )));
            }
            hits.push(ResonantIndex {
                j,
                z,
                target,
                center,
            });
        }
    }
    Ok(hits)
}

/// The resonant set of window `k` that meets `b`, if any.
///
/// Sets sharing a center are nested (A^{-j} of the same ball for growing j),
/// so such hits collapse to the one with smallest j. Two hits with distinct
/// centers are an invariant violation.
pub fn find_resonant(
    b: &Ball,
    a: &AffineEndo,
    y: &Point,
    params: &AvoidanceParams,
    k: u32,
) -> Result<Option<ResonantIndex>> {
    let hits = hits_for(b, a, y, params, &params.window_exponents(k))?;
    let Some(first) = hits.iter().min_by_key(|h| h.j).cloned() else {
        return Ok(None);
    };
    if let Some(other) = hits.iter().find(|h| h.center != first.center) {
        return Err(Error::InvariantViolation(format!(
            "two resonant sets meet {b} in window {k}: j={} z={} and j={} z={}",
            first.j,
            fmt_rational(&first.z),
            other.j,
            fmt_rational(&other.z)
        )));
    }
    Ok(Some(first))
}

/// Window bookkeeping of [`AvoidanceAlice`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvoidanceState {
    pub params: Option<AvoidanceParams>,
    /// Lowest window not yet handled.
    pub next_window: u32,
    pub windows: Vec<WindowRecord>,
}

#[derive(Clone, Debug)]
enum Mode {
    Windows(AvoidanceState),
    /// |m/n| = 1: the orbit is finite, so block lattice points one by one.
    Points {
        bases: Vec<Point>,
        blocked: Vec<Point>,
    },
}

/// The winning strategy for points whose A-orbit stays away from `y`.
#[derive(Clone, Debug)]
pub struct AvoidanceAlice {
    map: AffineEndo,
    target: Point,
    beta: Rational,
    idle_index: usize,
    block_index: usize,
    stage: usize,
    mode: Mode,
}

fn check_beta(map: &AffineEndo, index: usize, game_beta: &Rational) -> Result<()> {
    let ceiling = map.primes().beta_ceiling(index)?;
    if !game_beta.is_positive() || game_beta >= &ceiling {
        return Err(Error::Parameter(format!(
            "beta {} must lie in (0, {}) for blocks at place {index}",
            fmt_rational(game_beta),
            fmt_rational(&ceiling)
        )));
    }
    Ok(())
}

impl AvoidanceAlice {
    /// `beta` is the game parameter.
    pub fn new(map: AffineEndo, target: Point, beta: Rational) -> Result<Self> {
        Self::with_play_beta(map, target, beta.clone(), &beta)
    }

    /// A strategy playing as if the parameter were `play_beta` inside a game
    /// whose parameter is `game_beta >= play_beta`.
    pub fn with_play_beta(
        map: AffineEndo,
        target: Point,
        play_beta: Rational,
        game_beta: &Rational,
    ) -> Result<Self> {
        if map.primes() != target.primes() {
            return Err(Error::PrimeSetMismatch);
        }
        if !play_beta.is_positive() || &play_beta > game_beta {
            return Err(Error::Parameter("play beta must lie in (0, game beta]".into()));
        }
        let third = Rational::new(1.into(), 3.into());
        let (mode, block_index) = if map.is_degenerate() {
            let bases = if map.linear.is_one() {
                if !map.translation_is_trivial() {
                    return Err(Error::Parameter(
                        "x + a with a outside the lattice has infinite orbits; not supported".into(),
                    ));
                }
                vec![target.clone()]
            } else {
                vec![target.clone(), map.translation.sub(&target)?]
            };
            // any place works; the real place unless β is too large for it
            let index = if game_beta < &third { 0 } else { 1 };
            let mode = Mode::Points {
                bases,
                blocked: Vec::new(),
            };
            (mode, index)
        } else {
            let spec = spectral_data(&map, &Rational::new(1.into(), 2.into()))?;
            let ceiling = beta_ceiling(&map)?;
            if game_beta >= &ceiling {
                return Err(Error::Parameter(format!(
                    "beta {} must be below {}",
                    fmt_rational(game_beta),
                    fmt_rational(&ceiling)
                )));
            }
            (Mode::Windows(AvoidanceState::default()), spec.i0)
        };
        let idle_index = if game_beta < &third { 0 } else { block_index };
        check_beta(&map, block_index, game_beta)?;
        check_beta(&map, idle_index, game_beta)?;
        Ok(AvoidanceAlice {
            map,
            target,
            beta: play_beta,
            idle_index,
            block_index,
            stage: 0,
            mode,
        })
    }

    pub fn state(&self) -> Option<&AvoidanceState> {
        match &self.mode {
            Mode::Windows(s) => Some(s),
            Mode::Points { .. } => None,
        }
    }

    fn idle(&self, ball: &Ball) -> Result<Cylinder> {
        idle_block_at(ball, &self.beta, self.idle_index)
    }

    fn block_windows(&mut self, ball: &Ball, stage: usize) -> Result<Cylinder> {
        let Mode::Windows(state) = &mut self.mode else {
            unreachable!()
        };
        if state.params.is_none() {
            state.params = Some(avoidance_params(
                &self.map,
                &self.target,
                &ball.radius,
                &self.beta,
            )?);
        }
        let params = state.params.as_ref().expect("set above");
        let Some(reached) = reached_window(params, &ball.radius) else {
            return idle_block_at(ball, &self.beta, self.idle_index);
        };
        if reached < state.next_window {
            return idle_block_at(ball, &self.beta, self.idle_index);
        }
        let k = state.next_window;
        state.next_window += 1;
        let late = params.window_of(&ball.radius) != Some(k);
        let hit = find_resonant(ball, &self.map, &self.target, params, k)?;
        state.windows.push(WindowRecord {
            k,
            stage,
            j: hit.as_ref().map(|h| h.j),
            z: hit.as_ref().map(|h| h.z.clone()),
            late,
        });
        match hit {
            Some(h) => Cylinder::new(h.center, &params.delta * params.r_n(h.j), self.block_index),
            None => idle_block_at(ball, &self.beta, self.idle_index),
        }
    }

    fn block_points(&mut self, ball: &Ball) -> Result<Cylinder> {
        let Mode::Points { bases, blocked } = &mut self.mode else {
            unreachable!()
        };
        let one = Rational::one();
        for base in bases.iter() {
            let q = RingSearch::around(&ball.center.sub(base)?, &one, &ball.radius, false);
            for z in enumerate_ring(ball.primes(), &q, DEFAULT_SEARCH_CAP)? {
                let pt = base.add_diagonal(&z);
                if ball.contains_point(&pt)? {
                    blocked.push(pt.clone());
                    return Cylinder::new(pt, &self.beta * &ball.radius, self.block_index);
                }
            }
        }
        self.idle(ball)
    }
}

/// Largest k with `r <= μ^k r0`.
fn reached_window(params: &AvoidanceParams, r: &Rational) -> Option<u32> {
    if r > &params.r0 {
        return None;
    }
    let mut k = 0u32;
    let mut top = &params.r0 * &params.mu;
    while r <= &top {
        top *= &params.mu;
        k += 1;
    }
    Some(k)
}

impl AliceStrategy for AvoidanceAlice {
    fn descriptor(&self) -> Descriptor {
        let spec = AliceSpec::Avoidance {
            map: self.map.clone(),
            targets: vec![self.target.clone()],
        };
        let mut params = serde_json::to_value(&spec).unwrap_or(json!(null));
        params["play_beta"] = json!(fmt_rational(&self.beta));
        Descriptor::new("avoidance", params)
    }

    fn block(&mut self, ball: &Ball) -> Result<Cylinder> {
        let stage = self.stage;
        self.stage += 1;
        match self.mode {
            Mode::Windows(_) => self.block_windows(ball, stage),
            Mode::Points { .. } => self.block_points(ball),
        }
    }

    fn observe(&mut self, _ball: &Ball) {
        self.stage += 1;
    }

    fn report(&self) -> StrategyReport {
        let mut rep = StrategyReport::named("avoidance");
        let record = match &self.mode {
            Mode::Windows(s) => AvoidanceRecord {
                map: self.map.clone(),
                target: self.target.clone(),
                params: s.params.clone(),
                windows: s.windows.clone(),
                blocked_points: Vec::new(),
            },
            Mode::Points { blocked, .. } => AvoidanceRecord {
                map: self.map.clone(),
                target: self.target.clone(),
                params: None,
                windows: Vec::new(),
                blocked_points: blocked.clone(),
            },
        };
        rep.notes.extend(
            record
                .windows
                .iter()
                .filter(|w| w.late)
                .map(|w| format!("window {} handled late at stage {}", w.k, w.stage)),
        );
        rep.avoidance = Some(record);
        rep
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowAudit {
    pub checked: usize,
    /// Windows whose following ball is not in the transcript.
    pub unchecked: usize,
    pub last_checked: Option<u32>,
    pub failures: Vec<String>,
}

/// Re-checks the inductive window claim: the ball following the stage at
/// which window k was handled misses every resonant set with
/// `λ_A^{-j} >= μ^{k+1-k0}`.
pub fn audit_windows(record: &AvoidanceRecord, balls: &[Ball]) -> Result<WindowAudit> {
    let mut out = WindowAudit::default();
    let Some(params) = &record.params else {
        return Ok(out);
    };
    for w in &record.windows {
        let Some(next) = balls.get(w.stage + 1) else {
            out.unchecked += 1;
            continue;
        };
        let js = params.exponents_through(w.k);
        let hits = hits_for(next, &record.map, &record.target, params, &js)?;
        if let Some(h) = hits.first() {
            out.failures.push(format!(
                "window {}: ball {} meets the set j={} z={}",
                w.k,
                w.stage + 1,
                h.j,
                fmt_rational(&h.z)
            ));
        }
        out.checked += 1;
        out.last_checked = Some(w.k);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitCertificate {
    /// Largest exponent covered; `None` if no window was certified.
    pub j_max: Option<u32>,
    #[serde(with = "qser")]
    pub bound: Rational,
    /// Smallest distance found below `bound`, if any.
    #[serde(default, with = "qser::opt", skip_serializing_if = "Option::is_none")]
    pub min_distance: Option<Rational>,
    pub ok: bool,
}

/// Checks `d(A^j x, y + Δ(a·R)) >= δ` for every j handled by the windows up
/// to `last_window`. For |m/n| = 1 maps, checks that x and A x lie off the
/// lattice `y + Δ(R)`.
pub fn certify_orbit(
    record: &AvoidanceRecord,
    x: &Point,
    last_window: Option<u32>,
) -> Result<OrbitCertificate> {
    let Some(params) = &record.params else {
        return certify_points(record, x);
    };
    let Some(k) = last_window else {
        return Ok(OrbitCertificate {
            j_max: None,
            bound: params.delta.clone(),
            min_distance: None,
            ok: true,
        });
    };
    let js = params.exponents_through(k);
    let mut min_distance: Option<Rational> = None;
    let mut ok = true;
    for &j in &js {
        let w = record.map.apply_iter(j, x)?.sub(&record.target)?;
        let d = lattice_distance_scaled(&w, &params.a_scale, &params.delta)?;
        ok &= d.at_least(&params.delta);
        if let LatticeDistance::Within { distance, .. } = d {
            if min_distance.as_ref().map_or(true, |m| &distance < m) {
                min_distance = Some(distance);
            }
        }
    }
    Ok(OrbitCertificate {
        j_max: js.last().copied(),
        bound: params.delta.clone(),
        min_distance,
        ok,
    })
}

fn certify_points(record: &AvoidanceRecord, x: &Point) -> Result<OrbitCertificate> {
    let half = Rational::new(1.into(), 2.into());
    let mut min_distance: Option<Rational> = None;
    let mut ok = true;
    let orbit = [x.clone(), record.map.apply(x)?];
    for p in &orbit {
        let w = p.sub(&record.target)?;
        if let LatticeDistance::Within { distance, .. } =
            lattice_distance_scaled(&w, &Rational::one(), &half)?
        {
            ok &= distance.is_positive();
            if min_distance.as_ref().map_or(true, |m| &distance < m) {
                min_distance = Some(distance);
            }
        }
    }
    Ok(OrbitCertificate {
        j_max: Some(1),
        bound: Rational::from_integer(0.into()),
        min_distance,
        ok,
    })
}

/// Window audit and orbit certificate of one avoidance strategy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvoidanceAudit {
    pub map: AffineEndo,
    pub target: Point,
    pub windows: WindowAudit,
    pub certificate: OrbitCertificate,
}

impl AvoidanceAudit {
    pub fn passed(&self) -> bool {
        self.windows.failures.is_empty() && self.certificate.ok
    }
}

/// Audits every avoidance strategy in a report tree against the balls it saw.
/// Transfer frames switch to the inner balls and the mapped limit point.
pub fn audit_report(
    report: &StrategyReport,
    balls: &[Ball],
    limit: &Point,
) -> Result<Vec<AvoidanceAudit>> {
    let mut out = Vec::new();
    if let Some(rec) = &report.avoidance {
        let windows = audit_windows(rec, balls)?;
        let certificate = if windows.failures.is_empty() {
            certify_orbit(rec, limit, windows.last_checked)?
        } else {
            certify_orbit(rec, limit, None)?
        };
        out.push(AvoidanceAudit {
            map: rec.map.clone(),
            target: rec.target.clone(),
            windows,
            certificate,
        });
    }
    let (balls, limit) = match &report.frame {
        Some(f) => (f.balls.as_slice(), f.map.apply(limit)?),
        None => (balls, limit.clone()),
    };
    for c in &report.children {
        out.extend(audit_report(c, balls, &limit)?);
    }
    Ok(out)
}
