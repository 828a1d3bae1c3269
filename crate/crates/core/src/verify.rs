//! Seeded property suite. Each property draws its own stream from the base
//! seed, so results do not depend on which other properties run.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::affine::{avoidance_params, spectral_data, AffineEndo};
use crate::analysis::{haar_ball_bound, haar_ball_measure, pp_product, pp_product_double, PrimeFamily};
use crate::arith::{
    floor_i, padic_abs, pow, power_exponent_below, prime_power, rat, Prime, Rational,
};
use crate::audit::audit_transcript;
use crate::error::{Error, Result};
use crate::game::{
    legal_bob, run_game, AliceStrategy, Descriptor, GameConfig, GameTranscript, Outcome,
};
use crate::solenoid::{distance, Ball, Cylinder, Point, PrimeSet};
use crate::strategies::{bob_escape, find_resonant, BobSpec, IdleAlice, NeverBlock};

pub const PROPERTIES: [&str; 7] = [
    "metric_axioms",
    "floor_identities",
    "contraction",
    "escape_legality",
    "resonant_uniqueness",
    "transcript_audit",
    "haar_bound",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Cases per property; escape legality runs ten times as many.
    pub cases: usize,
    /// Substring filter on property names.
    pub filter: Option<String>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            cases: 1000,
            filter: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn stream(seed: u64, name: &str) -> ChaCha8Rng {
    let salt = name
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    ChaCha8Rng::seed_from_u64(seed ^ salt)
}

fn prime_sets() -> Vec<PrimeSet> {
    [vec![2], vec![3], vec![2, 3], vec![2, 3, 5], vec![5, 7]]
        .iter()
        .map(|v| PrimeSet::from_u64(v).expect("primes"))
        .collect()
}

fn small_rational(rng: &mut ChaCha8Rng, num: i64, den: i64) -> Rational {
    rat(rng.gen_range(-num..=num), rng.gen_range(1..=den))
}

/// A rational whose denominator is a power of `p` times a small unit.
fn padic_coord(rng: &mut ChaCha8Rng, p: Prime) -> Rational {
    let e = rng.gen_range(-3..=3);
    rat(rng.gen_range(-40..=40), 1) * prime_power(p, e)
}

fn random_point(rng: &mut ChaCha8Rng, ps: &PrimeSet) -> Point {
    let real = small_rational(rng, 64, 64);
    let padic = ps.primes().iter().map(|p| padic_coord(rng, *p)).collect();
    Point::new(ps, real, padic).expect("arity")
}

fn positive_rational(rng: &mut ChaCha8Rng) -> Rational {
    rat(rng.gen_range(1..=500), rng.gen_range(1..=500))
}

fn metric_axioms(rng: &mut ChaCha8Rng, cases: usize) -> Result<Vec<String>> {
    let sets = prime_sets();
    let mut fails = Vec::new();
    for n in 0..cases {
        let ps = &sets[rng.gen_range(0..sets.len())];
        let x = random_point(rng, ps);
        let y = if rng.gen_bool(0.1) { x.clone() } else { random_point(rng, ps) };
        let z = random_point(rng, ps);
        let dxy = distance(&x, &y)?;
        if distance(&x, &x)? != Rational::zero() {
            fails.push(format!("case {n}: d(x,x) != 0"));
        }
        if dxy != distance(&y, &x)? {
            fails.push(format!("case {n}: asymmetric"));
        }
        if (dxy.is_zero()) != (x == y) || dxy.is_negative() {
            fails.push(format!("case {n}: definiteness"));
        }
        if dxy > distance(&x, &z)? + distance(&z, &y)? {
            fails.push(format!("case {n}: triangle inequality"));
        }
    }
    Ok(fails)
}

fn floor_identities(rng: &mut ChaCha8Rng, cases: usize) -> Result<Vec<String>> {
    let primes: Vec<Prime> = [2, 3, 5, 7, 11].iter().map(|&p| Prime::new(p).unwrap()).collect();
    let mut fails = Vec::new();
    for n in 0..cases {
        let p = primes[rng.gen_range(0..primes.len())];
        let pr = p.as_rational();
        let r = positive_rational(rng);
        let fl = prime_power(p, power_exponent_below(&r, p, false));
        if !(fl <= r && r < &fl * &pr) {
            fails.push(format!("case {n}: floor bracket fails for r={r} p={p}"));
        }
        let scaled = prime_power(p, power_exponent_below(&(&r * &pr), p, false));
        if scaled != &fl * &pr {
            fails.push(format!("case {n}: floor(pr) != p floor(r)"));
        }
        let k = rng.gen_range(-6..=6);
        if prime_power(p, power_exponent_below(&pow(&pr, k), p, false)) != pow(&pr, k) {
            fails.push(format!("case {n}: floor of a power"));
        }
        let strict = prime_power(p, power_exponent_below(&r, p, true));
        if !(strict < r && r <= &strict * &pr) {
            fails.push(format!("case {n}: strict bracket fails"));
        }
        if floor_i(&r, p)?.value != fl {
            fails.push(format!("case {n}: floor_i disagrees"));
        }
        let a = small_rational(rng, 1000, 1000);
        let b = small_rational(rng, 1000, 1000);
        if padic_abs(&(&a * &b), p) != padic_abs(&a, p) * padic_abs(&b, p) {
            fails.push(format!("case {n}: |ab|_p != |a|_p |b|_p"));
        }
        if padic_abs(&(&a + &b), p) > padic_abs(&a, p).max(padic_abs(&b, p)) {
            fails.push(format!("case {n}: ultrametric inequality"));
        }
        let x = rat(rng.gen_range(3..=400), rng.gen_range(1..=3));
        if x > Rational::one() {
            let fam = PrimeFamily::All;
            if pp_product(&x, &fam)? != pp_product_double(&x, &fam)? {
                fails.push(format!("case {n}: product decompositions differ at x={x}"));
            }
        }
    }
    Ok(fails)
}

/// Maps with |m/n| != 1 whose numerator and denominator use only primes of P.
fn random_map(rng: &mut ChaCha8Rng, ps: &PrimeSet) -> Result<AffineEndo> {
    loop {
        let mut num = BigInt::one();
        let mut den = BigInt::one();
        for p in ps.primes() {
            num *= p.as_bigint().pow(rng.gen_range(0..=2));
            den *= p.as_bigint().pow(rng.gen_range(0..=2));
        }
        let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
        let m = Rational::new(num * sign, den);
        if m.abs() == Rational::one() {
            continue;
        }
        let shift = if rng.gen_bool(0.5) {
            Point::zero(ps)
        } else {
            random_point(rng, ps)
        };
        return AffineEndo::new(m, shift);
    }
}

fn contraction(rng: &mut ChaCha8Rng, cases: usize) -> Result<Vec<String>> {
    let sets = prime_sets();
    let mut fails = Vec::new();
    for n in 0..cases {
        let ps = &sets[rng.gen_range(0..sets.len())];
        let a = random_map(rng, ps)?;
        let lambda = spectral_data(&a, &rat(1, 2))?.lambda_a;
        let x1 = random_point(rng, ps);
        let x2 = random_point(rng, ps);
        let d = distance(&x1, &x2)?;
        let j = rng.gen_range(0..=8u32);
        let lhs = distance(&a.apply_inv_iter(j, &x1)?, &a.apply_inv_iter(j, &x2)?)?;
        if lhs < pow(&lambda, -(j as i64)) * &d {
            fails.push(format!("case {n}: A={} j={j} contracts too much", a.linear));
        }
    }
    Ok(fails)
}

fn random_ball(rng: &mut ChaCha8Rng, ps: &PrimeSet) -> Result<Ball> {
    let r = rat(rng.gen_range(1..=100), rng.gen_range(101..=4000));
    Ball::closed(random_point(rng, ps), r)
}

fn escape_legality(rng: &mut ChaCha8Rng, cases: usize) -> Result<Vec<String>> {
    let sets = prime_sets();
    let mut fails = Vec::new();
    for n in 0..cases {
        let ps = &sets[rng.gen_range(0..sets.len())];
        let prev = random_ball(rng, ps)?;
        let i = rng.gen_range(0..ps.places());
        let ceiling = ps.beta_ceiling(i)?;
        let beta = &ceiling * rat(rng.gen_range(1..=99), 100);
        // anchor near the center so the cylinder usually cuts the ball
        let offset = random_point(rng, ps).scale(&(&prev.radius * rat(1, 8)));
        let anchor = prev.center.add(&offset)?;
        let eps = &beta * &prev.radius * rat(rng.gen_range(1..=16), 16);
        let c = Cylinder::new(anchor, eps, i)?;
        match bob_escape(&prev, &c, &beta) {
            Ok(next) => {
                let v = legal_bob(&prev, &c, &next, &beta);
                if !v.ok {
                    fails.push(format!("case {n}: illegal escape: {}", v.evidence.join("; ")));
                }
            }
            Err(e) => fails.push(format!("case {n}: no escape below the ceiling: {e}")),
        }
    }
    Ok(fails)
}

fn resonant_uniqueness(rng: &mut ChaCha8Rng, cases: usize) -> Result<Vec<String>> {
    let p23 = PrimeSet::from_u64(&[2, 3])?;
    let configs = [
        (rat(3, 2), rat(3, 10)),
        (rat(6, 1), rat(1, 4)),
        (rat(2, 3), rat(1, 5)),
        (rat(-4, 3), rat(1, 4)),
    ];
    let r0 = rat(1, 4);
    let mut fails = Vec::new();
    for n in 0..cases {
        let (m, beta) = &configs[n % configs.len()];
        let a = AffineEndo::linear_map(&p23, m.clone())?;
        let y = if rng.gen_bool(0.5) {
            Point::zero(&p23)
        } else {
            Point::diagonal(&p23, &rat(rng.gen_range(-3..=3), 1))
        };
        let params = avoidance_params(&a, &y, &r0, beta)?;
        // radius inside one of the first few windows
        let k = rng.gen_range(0..=(params.k0 + 4));
        let top = pow(&params.mu, k as i64) * &params.r0;
        let r = &top * rat(rng.gen_range(1..=64), 64);
        let r = if r <= &top * beta { top.clone() } else { r };
        let center = Point::new(
            &p23,
            rat(rng.gen_range(-64..=64), 256),
            vec![rat(rng.gen_range(-8..=8), 1), rat(rng.gen_range(-8..=8), 1)],
        )?;
        let b = Ball::closed(center, r)?;
        match find_resonant(&b, &a, &y, &params, k) {
            Ok(Some(hit)) => {
                let back = a.apply_iter(hit.j, &hit.center)?;
                if back != y.add_diagonal(&hit.z) {
                    fails.push(format!("case {n}: hit center does not map to y + z"));
                }
            }
            Ok(None) => {}
            Err(e) => fails.push(format!("case {n}: {e}")),
        }
    }
    Ok(fails)
}

fn transcript_audit(rng: &mut ChaCha8Rng, cases: usize) -> Result<Vec<String>> {
    let sets = prime_sets();
    let bobs = [BobSpec::StayPut, BobSpec::Escape, BobSpec::Random];
    let mut fails = Vec::new();
    for n in 0..cases {
        let ps = &sets[rng.gen_range(0..sets.len())];
        let idle = rng.gen_bool(0.8);
        // NeverBlock answers at the real place
        let index = if idle { rng.gen_range(0..ps.places()) } else { 0 };
        let ceiling = ps.beta_ceiling(index)?;
        let beta = &ceiling * rat(rng.gen_range(1..=9), 10);
        let mut alice: Box<dyn AliceStrategy> = if idle {
            Box::new(IdleAlice {
                beta: beta.clone(),
                index,
            })
        } else {
            Box::new(NeverBlock { beta: beta.clone() })
        };
        let mut bob = bobs[rng.gen_range(0..bobs.len())].build();
        let cfg = GameConfig::cylinder(beta, rng.gen_range(1..=8), rng.gen());
        let initial = Ball::closed(random_point(rng, ps), rat(rng.gen_range(1..=15), 32))?;
        let t = run_game(alice.as_mut(), bob.as_mut(), &cfg, &initial)?;
        let back: GameTranscript = serde_json::from_str(&t.to_json())
            .map_err(|e| Error::Parse(e.to_string()))?;
        if back != t {
            fails.push(format!("case {n}: transcript does not round-trip"));
        }
        let rep = audit_transcript(&back);
        if !rep.passed() {
            fails.push(format!("case {n}: {}", rep.discrepancies.join("; ")));
        }
        if t.outcome == Outcome::StrategyFault {
            let why: Vec<String> = t.faults.iter().map(|f| f.message.clone()).collect();
            fails.push(format!("case {n}: strategy fault: {}", why.join("; ")));
        }
    }
    Ok(fails)
}

fn haar_bound(rng: &mut ChaCha8Rng, cases: usize) -> Result<Vec<String>> {
    let sets = prime_sets();
    let mut fails = Vec::new();
    for n in 0..cases {
        let ps = &sets[rng.gen_range(0..sets.len())];
        let r = rat(rng.gen_range(1..=999), 1000);
        let real = rat(rng.gen_range(0..=64), 64);
        let padic = ps
            .primes()
            .iter()
            .map(|p| rat(rng.gen_range(0..=30), 1) * prime_power(*p, rng.gen_range(0..=2)))
            .collect();
        let c = Point::new(ps, real, padic)?;
        let exact = haar_ball_measure(&c, &r)?;
        let bound = haar_ball_bound(&r, &PrimeFamily::Finite(ps.clone()))?;
        if exact > bound {
            fails.push(format!("case {n}: measure {exact} above bound {bound} at r={r}"));
        }
        let r2 = &r * rat(rng.gen_range(1..=10), 10);
        if haar_ball_bound(&r2, &PrimeFamily::Finite(ps.clone()))? > bound {
            fails.push(format!("case {n}: bound not monotone in r"));
        }
    }
    Ok(fails)
}

pub fn run_property(name: &str, seed: u64, cases: usize) -> Result<PropertyResult> {
    let mut rng = stream(seed, name);
    let (cases, failures) = match name {
        "metric_axioms" => (cases, metric_axioms(&mut rng, cases)?),
        "floor_identities" => (cases, floor_identities(&mut rng, cases)?),
        "contraction" => (cases, contraction(&mut rng, cases)?),
        "escape_legality" => (10 * cases, escape_legality(&mut rng, 10 * cases)?),
        "resonant_uniqueness" => (cases, resonant_uniqueness(&mut rng, cases)?),
        "transcript_audit" => (cases, transcript_audit(&mut rng, cases)?),
        "haar_bound" => (cases, haar_bound(&mut rng, cases)?),
        other => return Err(Error::Domain(format!("unknown property {other}"))),
    };
    Ok(PropertyResult {
        name: name.to_string(),
        cases,
        failures,
    })
}

/// Runs every property whose name contains the filter.
pub fn run_suite(cfg: &VerifyConfig) -> Result<Vec<PropertyResult>> {
    PROPERTIES
        .iter()
        .filter(|n| cfg.filter.as_deref().is_none_or(|f| n.contains(f)))
        .map(|n| run_property(n, cfg.seed, cfg.cases))
        .collect()
}

/// Idle blocks whose radius exceeds βr by a fixed slack.
struct InflatedIdle {
    beta: Rational,
    slack: Rational,
}

impl AliceStrategy for InflatedIdle {
    fn descriptor(&self) -> Descriptor {
        Descriptor::new("inflated-idle", serde_json::Value::Null)
    }

    fn block(&mut self, ball: &Ball) -> Result<Cylinder> {
        Cylinder::new(ball.center.clone(), &self.beta * &ball.radius + &self.slack, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultCheck {
    pub rounds: usize,
    pub outcome: Outcome,
    pub discrepancies: usize,
    /// The audit rejected the tampered run.
    pub detected: bool,
}

/// Plays a game where Alice oversteps by 10^-6 and the engine is told to
/// tolerate it; the audit must still reject the transcript.
pub fn fault_injection(seed: u64) -> Result<FaultCheck> {
    let ps = PrimeSet::from_u64(&[2, 3])?;
    let beta = rat(3, 10);
    let slack = rat(1, 1_000_000);
    let mut alice = InflatedIdle {
        beta: beta.clone(),
        slack: slack.clone(),
    };
    let mut bob = BobSpec::Random.build();
    let mut cfg = GameConfig::cylinder(beta, 10, seed);
    cfg.fault_slack = Some(slack);
    let initial = Ball::closed(Point::real_only(&ps, rat(1, 8)), rat(1, 4))?;
    let t = run_game(&mut alice, bob.as_mut(), &cfg, &initial)?;
    let rep = audit_transcript(&t);
    Ok(FaultCheck {
        rounds: t.rounds.len(),
        outcome: t.outcome,
        discrepancies: rep.discrepancies.len(),
        detected: !rep.passed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_property_passes_small() {
        let res = run_suite(&VerifyConfig {
            seed: 7,
            cases: 50,
            filter: None,
        })
        .unwrap();
        assert_eq!(res.len(), PROPERTIES.len());
        for r in res {
            assert!(r.passed(), "{}: {:?}", r.name, r.failures.first());
        }
    }

    #[test]
    fn filter_selects() {
        let res = run_suite(&VerifyConfig {
            seed: 1,
            cases: 10,
            filter: Some("metric".into()),
        })
        .unwrap();
        assert_eq!(res.len(), 1);
        assert_eq!(res[0].name, "metric_axioms");
        assert!(run_property("nope", 0, 1).is_err());
    }

    #[test]
    fn injected_fault_is_caught() {
        let f = fault_injection(3).unwrap();
        assert!(f.rounds > 0);
        assert!(f.detected);
    }
}
