//! The Cantor scheme F*: Bob restricted to a fixed family of separated
//! sub-balls, Alice answering with her strategy along every branch.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::fixtures;
use super::packing::{hausdorff_lower, nc_lower, real_count};
use crate::arith::{pow, power_exponent_below, prime_power, qser, rat, Rational};
use crate::error::{Error, Result};
use crate::game::legal_alice;
use crate::hp::Decimal;
use crate::solenoid::{Ball, Cylinder};
use crate::strategies::AliceSpec;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeNode {
    pub word: Vec<u32>,
    pub ball: Ball,
    /// Alice's reply at this node, present when the node was expanded.
    pub blocked: Option<Cylinder>,
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CantorTree {
    #[serde(with = "qser")]
    pub beta0: Rational,
    pub branching: u64,
    pub depth: usize,
    /// Children recursed into per expanded node; every expanded node still
    /// materializes all `branching` children.
    pub fanout: usize,
    pub alice: AliceSpec,
    pub nodes: Vec<TreeNode>,
}

impl CantorTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(move |n| n.word.len() == self.depth)
    }
}

/// `Σ λ_j N^{-j}`, the N-adic point of a word.
pub fn psi_word(word: &[u32], n: u64) -> Rational {
    let base = Rational::from_integer(BigInt::from(n));
    let mut out = Rational::zero();
    let mut scale = Rational::one();
    for l in word {
        scale /= &base;
        out += &scale * Rational::from_integer(BigInt::from(*l));
    }
    out
}

/// Candidate children of `ball` in construction order: real offsets
/// `-r + (3k + 3/2)βr` crossed with p-adic coset representatives.
fn candidates(ball: &Ball, beta: &Rational) -> Result<Vec<Ball>> {
    let ps = ball.primes().clone();
    let r = &ball.radius;
    let child_r = beta * r;
    let mut per_place: Vec<Vec<Rational>> = Vec::with_capacity(ps.places());
    let x0 = ball.center.real();
    per_place.push(
        (0..real_count(beta))
            .map(|k| x0 - r + rat(6 * k as i64 + 3, 2) * &child_r)
            .collect(),
    );
    for (k, p) in ps.primes().iter().enumerate() {
        let pr = p.as_rational();
        let e = power_exponent_below(&(r * &pr), *p, false);
        let f = power_exponent_below(&(&child_r * &pr), *p, false);
        let count = p.value().checked_pow((e - f) as u32).unwrap_or(u64::MAX);
        if count > 1 << 16 {
            return Err(Error::Budget(format!("{count} cosets at p = {p}")));
        }
        let step = prime_power(*p, -e);
        let c = ball.center.coord(k + 1);
        per_place.push(
            (0..count)
                .map(|j| c + &step * rat(j as i64, 1))
                .collect(),
        );
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; per_place.len()];
    loop {
        let real = per_place[0][idx[0]].clone();
        let padic = (1..per_place.len()).map(|k| per_place[k][idx[k]].clone()).collect();
        let center = crate::solenoid::Point::new(&ps, real, padic)?;
        out.push(Ball::closed(center, child_r.clone())?);
        // odometer, last place fastest
        let mut k = per_place.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < per_place[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Alice's cylinder at the end of a path, by replaying the whole path.
fn replay(spec: &AliceSpec, beta: &Rational, path: &[&Ball]) -> Result<Cylinder> {
    let mut alice = spec.build(beta)?;
    let mut last = None;
    for b in path {
        last = Some(alice.block(b)?);
    }
    last.ok_or_else(|| Error::Domain("empty path".into()))
}

fn planned_nodes(branching: u64, fanout: usize, depth: usize) -> u128 {
    let f = (fanout as u128).min(branching as u128);
    let mut total = 1u128;
    let mut expanded = 1u128;
    for _ in 0..depth {
        total += expanded * branching as u128;
        expanded *= f;
    }
    total
}

/// Breadth-first expansion to `depth`. Each expanded node gets its first
/// `branching` candidates disjoint from Alice's cylinder; the first `fanout`
/// of those are expanded further.
pub fn fstar_tree(
    spec: &AliceSpec,
    beta0: &Rational,
    root: &Ball,
    depth: usize,
    fanout: usize,
) -> Result<CantorTree> {
    let ps = root.primes();
    let mut branching = u64::MAX;
    for i in 0..ps.places() {
        branching = branching.min(nc_lower(beta0, ps, i)?);
    }
    let planned = planned_nodes(branching, fanout, depth);
    if planned > fixtures::FSTAR_MAX_NODES as u128 {
        return Err(Error::Budget(format!(
            "{planned} nodes exceed the budget of {}",
            fixtures::FSTAR_MAX_NODES
        )));
    }
    let mut nodes = vec![TreeNode {
        word: Vec::new(),
        ball: root.clone(),
        blocked: None,
        children: Vec::new(),
    }];
    let mut frontier = vec![0usize];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &id in &frontier {
            let path = ancestry(&nodes, id);
            let balls: Vec<&Ball> = path.iter().map(|&n| &nodes[n].ball).collect();
            let cyl = replay(spec, beta0, &balls)?;
            let mut kids = Vec::new();
            for cand in candidates(&nodes[id].ball, beta0)? {
                if kids.len() as u64 == branching {
                    break;
                }
                if cand.disjoint_from_cylinder(&cyl)? {
                    kids.push(cand);
                }
            }
            if (kids.len() as u64) < branching {
                return Err(Error::InvariantViolation(format!(
                    "only {} admissible children, expected {branching}",
                    kids.len()
                )));
            }
            let word = nodes[id].word.clone();
            for (l, ball) in kids.into_iter().enumerate() {
                let mut w = word.clone();
                w.push(l as u32);
                let child = nodes.len();
                nodes.push(TreeNode {
                    word: w,
                    ball,
                    blocked: None,
                    children: Vec::new(),
                });
                nodes[id].children.push(child);
                if l < fanout {
                    next.push(child);
                }
            }
            nodes[id].blocked = Some(cyl);
        }
        frontier = next;
    }
    Ok(CantorTree {
        beta0: beta0.clone(),
        branching,
        depth,
        fanout,
        alice: spec.clone(),
        nodes,
    })
}

/// Node ids from the root down to `id`.
fn ancestry(nodes: &[TreeNode], id: usize) -> Vec<usize> {
    let word = &nodes[id].word;
    let mut out = vec![0usize];
    let mut cur = 0usize;
    for &l in word {
        cur = nodes[cur].children[l as usize];
        out.push(cur);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeAudit {
    pub nodes: usize,
    pub pairs_checked: u64,
    pub separation_failures: Vec<String>,
    pub containment_failures: Vec<String>,
    pub cylinder_failures: Vec<String>,
    pub psi_injective: bool,
    /// `s = 0.9 · hausdorff_lower(β0)`.
    pub s: Decimal,
    /// `ln c2`, with `c2 = (2 r0)^{-s}` so the root is tight.
    pub ln_c2: Decimal,
    pub mass_failures: Vec<String>,
}

impl TreeAudit {
    pub fn passed(&self) -> bool {
        self.separation_failures.is_empty()
            && self.containment_failures.is_empty()
            && self.cylinder_failures.is_empty()
            && self.psi_injective
            && self.mass_failures.is_empty()
    }
}

fn common_prefix(a: &[u32], b: &[u32]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Checks every structural claim of the tree:
/// two nodes of equal depth whose words first differ at level k are at least
/// `β0^{k+1} r0` apart, children sit inside their parent and miss Alice's
/// cylinder, Alice's cylinders are legal, ψ separates the leaves, and the
/// uniform mass `N^{-k}` is at most `c2 (diam)^s` at every node.
pub fn audit_tree(tree: &CantorTree) -> Result<TreeAudit> {
    let beta = &tree.beta0;
    let r0 = tree.root().ball.radius.clone();
    let mut audit = TreeAudit {
        nodes: tree.nodes.len(),
        pairs_checked: 0,
        separation_failures: Vec::new(),
        containment_failures: Vec::new(),
        cylinder_failures: Vec::new(),
        psi_injective: true,
        s: Decimal::zero(),
        ln_c2: Decimal::zero(),
        mass_failures: Vec::new(),
    };

    for node in &tree.nodes {
        if let Some(c) = &node.blocked {
            let v = legal_alice(&node.ball, c, beta);
            if !v.ok {
                audit
                    .cylinder_failures
                    .push(format!("{:?}: illegal cylinder {}", node.word, v.evidence.join("; ")));
            }
        }
        for &k in &node.children {
            let child = &tree.nodes[k];
            if !node.ball.contains_ball(&child.ball)? {
                audit
                    .containment_failures
                    .push(format!("{:?} not inside its parent", child.word));
            }
            if let Some(c) = &node.blocked {
                if !child.ball.disjoint_from_cylinder(c)? {
                    audit
                        .cylinder_failures
                        .push(format!("{:?} meets the blocked cylinder", child.word));
                }
            }
        }
    }

    let mut by_depth: Vec<Vec<&TreeNode>> = vec![Vec::new(); tree.depth + 1];
    for n in &tree.nodes {
        by_depth[n.word.len()].push(n);
    }
    let bounds: Vec<Rational> = (0..=tree.depth)
        .map(|k| pow(beta, k as i64 + 1) * &r0)
        .collect();
    for level in &by_depth {
        let fast = LevelGaps::new(level, &bounds)?;
        for (a, u) in level.iter().enumerate() {
            for (b, v) in level.iter().enumerate().skip(a + 1) {
                audit.pairs_checked += 1;
                let k = common_prefix(&u.word, &v.word);
                if fast.as_ref().is_some_and(|f| f.separated(a, b, k)) {
                    continue;
                }
                let gap = u.ball.gap(&v.ball)?;
                if gap < bounds[k] {
                    audit.separation_failures.push(format!(
                        "{:?} and {:?}: gap {gap} below {}",
                        u.word, v.word, bounds[k]
                    ));
                }
            }
        }
    }

    let mut seen = HashSet::new();
    for leaf in tree.leaves() {
        if !seen.insert(psi_word(&leaf.word, tree.branching)) {
            audit.psi_injective = false;
        }
    }

    let dim = hausdorff_lower(beta, tree.root().ball.primes())?;
    let s = dim.mul_rational(&rat(
        fixtures::MASS_EXPONENT_FRACTION.0,
        fixtures::MASS_EXPONENT_FRACTION.1,
    ));
    let two = rat(2, 1);
    let ln_c2 = -(&s * &Decimal::ln(&(&two * &r0)));
    let ln_n = Decimal::ln_int(tree.branching);
    for n in &tree.nodes {
        let k = n.word.len() as i64;
        let ln_mu = -ln_n.mul_rational(&rat(k, 1));
        let diam = &two * &n.ball.radius;
        let rhs = &ln_c2 + &(&s * &Decimal::ln(&diam));
        if ln_mu > rhs {
            audit.mass_failures.push(format!(
                "{:?}: ln mu {ln_mu} exceeds {rhs}",
                n.word
            ));
        }
    }
    audit.s = s;
    audit.ln_c2 = ln_c2;
    Ok(audit)
}

/// Integer form of one tree level: every ball has the same radius, so after
/// scaling by a common denominator the pairwise gaps need only i128 math.
struct LevelGaps {
    /// Real centers times `scale`, with `2r·scale` and the bounds likewise.
    real: Vec<i128>,
    two_r: i128,
    real_need: Vec<i128>,
    /// Per prime: (p, scaled coordinates, v_p(scale), radius exponent,
    /// smallest exponent g with p^g >= bound).
    padic: Vec<(u64, Vec<i128>, i64, i64, Vec<i64>)>,
}

fn scaled(values: &[Rational]) -> Option<(BigInt, Vec<i128>)> {
    use num_integer::Integer;
    let l = values
        .iter()
        .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
    let ints = values
        .iter()
        .map(|q| (q.numer() * (&l / q.denom())).to_i128())
        .collect::<Option<Vec<_>>>()?;
    Some((l, ints))
}

fn val_i128(mut n: i128, p: u64) -> i64 {
    let p = p as i128;
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

impl LevelGaps {
    fn new(level: &[&TreeNode], bounds: &[Rational]) -> Result<Option<Self>> {
        let Some(first) = level.first() else {
            return Ok(None);
        };
        let r = first.ball.radius.clone();
        if level.iter().any(|n| n.ball.radius != r) {
            return Ok(None);
        }
        let ps = first.ball.primes().clone();
        let mut vals: Vec<Rational> = level.iter().map(|n| n.ball.center.real().clone()).collect();
        vals.push(rat(2, 1) * &r);
        vals.extend(bounds.iter().cloned());
        let Some((_, ints)) = scaled(&vals) else {
            return Ok(None);
        };
        let n = level.len();
        let mut padic = Vec::new();
        for (k, p) in ps.primes().iter().enumerate() {
            let coords: Vec<Rational> = level.iter().map(|nd| nd.ball.center.coord(k + 1).clone()).collect();
            let Some((l, c)) = scaled(&coords) else {
                return Ok(None);
            };
            let t = crate::arith::valuation(&Rational::from_integer(l), *p).unwrap_or(0);
            let rho = power_exponent_below(&(&r * p.as_rational()), *p, false);
            let need = bounds
                .iter()
                .map(|b| power_exponent_below(b, *p, true) + 1)
                .collect();
            padic.push((p.value(), c, t, rho, need));
        }
        Ok(Some(LevelGaps {
            real: ints[..n].to_vec(),
            two_r: ints[n],
            real_need: ints[n + 1..].to_vec(),
            padic,
        }))
    }

    fn separated(&self, a: usize, b: usize, k: usize) -> bool {
        let d = (self.real[a] - self.real[b]).abs();
        if d - self.two_r >= self.real_need[k] {
            return true;
        }
        self.padic.iter().any(|(p, c, t, rho, need)| {
            let diff = c[a] - c[b];
            if diff == 0 {
                return false;
            }
            // |Δ|_p = p^{t - v}, disjoint above the radius, gap |Δ|_p / p
            let e = t - val_i128(diff, *p);
            e > *rho && e - 1 >= need[k]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::AffineEndo;
    use crate::solenoid::{Point, PrimeSet};

    fn setup() -> (AliceSpec, Ball) {
        let ps = PrimeSet::from_u64(&[2, 3]).unwrap();
        let map = AffineEndo::linear_map(&ps, rat(3, 2)).unwrap();
        let spec = AliceSpec::Avoidance {
            map,
            targets: vec![Point::zero(&ps)],
        };
        let root = Ball::closed(Point::real_only(&ps, rat(1, 8)), rat(1, 4)).unwrap();
        (spec, root)
    }

    #[test]
    fn psi_positional() {
        assert_eq!(psi_word(&[1, 2], 10), rat(12, 100));
        assert_eq!(psi_word(&[], 10), rat(0, 1));
    }

    #[test]
    fn depth_one() {
        let (spec, root) = setup();
        let t = fstar_tree(&spec, &rat(1, 12), &root, 1, 1).unwrap();
        assert_eq!(t.branching, 432);
        assert_eq!(t.root().children.len(), 432);
        let a = audit_tree(&t).unwrap();
        assert!(a.passed(), "{a:?}");
    }

    #[test]
    fn fast_gaps_agree_with_exact() {
        let (spec, root) = setup();
        let t = fstar_tree(&spec, &rat(1, 6), &root, 2, 2).unwrap();
        let r0 = root.radius.clone();
        let bounds: Vec<Rational> = (0..=2).map(|k| pow(&rat(1, 6), k + 1) * &r0).collect();
        for depth in 1..=2 {
            let level: Vec<&TreeNode> = t.nodes.iter().filter(|n| n.word.len() == depth).collect();
            let fast = LevelGaps::new(&level, &bounds).unwrap().unwrap();
            for a in 0..level.len() {
                for b in a + 1..level.len() {
                    let k = common_prefix(&level[a].word, &level[b].word);
                    // compare against a bound the exact gap sits at or above
                    let exact = level[a].ball.gap(&level[b].ball).unwrap() >= bounds[k];
                    assert_eq!(fast.separated(a, b, k), exact);
                }
            }
        }
    }

    #[test]
    fn audit_catches_overlap() {
        let (spec, root) = setup();
        let mut t = fstar_tree(&spec, &rat(1, 12), &root, 1, 1).unwrap();
        let moved = t.nodes[2].ball.center.clone();
        t.nodes[1].ball = Ball::closed(moved, t.nodes[1].ball.radius.clone()).unwrap();
        let a = audit_tree(&t).unwrap();
        assert!(!a.separation_failures.is_empty());
        let mut t = fstar_tree(&spec, &rat(1, 12), &root, 1, 1).unwrap();
        t.nodes[3].ball = t.nodes[3].ball.shrink(&rat(100, 1));
        assert!(!audit_tree(&t).unwrap().containment_failures.is_empty());
    }

    #[test]
    fn budget() {
        let (spec, root) = setup();
        assert!(matches!(
            fstar_tree(&spec, &rat(1, 12), &root, 3, 432),
            Err(Error::Budget(_))
        ));
    }
}
