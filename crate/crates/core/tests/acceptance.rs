//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use caw_core::affine::AffineEndo;
use caw_core::analysis::*;
use caw_core::arith::{fmt_rational, rat, Rational};
use caw_core::audit::full_audit;
use caw_core::game::*;
use caw_core::solenoid::{lattice_distance_scaled, Ball, Point, PrimeSet};
use caw_core::strategies::*;
use caw_core::verify::{fault_injection, run_suite, VerifyConfig};
use rayon::prelude::*;

struct Verdict {
    ok: bool,
    detail: String,
}

fn p23() -> PrimeSet {
    PrimeSet::from_u64(&[2, 3]).unwrap()
}

fn start() -> Ball {
    Ball::closed(Point::real_only(&p23(), rat(1, 8)), rat(1, 4)).unwrap()
}

fn avoid(q: Rational) -> AliceSpec {
    AliceSpec::Avoidance {
        map: AffineEndo::linear_map(&p23(), q).unwrap(),
        targets: vec![Point::zero(&p23())],
    }
}

fn within(t: Duration, limit: u64) -> bool {
    t < Duration::from_secs(limit)
}

fn avoidance_records(r: &StrategyReport, out: &mut Vec<AvoidanceRecord>) {
    if let Some(a) = &r.avoidance {
        out.push(a.clone());
    }
    for c in &r.children {
        avoidance_records(c, out);
    }
}

/// Runs of the first criterion, shared with the second.
fn avoidance_runs() -> Vec<GameTranscript> {
    let beta = rat(3, 10);
    let spec = avoid(rat(3, 2));
    (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut a = spec.build(&beta).unwrap();
            let mut b = BobSpec::Random.build();
            let cfg = GameConfig::cylinder(beta.clone(), 25, seed);
            run_game(a.as_mut(), b.as_mut(), &cfg, &start()).unwrap()
        })
        .collect()
}

fn criterion_1(runs: &[GameTranscript], elapsed: Duration) -> Verdict {
    let defaults = runs.iter().filter(|t| t.outcome == Outcome::BobDefaultWin).count();
    let faults: usize = runs.iter().map(|t| t.faults.len()).sum();
    let mut windows = 0;
    let mut failed = 0;
    for t in runs {
        let a = full_audit(t);
        windows += a.avoidance.iter().map(|x| x.windows.checked).sum::<usize>();
        if !a.passed() || a.avoidance.iter().any(|x| !x.windows.failures.is_empty()) {
            failed += 1;
        }
    }
    let completed = runs.iter().all(|t| t.outcome == Outcome::Completed);
    Verdict {
        ok: defaults == 0 && faults == 0 && failed == 0 && completed && within(elapsed, 60),
        detail: format!(
            "{} runs, {defaults} default wins, {faults} faults, {failed} failed audits, {windows} windows checked, {:.1}s",
            runs.len(),
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_2(runs: &[GameTranscript]) -> Verdict {
    let mut bad = Vec::new();
    let mut smallest: Option<Rational> = None;
    let mut checked = 0;
    for t in runs {
        let audit = full_audit(t);
        let mut recs = Vec::new();
        avoidance_records(&t.alice_report, &mut recs);
        let (Some(rec), Some(a)) = (recs.first(), audit.avoidance.first()) else {
            bad.push(format!("seed {}: no avoidance record", t.config.seed));
            continue;
        };
        let (Some(params), Some(k)) = (&rec.params, a.windows.last_checked) else {
            bad.push(format!("seed {}: no audited window", t.config.seed));
            continue;
        };
        let x = &t.balls().last().unwrap().center;
        let half = &params.delta / rat(2, 1);
        for j in params.exponents_through(k) {
            let w = rec.map.apply_iter(j, x).unwrap().sub(&rec.target).unwrap();
            let d = lattice_distance_scaled(&w, &params.a_scale, &params.delta).unwrap();
            checked += 1;
            if !d.at_least(&half) {
                bad.push(format!("seed {} j {j}", t.config.seed));
            }
            if let Some(v) = d.distance() {
                if smallest.as_ref().map_or(true, |s| v < s) {
                    smallest = Some(v.clone());
                }
            }
        }
    }
    Verdict {
        ok: bad.is_empty(),
        detail: format!(
            "{checked} orbit points checked, min distance {}, failures {:?}",
            smallest.map_or("none below delta".into(), |s| fmt_rational(&s)),
            bad
        ),
    }
}

fn criterion_3() -> Verdict {
    let t0 = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;

    let beta = rat(3, 10);
    let both = AliceSpec::Intersection {
        parts: vec![avoid(rat(3, 2)), avoid(rat(6, 1))],
    };
    let mut a = both.build(&beta).unwrap();
    let t = run_game(
        a.as_mut(),
        &mut RandomBob,
        &GameConfig::cylinder(beta, 40, 1),
        &start(),
    )
    .unwrap();
    let audit = full_audit(&t);
    let windows: Vec<usize> = audit.avoidance.iter().map(|x| x.windows.checked).collect();
    let pass = t.outcome == Outcome::Completed
        && audit.passed()
        && audit.avoidance.len() == 2
        && windows.iter().all(|&w| w > 0);
    ok &= pass;
    notes.push(format!("intersection windows {windows:?} {}", if pass { "pass" } else { "FAIL" }));

    let (alpha, gamma) = (rat(1, 5), rat(1, 2));
    let strong = StrongAliceSpec::FromCylinder {
        inner: avoid(rat(3, 2)),
    };
    let mut a = strong.build(&alpha, &gamma).unwrap();
    let mut b = StrongBobSpec::Random.build();
    let t = run_strong_game(
        a.as_mut(),
        b.as_mut(),
        &GameConfig::strong(alpha, gamma, 20, 2),
        &start(),
    )
    .unwrap();
    let audit = full_audit(&t);
    let pass = t.outcome == Outcome::Completed
        && t.rounds.len() == 20
        && audit.passed()
        && !audit.avoidance.is_empty();
    ok &= pass;
    notes.push(format!("strong adapter {}", if pass { "pass" } else { "FAIL" }));

    let beta = rat(1, 4);
    let transfer = AliceSpec::AffineTransfer {
        inner: Box::new(avoid(rat(3, 2))),
        psi: AffineEndo::linear_map(&p23(), rat(2, 1)).unwrap(),
        region: None,
    };
    let mut a = transfer.build(&beta).unwrap();
    let t = run_game(
        a.as_mut(),
        &mut RandomBob,
        &GameConfig::cylinder(beta, 20, 3),
        &start(),
    )
    .unwrap();
    let audit = full_audit(&t);
    let mut issues = Vec::new();
    collect_issues(&t.alice_report, &mut issues);
    let pass = t.outcome == Outcome::Completed
        && t.rounds.len() == 20
        && audit.passed()
        && !audit.avoidance.is_empty()
        && issues.is_empty();
    ok &= pass;
    notes.push(format!("transfer by 2x {}", if pass { "pass" } else { "FAIL" }));

    let elapsed = t0.elapsed();
    Verdict {
        ok: ok && within(elapsed, 60),
        detail: format!("{}, {:.1}s", notes.join(", "), elapsed.as_secs_f64()),
    }
}

fn collect_issues(r: &StrategyReport, out: &mut Vec<String>) {
    out.extend(r.issues.iter().cloned());
    for c in &r.children {
        collect_issues(c, out);
    }
}

fn criterion_4() -> Verdict {
    let t0 = Instant::now();
    let all = PrimeFamily::All;
    let exact = pp_product(&rat(4, 1), &all).unwrap() == rat(1, 6)
        && pp_product(&rat(10, 1), &all).unwrap() == rat(1, 2520);
    let mut ok = exact;
    let mut margins = Vec::new();
    for x in [10, 100, 1000, 10_000] {
        let b = prod_bound_check(&rat(x, 1), &all).unwrap();
        ok &= b.ok && b.dominates;
        margins.push(format!("{x}: {:.3}", b.margin.to_f64()));
    }
    let elapsed = t0.elapsed();
    Verdict {
        ok: ok && within(elapsed, 5),
        detail: format!(
            "exact products {}, margins [{}], {:.1}s",
            if exact { "ok" } else { "WRONG" },
            margins.join(", "),
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_5() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();

    let mut cases = 0;
    let mut below = Vec::new();
    for primes in [vec![2u64], vec![3], vec![2, 3]] {
        let ps = PrimeSet::from_u64(&primes).unwrap();
        for d in 2..=24i64 {
            for n in 1..d {
                let beta = rat(n, d);
                if beta.denom() != &d.into() || beta < rat(1, 24) {
                    continue;
                }
                for i in 0..ps.places() {
                    let Ok(lower) = nc_lower(&beta, &ps, i) else {
                        continue;
                    };
                    let brute = nc_bruteforce(&beta, &ps, i).unwrap();
                    cases += 1;
                    if brute < lower {
                        below.push(format!("{primes:?} {} i{i}", fmt_rational(&beta)));
                    }
                }
            }
        }
    }
    ok &= below.is_empty();
    notes.push(format!("brute >= lower on {cases} cases (violations {below:?})"));

    let ps = p23();
    let sweep: Vec<f64> = [rat(1, 12), rat(1, 24), rat(1, 48)]
        .iter()
        .map(|b| hausdorff_lower(b, &ps).unwrap().to_f64())
        .collect();
    let at48 = sweep[2] > 2.5;
    let increasing = sweep.windows(2).all(|w| w[1] > w[0]) && sweep.iter().all(|&d| d < 3.0);
    ok &= at48 && increasing;
    notes.push(format!(
        "dim at 1/12, 1/24, 1/48 = {:.3}, {:.3}, {:.3} ({}, {})",
        sweep[0],
        sweep[1],
        sweep[2],
        if at48 { "1/48 above 2.5" } else { "1/48 NOT above 2.5" },
        if increasing { "increasing" } else { "NOT increasing" }
    ));

    let trunc: Vec<f64> = default_truncation()
        .unwrap()
        .iter()
        .map(|r| r.dim_lower.to_f64())
        .collect();
    let grows = trunc.windows(2).all(|w| w[1] > w[0]);
    ok &= grows;
    notes.push(format!(
        "truncation at 1/210: {} ({})",
        trunc.iter().map(|d| format!("{d:.2}")).collect::<Vec<_>>().join(" "),
        if grows { "strictly increasing" } else { "NOT increasing" }
    ));

    Verdict {
        ok,
        detail: notes.join("; "),
    }
}

fn criterion_6() -> Verdict {
    let t0 = Instant::now();
    let tree = fstar_tree(&avoid(rat(3, 2)), &rat(1, 12), &start(), 3, 2).unwrap();
    let audit = audit_tree(&tree).unwrap();
    let elapsed = t0.elapsed();
    Verdict {
        ok: audit.passed() && within(elapsed, 30),
        detail: format!(
            "branching {}, {} nodes, {} pairs, separation failures {}, containment {}, cylinder {}, psi {}, mass failures {} at s = {:.4}, {:.1}s",
            tree.branching,
            audit.nodes,
            audit.pairs_checked,
            audit.separation_failures.len(),
            audit.containment_failures.len(),
            audit.cylinder_failures.len(),
            if audit.psi_injective { "injective" } else { "NOT injective" },
            audit.mass_failures.len(),
            audit.s.to_f64(),
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_7() -> Verdict {
    let t0 = Instant::now();
    let cfg = VerifyConfig {
        seed: 0,
        cases: 1000,
        filter: None,
    };
    let results = run_suite(&cfg).unwrap();
    let fault = fault_injection(0).unwrap();
    let enough = results.iter().all(|r| r.cases >= 1000);
    let clean = results.iter().all(|r| r.passed());
    let summary: Vec<String> = results
        .iter()
        .map(|r| format!("{} {}/{}", r.name, r.cases - r.failures.len().min(r.cases), r.cases))
        .collect();
    Verdict {
        ok: enough && clean && fault.detected,
        detail: format!(
            "{}; injected fault {} ({} discrepancies), {:.1}s",
            summary.join(", "),
            if fault.detected { "detected" } else { "MISSED" },
            fault.discrepancies,
            t0.elapsed().as_secs_f64()
        ),
    }
}

fn main() -> ExitCode {
    let mut verdicts = Vec::new();

    let t0 = Instant::now();
    let runs = avoidance_runs();
    let elapsed = t0.elapsed();
    verdicts.push(("1 avoidance end-to-end", criterion_1(&runs, elapsed)));
    verdicts.push(("2 orbit certificate", criterion_2(&runs)));
    verdicts.push(("3 intersection and transfers", criterion_3()));
    verdicts.push(("4 counting exactness", criterion_4()));
    verdicts.push(("5 packing and dimension", criterion_5()));
    verdicts.push(("6 cantor scheme", criterion_6()));
    verdicts.push(("7 fuzz floor", criterion_7()));

    for (name, v) in &verdicts {
        println!("criterion {name}: {} ({})", if v.ok { "PASS" } else { "FAIL" }, v.detail);
    }
    if verdicts.iter().all(|(_, v)| v.ok) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
