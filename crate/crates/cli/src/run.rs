//! `simulate`, `fstar` and `replay`.

use std::fs;
use std::path::{Path, PathBuf};

use caw_core::analysis::{audit_tree, fstar_tree};
use caw_core::arith::{fmt_rational, rat};
use caw_core::audit::{full_audit, FullAudit};
use caw_core::game::{run_game, run_strong_game, GameConfig, GameTranscript, Outcome};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spec::{Players, RunSpec};
use crate::{write_atomic, CliError};

/// One saved run: enough to replay it exactly.
#[derive(Serialize, Deserialize)]
pub struct RunFile {
    pub spec: RunSpec,
    pub transcript: GameTranscript,
    pub audit: FullAudit,
}

#[derive(Serialize)]
struct RunSummary {
    index: usize,
    seed: u64,
    outcome: Outcome,
    rounds: usize,
    faults: usize,
    audit_passed: bool,
    discrepancies: usize,
    windows_checked: usize,
    window_failures: usize,
    certificate_ok: bool,
    j_max: Option<u32>,
    /// Smallest orbit-to-target lattice distance found by the certificate.
    min_distance: Option<String>,
}

fn summarize(index: usize, t: &GameTranscript, a: &FullAudit) -> RunSummary {
    let min = a
        .avoidance
        .iter()
        .filter_map(|x| x.certificate.min_distance.clone())
        .min();
    RunSummary {
        index,
        seed: t.config.seed,
        outcome: t.outcome,
        rounds: t.rounds.len(),
        faults: t.faults.len(),
        audit_passed: a.passed(),
        discrepancies: a.transcript.discrepancies.len(),
        windows_checked: a.avoidance.iter().map(|x| x.windows.checked).sum(),
        window_failures: a.avoidance.iter().map(|x| x.windows.failures.len()).sum(),
        certificate_ok: a.avoidance.iter().all(|x| x.certificate.ok),
        j_max: a.avoidance.iter().filter_map(|x| x.certificate.j_max).max(),
        min_distance: min.map(|m| fmt_rational(&m)),
    }
}

/// Plays the single game described by `spec` (its `seed`, ignoring `runs`).
pub fn play(spec: &RunSpec) -> Result<GameTranscript, CliError> {
    let initial = spec.initial_ball()?;
    let t = match spec.players()? {
        Players::Cylinder { alice, bob, beta } => {
            let cfg = GameConfig::cylinder(beta.clone(), spec.depth, spec.seed);
            let mut a = alice.build(&beta)?;
            let mut b = bob.build();
            run_game(a.as_mut(), b.as_mut(), &cfg, &initial)?
        }
        Players::Strong {
            alice,
            bob,
            alpha,
            gamma,
        } => {
            let cfg = GameConfig::strong(alpha.clone(), gamma.clone(), spec.depth, spec.seed);
            let mut a = alice.build(&alpha, &gamma)?;
            let mut b = bob.build();
            run_strong_game(a.as_mut(), b.as_mut(), &cfg, &initial)?
        }
    };
    Ok(t)
}

pub fn simulate(spec: &RunSpec) -> Result<(), CliError> {
    // validate everything before the first game starts
    spec.players()?;
    spec.initial_ball()?;
    let out = spec.output.clone().unwrap_or_else(|| PathBuf::from("caw-out"));
    fs::create_dir_all(&out)?;
    let results: Vec<Result<RunSummary, CliError>> = (0..spec.runs)
        .into_par_iter()
        .map(|k| {
            let mut one = spec.clone();
            one.runs = 1;
            one.seed = spec.seed.wrapping_add(k as u64);
            one.output = None;
            let t = play(&one)?;
            let audit = full_audit(&t);
            let summary = summarize(k, &t, &audit);
            let file = RunFile {
                spec: one,
                transcript: t,
                audit,
            };
            let text = serde_json::to_string_pretty(&file).expect("run file serializes");
            write_atomic(&out.join(format!("run-{k:04}.json")), &(text + "\n"))?;
            Ok(summary)
        })
        .collect();
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let failed: Vec<usize> = runs.iter().filter(|r| !r.audit_passed).map(|r| r.index).collect();
    let defaults = runs.iter().filter(|r| r.outcome == Outcome::BobDefaultWin).count();
    let faults: usize = runs.iter().map(|r| r.faults).sum();
    let summary = serde_json::json!({
        "spec": spec,
        "runs": runs,
        "bob_default_wins": defaults,
        "strategy_faults": faults,
        "failed_runs": failed,
        "all_passed": failed.is_empty(),
    });
    write_atomic(
        &out.join("summary.json"),
        &(serde_json::to_string_pretty(&summary).unwrap() + "\n"),
    )?;
    for r in &runs {
        println!(
            "run {:>4} seed {:>6} {:?} rounds {} faults {} windows {} certificate {} audit {}",
            r.index,
            r.seed,
            r.outcome,
            r.rounds,
            r.faults,
            r.windows_checked,
            if r.certificate_ok { "ok" } else { "FAIL" },
            if r.audit_passed { "pass" } else { "FAIL" }
        );
    }
    println!(
        "{} runs, {} audit failures, {} bob default wins, {} strategy faults; written to {}",
        runs.len(),
        failed.len(),
        defaults,
        faults,
        out.display()
    );
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("runs {failed:?}")))
    }
}

pub fn replay(path: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(path)?;
    let saved: RunFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let again = play(&saved.spec)?;
    let audit = full_audit(&again);
    let same_transcript = again == saved.transcript;
    let same_audit = audit == saved.audit;
    let evidence_same = again
        .rounds
        .iter()
        .zip(&saved.transcript.rounds)
        .all(|(a, b)| a.alice_evidence == b.alice_evidence && a.bob_evidence == b.bob_evidence);
    println!(
        "replay {}: transcript {}, evidence {}, audit {} ({})",
        path.display(),
        if same_transcript { "identical" } else { "DIFFERS" },
        if evidence_same { "identical" } else { "DIFFERS" },
        if same_audit { "identical" } else { "DIFFERS" },
        if audit.passed() { "pass" } else { "FAIL" }
    );
    if same_transcript && same_audit && evidence_same && audit.passed() {
        Ok(())
    } else {
        Err(CliError::Failed("replay mismatch or audit failure".into()))
    }
}

pub fn fstar(spec: &RunSpec) -> Result<(), CliError> {
    let alice = spec.alice_spec()?;
    let beta = spec
        .beta
        .as_deref()
        .map(caw_core::arith::parse_rational)
        .transpose()?
        .unwrap_or_else(|| rat(1, 12));
    let root = spec.initial_ball()?;
    let tree = fstar_tree(&alice, &beta, &root, spec.depth, spec.fanout)?;
    let audit = audit_tree(&tree)?;
    if let Some(out) = &spec.output {
        let dump = serde_json::json!({ "spec": spec, "tree": tree, "audit": audit });
        write_atomic(out, &(serde_json::to_string_pretty(&dump).unwrap() + "\n"))?;
    }
    println!(
        "fstar beta0 {} depth {} branching {} nodes {} pairs {}: separation {} containment {} cylinders {} psi {} mass {} (s = {})",
        fmt_rational(&beta),
        tree.depth,
        tree.branching,
        audit.nodes,
        audit.pairs_checked,
        audit.separation_failures.len(),
        audit.containment_failures.len(),
        audit.cylinder_failures.len(),
        if audit.psi_injective { "injective" } else { "COLLIDES" },
        audit.mass_failures.len(),
        audit.s
    );
    if audit.passed() {
        Ok(())
    } else {
        Err(CliError::Failed("tree audit".into()))
    }
}
