mod analyze;
mod run;
mod spec;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::spec::{BobKind, Command, RunSpec};

/// Exit codes: 0 all audits pass, 1 an audit failed, 2 bad input.
pub enum CliError {
    Usage(String),
    Failed(String),
}

impl From<caw_core::Error> for CliError {
    fn from(e: caw_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("io: {e}"))
    }
}

#[derive(Parser)]
#[command(name = "caw", version, about = "Cylinder absolute games on solenoids")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Play seeded games and audit every transcript.
    Simulate(GameArgs),
    /// Counting tables and dimension sweeps as CSV.
    Analyze(analyze::AnalyzeArgs),
    /// Build and audit the Cantor scheme of sub-balls.
    Fstar(GameArgs),
    /// Run the seeded property suite.
    Verify(VerifyArgs),
    /// Re-run a saved run file and compare it bit for bit.
    Replay {
        file: PathBuf,
    },
}

#[derive(Args, Default)]
struct GameArgs {
    /// JSON file with a RunSpec; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    primes: Option<Vec<u64>>,
    /// Linear part m/n of the avoided map.
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    translation: Option<String>,
    /// Target point, "q" for the diagonal or "x0;x1,...". Repeatable.
    #[arg(long = "target")]
    targets: Vec<String>,
    #[arg(long)]
    psi: Option<String>,
    #[arg(long)]
    shift: Option<String>,
    #[arg(long, value_enum)]
    bob: Option<BobKind>,
    #[arg(long)]
    chase: Option<String>,
    #[arg(long, alias = "beta0")]
    beta: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    initial: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    fanout: Option<usize>,
    /// Output directory (simulate) or file (fstar).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl GameArgs {
    fn into_spec(self, command: Command) -> Result<RunSpec, CliError> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                serde_json::from_str::<RunSpec>(&text)
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?
            }
            None => RunSpec::default(),
        };
        spec.command = command;
        if let Some(v) = self.primes {
            spec.primes = v;
        }
        if self.map.is_some() {
            spec.map = self.map;
        }
        if self.translation.is_some() {
            spec.translation = self.translation;
        }
        if !self.targets.is_empty() {
            spec.targets = self.targets;
        }
        if self.psi.is_some() {
            spec.psi = self.psi;
        }
        if self.shift.is_some() {
            spec.shift = self.shift;
        }
        if let Some(b) = self.bob {
            spec.bob = b;
        }
        if self.chase.is_some() {
            spec.chase = self.chase;
        }
        if self.beta.is_some() {
            spec.beta = self.beta;
        }
        if self.alpha.is_some() {
            spec.alpha = self.alpha;
        }
        if self.gamma.is_some() {
            spec.gamma = self.gamma;
        }
        if self.initial.is_some() {
            spec.initial = self.initial;
        }
        if let Some(r) = self.radius {
            spec.radius = r;
        }
        if let Some(d) = self.depth {
            spec.depth = d;
        }
        if let Some(r) = self.runs {
            spec.runs = r;
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(f) = self.fanout {
            spec.fanout = f;
        }
        if self.out.is_some() {
            spec.output = self.out;
        }
        Ok(spec)
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    cases: usize,
    /// Only properties whose name contains this string.
    #[arg(long)]
    filter: Option<String>,
    /// Also play a game where Alice oversteps by 10^-6; the audit must fail.
    #[arg(long)]
    inject_fault: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Writes through a temporary file so readers never see a partial artifact.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_atomic(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn verify(args: VerifyArgs) -> Result<(), CliError> {
    use caw_core::verify::{fault_injection, run_suite, VerifyConfig};
    let cfg = VerifyConfig {
        seed: args.seed,
        cases: args.cases,
        filter: args.filter,
    };
    let mut results = run_suite(&cfg)?;
    let fault = if args.inject_fault {
        let f = fault_injection(args.seed)?;
        results.push(caw_core::verify::PropertyResult {
            name: "transcript_audit_injected".into(),
            cases: 1,
            failures: if f.detected {
                vec![format!("audit rejected the tampered run ({} discrepancies)", f.discrepancies)]
            } else {
                Vec::new()
            },
        });
        Some(f)
    } else {
        None
    };
    let passed = results.iter().all(|r| r.passed());
    for r in &results {
        eprintln!(
            "{} {} ({} cases)",
            if r.passed() { "pass" } else { "FAIL" },
            r.name,
            r.cases
        );
    }
    let report = serde_json::json!({
        "seed": cfg.seed,
        "cases": cfg.cases,
        "filter": cfg.filter,
        "properties": results,
        "fault_injection": fault,
        "passed": passed,
    });
    emit(args.out.as_deref(), &(serde_json::to_string_pretty(&report).unwrap() + "\n"))?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Failed("property failures".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Sub::Simulate(a) => a.into_spec(Command::Simulate).and_then(|s| run::simulate(&s)),
        Sub::Fstar(a) => a.into_spec(Command::Fstar).and_then(|s| run::fstar(&s)),
        Sub::Analyze(a) => analyze::analyze(a),
        Sub::Verify(a) => verify(a),
        Sub::Replay { file } => run::replay(&file),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Failed(msg)) => {
            eprintln!("audit failed: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
