//! `analyze`: counting tables as CSV.

use std::path::PathBuf;

use caw_core::analysis::{
    dimension_sweep, haar_ball_bound, nc_bruteforce, nc_lower, pp_decay_check, prod_bound_check,
    truncation_sweep, PrimeFamily,
};
use caw_core::arith::{fmt_rational, parse_rational, Rational};
use caw_core::solenoid::PrimeSet;
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::{write_atomic, CliError};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Sweep {
    /// θ_P(x), P_P(x) and the product bound at each x.
    Pp,
    /// Dimension lower bound at each β.
    Dim,
    /// Constructive and brute-force packing counts at each β and place.
    Nc,
    /// Dimension bound at fixed β for the first m primes.
    Trunc,
    /// The decay check of P_P(1/r) at each r.
    Decay,
    /// The Haar ball bound 2r·P_P(1/r) at each r.
    Haar,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_enum)]
    sweep: Sweep,
    /// Prime set; omitted means all primes (pp, decay, haar).
    #[arg(long, value_delimiter = ',')]
    primes: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    x: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    betas: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    radii: Vec<String>,
    /// Fixed β of the truncation sweep.
    #[arg(long, default_value = "1/210")]
    beta: String,
    /// Largest truncation of the truncation sweep.
    #[arg(long, default_value_t = 6)]
    max: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct PpRow {
    x: String,
    product: String,
    theta: String,
    neg_ln_product: String,
    margin: String,
    floor: String,
    intermediate: String,
    dominates: bool,
    ok: bool,
}

#[derive(Serialize)]
struct DimRow {
    beta: String,
    primes: String,
    counts: String,
    branching: u64,
    dim_lower: String,
}

#[derive(Serialize)]
struct NcRow {
    beta: String,
    primes: String,
    index: usize,
    nc_lower: u64,
    nc_bruteforce: Option<u64>,
}

#[derive(Serialize)]
struct DecayRow {
    r: String,
    neg_ln_product: String,
    required: String,
    ok: bool,
}

#[derive(Serialize)]
struct HaarRow {
    r: String,
    bound: String,
}

fn rationals(field: &str, v: &[String]) -> Result<Vec<Rational>, CliError> {
    v.iter()
        .map(|s| parse_rational(s).map_err(|e| CliError::Usage(format!("{field}: {e}"))))
        .collect()
}

fn primes_label(ps: &PrimeSet) -> String {
    ps.to_u64()
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

fn csv_text<T: Serialize>(rows: &[T], header: &[&str]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Usage(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let finite = match &args.primes {
        Some(v) => Some(PrimeSet::from_u64(v)?),
        None => None,
    };
    let family = match &finite {
        Some(ps) => PrimeFamily::Finite(ps.clone()),
        None => PrimeFamily::All,
    };
    let need_finite = || {
        finite
            .clone()
            .ok_or_else(|| CliError::Usage("--primes is required for this sweep".into()))
    };
    let mut all_ok = true;
    let text = match args.sweep {
        Sweep::Pp => {
            let mut rows = Vec::new();
            for x in rationals("x", &args.x)? {
                let b = prod_bound_check(&x, &family)?;
                all_ok &= b.ok;
                rows.push(PpRow {
                    x: fmt_rational(&b.x),
                    product: fmt_rational(&b.product),
                    theta: b.theta.to_string(),
                    neg_ln_product: b.neg_ln_product.to_string(),
                    margin: b.margin.to_string(),
                    floor: b.floor.to_string(),
                    intermediate: b.intermediate.to_string(),
                    dominates: b.dominates,
                    ok: b.ok,
                });
            }
            csv_text(
                &rows,
                &["x", "product", "theta", "neg_ln_product", "margin", "floor", "intermediate", "dominates", "ok"],
            )?
        }
        Sweep::Dim => {
            let ps = need_finite()?;
            let rows: Vec<DimRow> = dimension_sweep(&rationals("betas", &args.betas)?, &ps)?
                .into_iter()
                .map(|r| DimRow {
                    beta: fmt_rational(&r.beta),
                    primes: primes_label(&r.primes),
                    counts: r.counts.iter().map(u64::to_string).collect::<Vec<_>>().join(" "),
                    branching: r.branching,
                    dim_lower: r.dim_lower.to_string(),
                })
                .collect();
            csv_text(&rows, &["beta", "primes", "counts", "branching", "dim_lower"])?
        }
        Sweep::Nc => {
            let ps = need_finite()?;
            let mut rows = Vec::new();
            for beta in rationals("betas", &args.betas)? {
                for i in 0..ps.places() {
                    let lower = nc_lower(&beta, &ps, i)?;
                    let brute = nc_bruteforce(&beta, &ps, i).ok();
                    if let Some(b) = brute {
                        all_ok &= b >= lower;
                    }
                    rows.push(NcRow {
                        beta: fmt_rational(&beta),
                        primes: primes_label(&ps),
                        index: i,
                        nc_lower: lower,
                        nc_bruteforce: brute,
                    });
                }
            }
            csv_text(&rows, &["beta", "primes", "index", "nc_lower", "nc_bruteforce"])?
        }
        Sweep::Trunc => {
            let beta = parse_rational(&args.beta)?;
            let rows: Vec<DimRow> = truncation_sweep(&beta, args.max)?
                .into_iter()
                .map(|r| DimRow {
                    beta: fmt_rational(&r.beta),
                    primes: primes_label(&r.primes),
                    counts: r.counts.iter().map(u64::to_string).collect::<Vec<_>>().join(" "),
                    branching: r.branching,
                    dim_lower: r.dim_lower.to_string(),
                })
                .collect();
            csv_text(&rows, &["beta", "primes", "counts", "branching", "dim_lower"])?
        }
        Sweep::Decay => {
            let mut rows = Vec::new();
            for r in rationals("radii", &args.radii)? {
                let d = pp_decay_check(&r, &family)?;
                all_ok &= d.ok;
                rows.push(DecayRow {
                    r: fmt_rational(&d.r),
                    neg_ln_product: d.neg_ln_product.to_string(),
                    required: d.required.to_string(),
                    ok: d.ok,
                });
            }
            csv_text(&rows, &["r", "neg_ln_product", "required", "ok"])?
        }
        Sweep::Haar => {
            let mut rows = Vec::new();
            for r in rationals("radii", &args.radii)? {
                rows.push(HaarRow {
                    r: fmt_rational(&r),
                    bound: fmt_rational(&haar_ball_bound(&r, &family)?),
                });
            }
            csv_text(&rows, &["r", "bound"])?
        }
    };
    match &args.out {
        Some(p) => write_atomic(p, &text)?,
        None => print!("{text}"),
    }
    if all_ok {
        Ok(())
    } else {
        Err(CliError::Failed("a bound check failed".into()))
    }
}
