//! The run description shared by `simulate`, `fstar` and `replay`.

use std::path::PathBuf;

use caw_core::affine::{beta_ceiling, AffineEndo};
use caw_core::arith::{fmt_rational, parse_rational, Rational};
use caw_core::solenoid::{Ball, Point, PrimeSet};
use caw_core::strategies::{AliceSpec, BobSpec, StrongAliceSpec, StrongBobSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    #[default]
    Simulate,
    Analyze,
    Fstar,
    Verify,
    Replay,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BobKind {
    #[default]
    Random,
    Escape,
    Stay,
    Chase,
}

/// Everything needed to reproduce a run. Rationals and points are strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSpec {
    pub command: Command,
    pub primes: Vec<u64>,
    /// Linear part m/n of the avoided map.
    pub map: Option<String>,
    /// Translation of the avoided map, `"x0;x1,..."`.
    pub translation: Option<String>,
    pub targets: Vec<String>,
    /// A full strategy description; overrides `map`/`targets`.
    pub alice: Option<AliceSpec>,
    /// Wrap Alice in a transfer through `x -> psi·x`.
    pub psi: Option<String>,
    /// Wrap Alice in a transfer through `x -> x + shift`.
    pub shift: Option<String>,
    pub bob: BobKind,
    /// Point Bob chases when `bob` is `chase`.
    pub chase: Option<String>,
    pub beta: Option<String>,
    /// Strong game parameters; `alpha` switches to the strong game.
    pub alpha: Option<String>,
    pub gamma: Option<String>,
    pub initial: Option<String>,
    pub radius: String,
    pub depth: usize,
    pub runs: usize,
    pub seed: u64,
    /// Children expanded per node in `fstar`.
    pub fanout: usize,
    pub output: Option<PathBuf>,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            command: Command::Simulate,
            primes: vec![2, 3],
            map: None,
            translation: None,
            targets: Vec::new(),
            alice: None,
            psi: None,
            shift: None,
            bob: BobKind::Random,
            chase: None,
            beta: None,
            alpha: None,
            gamma: None,
            initial: None,
            radius: "1/4".into(),
            depth: 25,
            runs: 1,
            seed: 0,
            fanout: 2,
            output: None,
        }
    }
}

pub enum Players {
    Cylinder {
        alice: AliceSpec,
        bob: BobSpec,
        beta: Rational,
    },
    Strong {
        alice: StrongAliceSpec,
        bob: StrongBobSpec,
        alpha: Rational,
        gamma: Rational,
    },
}

fn usage(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{field}: {msg}"))
}

fn rational(field: &str, s: &str) -> Result<Rational, CliError> {
    parse_rational(s).map_err(|e| usage(field, e))
}

impl RunSpec {
    pub fn prime_set(&self) -> Result<PrimeSet, CliError> {
        PrimeSet::from_u64(&self.primes).map_err(|e| usage("primes", e))
    }

    fn point(&self, field: &str, s: &str) -> Result<Point, CliError> {
        Point::parse(&self.prime_set()?, s).map_err(|e| usage(field, e))
    }

    pub fn initial_ball(&self) -> Result<Ball, CliError> {
        let ps = self.prime_set()?;
        let center = match &self.initial {
            Some(s) => self.point("initial", s)?,
            None => Point::real_only(&ps, Rational::new(1.into(), 8.into())),
        };
        let r = rational("radius", &self.radius)?;
        let half = Rational::new(1.into(), 2.into());
        if r <= Rational::from_integer(0.into()) || r >= half {
            return Err(usage("radius", "must lie in (0, 1/2)"));
        }
        Ball::closed(center, r).map_err(|e| usage("initial", e))
    }

    /// The strategy Alice runs, transfers applied.
    pub fn alice_spec(&self) -> Result<AliceSpec, CliError> {
        let ps = self.prime_set()?;
        let mut spec = match (&self.alice, &self.map) {
            (Some(a), _) => a.clone(),
            (None, Some(m)) => {
                let linear = rational("map", m)?;
                let shift = match &self.translation {
                    Some(t) => self.point("translation", t)?,
                    None => Point::zero(&ps),
                };
                let map = AffineEndo::new(linear, shift).map_err(|e| usage("map", e))?;
                let targets = if self.targets.is_empty() {
                    vec![Point::zero(&ps)]
                } else {
                    self.targets
                        .iter()
                        .map(|t| self.point("target", t))
                        .collect::<Result<_, _>>()?
                };
                AliceSpec::Avoidance { map, targets }
            }
            (None, None) => AliceSpec::Idle,
        };
        if let Some(psi) = &self.psi {
            let psi = AffineEndo::linear_map(&ps, rational("psi", psi)?).map_err(|e| usage("psi", e))?;
            spec = AliceSpec::AffineTransfer {
                inner: Box::new(spec),
                psi,
                region: None,
            };
        }
        if let Some(shift) = &self.shift {
            spec = AliceSpec::TranslationTransfer {
                inner: Box::new(spec),
                shift: self.point("shift", shift)?,
            };
        }
        Ok(spec)
    }

    fn bob_spec(&self) -> Result<BobSpec, CliError> {
        Ok(match self.bob {
            BobKind::Random => BobSpec::Random,
            BobKind::Escape => BobSpec::Escape,
            BobKind::Stay => BobSpec::StayPut,
            BobKind::Chase => {
                let ps = self.prime_set()?;
                let point = match &self.chase {
                    Some(s) => self.point("chase", s)?,
                    None => Point::zero(&ps),
                };
                BobSpec::Chase { point }
            }
        })
    }

    /// Parses and checks every parameter, and builds each strategy once so
    /// that nothing fails after the first run has started.
    pub fn players(&self) -> Result<Players, CliError> {
        let alice = self.alice_spec()?;
        if let Some(alpha) = &self.alpha {
            let alpha = rational("alpha", alpha)?;
            let gamma = rational("gamma", self.gamma.as_deref().unwrap_or("1/2"))?;
            let alice = StrongAliceSpec::FromCylinder { inner: alice };
            alice.build(&alpha, &gamma).map_err(|e| usage("alpha", e))?;
            let bob = match self.bob {
                BobKind::Stay | BobKind::Escape => StrongBobSpec::Shrink,
                _ => StrongBobSpec::Random,
            };
            return Ok(Players::Strong {
                alice,
                bob,
                alpha,
                gamma,
            });
        }
        let beta = rational(
            "beta",
            self.beta
                .as_deref()
                .ok_or_else(|| usage("beta", "required"))?,
        )?;
        check_beta0(&alice, &beta)?;
        alice.build(&beta).map_err(|e| usage("beta", e))?;
        Ok(Players::Cylinder {
            alice,
            bob: self.bob_spec()?,
            beta,
        })
    }
}

/// β must be below β0 of every map avoided at the top level.
fn check_beta0(spec: &AliceSpec, beta: &Rational) -> Result<(), CliError> {
    match spec {
        AliceSpec::Avoidance { map, .. } => {
            let b0 = beta_ceiling(map).map_err(|e| usage("map", e))?;
            if beta >= &b0 || beta <= &Rational::from_integer(0.into()) {
                return Err(usage(
                    "beta",
                    format!(
                        "{} is not in (0, beta0) with beta0 = {} for map {}",
                        fmt_rational(beta),
                        fmt_rational(&b0),
                        fmt_rational(&map.linear)
                    ),
                ));
            }
            Ok(())
        }
        AliceSpec::Intersection { parts } => parts.iter().try_for_each(|p| check_beta0(p, beta)),
        _ => Ok(()),
    }
}
