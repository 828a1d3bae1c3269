//! Serializable strategy descriptions. A transcript stores these, so a run
//! can be rebuilt from its JSON alone.

use serde::{Deserialize, Serialize};

use super::avoidance::AvoidanceAlice;
use super::bob::{ChaseBob, EscapeBob, RandomBob, RandomStrongBob, ShrinkAlice, ShrinkBob, StayPutBob};
use super::combinators::{
    transfer_exponent, AffineTransfer, CawToStrong, IdleAlice, Intersection, NeverBlock,
    TranslationTransfer,
};
use super::beta_power;
use crate::affine::AffineEndo;
use crate::arith::Rational;
use crate::error::{Error, Result};
use crate::game::{AliceStrategy, BobStrategy, Descriptor, StrategyReport, StrongAlice, StrongBob};
use crate::solenoid::{Ball, Cylinder, Point};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AliceSpec {
    NeverBlock,
    Idle,
    Avoidance {
        map: AffineEndo,
        targets: Vec<Point>,
    },
    Intersection {
        parts: Vec<AliceSpec>,
    },
    AffineTransfer {
        inner: Box<AliceSpec>,
        psi: AffineEndo,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        region: Option<Ball>,
    },
    TranslationTransfer {
        inner: Box<AliceSpec>,
        shift: Point,
    },
}

impl AliceSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AliceSpec::NeverBlock => "never_block",
            AliceSpec::Idle => "idle",
            AliceSpec::Avoidance { .. } => "avoidance",
            AliceSpec::Intersection { .. } => "intersection",
            AliceSpec::AffineTransfer { .. } => "affine_transfer",
            AliceSpec::TranslationTransfer { .. } => "translation_transfer",
        }
    }

    /// The strategy for the game with parameter `beta`.
    pub fn build(&self, beta: &Rational) -> Result<Box<dyn AliceStrategy>> {
        let inner = self.build_at(beta, beta)?;
        Ok(Box::new(Specified {
            spec: self.clone(),
            inner,
        }))
    }

    /// Playing as if the parameter were `play` in a game at `game`.
    pub fn build_at(&self, play: &Rational, game: &Rational) -> Result<Box<dyn AliceStrategy>> {
        Ok(match self {
            AliceSpec::NeverBlock => Box::new(NeverBlock { beta: play.clone() }),
            AliceSpec::Idle => {
                let third = Rational::new(1.into(), 3.into());
                Box::new(IdleAlice {
                    beta: play.clone(),
                    index: if game < &third { 0 } else { 1 },
                })
            }
            AliceSpec::Avoidance { map, targets } => match targets.as_slice() {
                [] => return Err(Error::Parameter("avoidance needs a target".into())),
                [y] => Box::new(AvoidanceAlice::with_play_beta(
                    map.clone(),
                    y.clone(),
                    play.clone(),
                    game,
                )?),
                many => {
                    let sub = beta_power(play, many.len());
                    let parts = many
                        .iter()
                        .map(|y| {
                            AvoidanceAlice::with_play_beta(map.clone(), y.clone(), sub.clone(), game)
                                .map(|a| Box::new(a) as Box<dyn AliceStrategy>)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Box::new(Intersection::new(parts)?)
                }
            },
            AliceSpec::Intersection { parts } => {
                let sub = beta_power(play, parts.len());
                let built = parts
                    .iter()
                    .map(|p| p.build_at(&sub, game))
                    .collect::<Result<Vec<_>>>()?;
                Box::new(Intersection::new(built)?)
            }
            AliceSpec::AffineTransfer { inner, psi, region } => {
                let k = transfer_exponent(psi, play)?;
                let built = inner.build_at(&k.inner_beta, game)?;
                Box::new(AffineTransfer::build(
                    built,
                    Some((**inner).clone()),
                    psi.clone(),
                    region.clone(),
                    play.clone(),
                    game,
                )?)
            }
            AliceSpec::TranslationTransfer { inner, shift } => {
                let built = inner.build_at(play, game)?;
                Box::new(TranslationTransfer::build(
                    built,
                    Some((**inner).clone()),
                    shift.clone(),
                    play.clone(),
                )?)
            }
        })
    }
}

/// A spec-built strategy whose descriptor is the spec itself.
struct Specified {
    spec: AliceSpec,
    inner: Box<dyn AliceStrategy>,
}

impl AliceStrategy for Specified {
    fn descriptor(&self) -> Descriptor {
        Descriptor::new(self.spec.name(), serde_json::to_value(&self.spec).unwrap())
    }

    fn block(&mut self, ball: &Ball) -> Result<Cylinder> {
        self.inner.block(ball)
    }

    fn observe(&mut self, ball: &Ball) {
        self.inner.observe(ball)
    }

    fn report(&self) -> StrategyReport {
        self.inner.report()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BobSpec {
    StayPut,
    Escape,
    Random,
    /// Keeps `point` inside his ball whenever possible.
    Chase { point: Point },
}

impl BobSpec {
    pub fn build(&self) -> Box<dyn BobStrategy> {
        match self {
            BobSpec::StayPut => Box::new(StayPutBob),
            BobSpec::Escape => Box::new(EscapeBob),
            BobSpec::Random => Box::new(RandomBob),
            BobSpec::Chase { point } => Box::new(ChaseBob {
                point: point.clone(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrongAliceSpec {
    Shrink,
    /// A cylinder strategy played at `α·γ` through the strong-game adapter.
    FromCylinder { inner: AliceSpec },
}

impl StrongAliceSpec {
    pub fn build(&self, alpha: &Rational, gamma: &Rational) -> Result<Box<dyn StrongAlice>> {
        Ok(match self {
            StrongAliceSpec::Shrink => Box::new(ShrinkAlice {
                alpha: alpha.clone(),
            }),
            StrongAliceSpec::FromCylinder { inner } => {
                let b = alpha * gamma;
                let built = inner.build_at(&b, &b)?;
                Box::new(CawToStrong::new(
                    built,
                    Some(inner.clone()),
                    alpha.clone(),
                    gamma.clone(),
                )?)
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrongBobSpec {
    Shrink,
    Random,
}

impl StrongBobSpec {
    pub fn build(&self) -> Box<dyn StrongBob> {
        match self {
            StrongBobSpec::Shrink => Box::new(ShrinkBob),
            StrongBobSpec::Random => Box::new(RandomStrongBob),
        }
    }
}
