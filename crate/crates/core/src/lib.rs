pub mod affine;
pub mod analysis;
pub mod arith;
pub mod audit;
pub mod error;
pub mod game;
pub mod hp;
pub mod solenoid;
pub mod strategies;
pub mod verify;

pub use arith::{Prime, Rational};
pub use error::{Error, Result};
