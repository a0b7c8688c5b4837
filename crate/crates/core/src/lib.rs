//! Finite-horizon two-player zero-sum stochastic games with asymmetric
//! information.
//!
//! Player 1 minimizes cost. Games are given in kernel form
//! ([`model::GameDefinition`]) or as one-sided games
//! ([`model::OneSidedGame`]) where player 1 knows the state. Stages are
//! indexed from 0.

pub mod belief;
pub mod error;
pub mod grid;
pub mod instances;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod solver;
pub mod stage;
pub mod strategy;
pub mod tensor;

pub use error::{Error, Result};
