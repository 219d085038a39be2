//! Markov equilibria of a seller-reputation game in which buyers learn only
//! from past purchase decisions.
//!
//! The crate covers static cascade thresholds ([`model`]), the stationary
//! dynamic program on an aligned log-odds grid ([`solver`]), its finite
//! horizon counterpart ([`finite`]), belief-path simulation and welfare
//! ([`dynamics`]), and the flexible-price and public-outcome variants
//! ([`extensions`]).

pub mod dynamics;
pub mod error;
pub mod exec;
pub mod extensions;
pub mod finite;
pub mod grid;
pub mod model;
pub mod solver;

pub use error::{Error, Result};
pub use exec::Exec;
pub use model::{derive_statics, Action, Belief, ModelParams, Region, Signal, Statics, TieBreak};
pub use solver::{solve, Solution, SolveOptions};
