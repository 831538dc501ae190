//! No-harm equilibria of finite normal-form games.
//!
//! A normal-form game and a starting profile define a perfect-information
//! game of sequential deviations: players take turns to stay at the current
//! profile, move to another of their own actions, or pass. Staying is only
//! allowed when it leaves no other player worse off than at the current
//! reference point. Backward induction over that tree gives the no-harm
//! equilibrium outcome.

pub mod cli;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod game;
pub mod solver;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
pub use game::{ActionProfile, NormalFormGame, PlayerId, ProfileId};
pub use solver::{enumerate_outcomes, one_deviation_check, path_between, solve, SolveConfig, SolveReport};
pub use tree::{ActionChoice, MoveTree, PathContext, Rules, TerminalVerdict, TraceRecord, TurnPolicy};
