//! Grid-based lower approximations for partially observable Markov decision
//! processes under discounted and average-cost criteria.
//!
//! The pipeline is: parse a model ([`model`]), choose a belief grid
//! ([`grids`]), build the finite modified MDP on its supporting beliefs
//! ([`lower`]), solve it ([`discount`] or [`avgcost`]), then certify bounds and
//! simulate the induced policies ([`bounds`], [`sim`]).

pub mod avgcost;
pub mod bounds;
pub mod cli;
pub mod discount;
pub mod error;
pub mod grids;
mod linalg;
pub mod mdp;
pub mod lower;
pub mod lp;
pub mod model;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use model::{Belief, PomdpModel};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
