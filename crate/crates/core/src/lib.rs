//! Rate analysis of multiplexed cat-code quantum repeater chains.

pub mod cat;
pub mod cli;
pub mod error;
pub mod explore;
pub mod fock;
pub mod graph;
pub mod link;
pub mod par;
pub mod qubit;
pub mod rate;
pub mod verify;

pub use error::{Error, Result};
