//! Simulation and optimization toolkit for blockchain-empowered federated
//! learning over digital twin wireless networks.

pub mod channel;
pub mod env;
pub mod error;
pub mod fl;
pub mod harness;
pub mod latency;
pub mod ledger;
pub mod maddpg;
pub mod model;
pub mod nn;
pub mod rng;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
