//! Charge-parity switching in transmon tunable-coupler gates.

pub mod channel;
pub mod circuit;
pub mod cli;
pub mod config;
pub mod design;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod pulse;
pub mod spectral;
pub mod units;

pub use error::{Error, Result};
