//! Performance model and Monte Carlo validation for UAVs that recharge at
//! shared EV charging infrastructure.

pub mod association;
pub mod cli;
pub mod availability;
pub mod coverage;
pub mod economics;
pub mod energy;
pub mod error;
pub mod params;
pub mod pointprocess;
pub mod quad;
pub mod queueing;
pub mod seed;
pub mod simulator;
pub mod stats;
pub mod units;

pub use error::{Error, Result};
pub use params::ParamSet;
