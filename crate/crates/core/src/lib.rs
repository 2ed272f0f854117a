//! Edge statistics of Dyson Brownian motion started from deterministic data.
//!
//! The crate is layered: [`measure`] holds the initial spectrum, [`free_conv`]
//! the deterministic free-convolution analysis, [`dbm`] the stochastic
//! particle systems and their linearised generator, [`stats`] the Monte Carlo
//! verdicts and [`harness`] the experiment runner behind the `dbm-edge` CLI.

pub mod error;
pub mod free_conv;
pub mod measure;
pub mod quad;
pub mod rng;
pub mod dbm;
pub mod stats;
pub mod harness;

pub use error::{Error, Result};
