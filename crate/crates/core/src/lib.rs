//! Closed battery-swapping queueing networks.
//!
//! A fleet of `r` electric vehicles drives around and periodically visits one
//! of `S` swapping stations, chosen between a pair of candidate stations by a
//! relative-load rule. Each station holds spare batteries and charging points.
//! The crate provides:
//!
//! - [`model`]: network description, QED capacity provisioning and validation;
//! - [`exactss`]: exact single-station steady states in log space;
//! - [`asymptotics`]: fluid trajectories, diffusion densities and limits;
//! - [`sim`]: seeded CTMC and general discrete-event simulation;
//! - [`metrics`]: diffusion scaling, collapse gaps and estimators;
//! - [`harness`]: experiment presets and artifact generation.

pub mod asymptotics;
pub mod error;
pub mod exactss;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod normal;
pub mod sim;

pub use error::{Error, Result};
