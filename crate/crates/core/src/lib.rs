//! Whittle-index scheduling for the mean age of incorrect information (MAoII)
//! of remote Markov sources observed over unreliable channels.
//!
//! The crate is layered bottom-up:
//!
//! - [`source`]: source/channel parameters and the monitor's belief.
//! - [`metrics`]: the AoI and MAoII penalty ladders.
//! - [`policy_eval`]: steady state of single-source threshold policies.
//! - [`whittle`]: closed-form indices, the intersection oracle, index tables.
//! - [`mdp`]: relative value iteration on the single-source relaxed problem,
//!   used as independent ground truth for thresholds and indices.
//! - [`sim`]: multi-source Monte Carlo simulation of index policies.
//! - [`experiment`] and [`verify`]: scenario files, result tables and the
//!   cross-check report driven by the `maoii` binary.

pub mod error;
pub mod experiment;
pub mod mdp;
pub mod metrics;
pub mod policy_eval;
pub mod sim;
pub mod source;
pub mod verify;
pub mod whittle;

pub use error::{Error, Result};
pub use metrics::Metric;
pub use source::SourceParams;
