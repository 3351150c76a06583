//! Streaming Bayesian inference for binary crowdsourced classification under
//! the one-coin Dawid-Skene model, together with the usual comparison
//! aggregators, task-assignment policies, asymptotic error bounds and a
//! synthetic-crowd simulator.

pub mod baselines;
pub mod error;
pub mod io;
pub mod model;
pub mod policies;
pub mod sbic;
pub mod simulator;
pub mod theory;

pub use error::{Error, Result};
pub use model::{expit, logit, prior_log_odds, GroundTruth, Label, LabelMatrix, LabelRecord, Prediction, Prior};
