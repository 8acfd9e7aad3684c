//! Discrete-time time-to-event estimands for clinical trials with
//! intercurrent events.
//!
//! The crate covers the longitudinal node structure `W, A(0), C(0), Y(1), L(1), ...`,
//! the ICE handling strategies as data rewrites, survival / cumulative
//! incidence estimators under static treatment regimes, and multiple
//! imputation sensitivity analyses. Numeric code is generic over
//! [`Scalar`] (f32 or f64); the aliases below fix it to f64.

pub mod data;
pub mod discretize;
pub mod error;
pub mod estimand;
pub mod estimate;
pub mod io;
pub mod mi;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod strategy;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dataset = data::TrialDataset<f64>;
pub type Subject = data::SubjectRecord<f64>;
pub type Competing = strategy::CompetingDataset<f64>;
