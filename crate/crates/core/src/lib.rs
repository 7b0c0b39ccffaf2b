//! Impulsive release strategies against a vector-borne outbreak.
//!
//! The crate simulates a human SEIR model coupled to a mosquito SEI model
//! under two control methods: sterile-male releases and Wolbachia
//! population replacement. Releases are instantaneous jumps. On top of the
//! simulator sit forward sensitivities of the integrated infection burden
//! with respect to release times and sizes, and a projected-gradient /
//! augmented-Lagrangian optimizer.

pub mod analysis;
pub mod error;
pub mod exec;
pub mod gradients;
pub mod model;
pub mod ode;
pub mod optimizer;
pub mod params;
pub mod published;
pub mod sim;

pub use error::{Error, Result};
pub use exec::Execution;
pub use params::EpiParams;
pub use sim::{ModelKind, Problem, ReleaseSchedule, SimOptions, Trajectory};
