//! Evolutionary identification and management of composite models.
//!
//! The crate is organized around a layered view of modeling (system, data,
//! model) with operations tagged by the layer/concept transition they
//! perform. On top of that vocabulary it provides:
//!
//! - a synthetic two-parameter wave benchmark with an exhaustive
//!   grid-search oracle ([`models`]),
//! - a seed-deterministic real-coded evolutionary engine with Pareto
//!   archiving and cooperative co-evolution ([`evolution`]),
//! - least-squares ensemble weighting ([`ensembles`]),
//! - an inverse-distance-weighted surrogate of the error landscape
//!   ([`surrogate`]),
//! - n-gram sequence vectorization, clustering, process graphs and
//!   evolutionary pattern discovery ([`sequences`]),
//! - a config-driven pipeline runner ([`orchestrator`]).

pub mod ensembles;
pub mod error;
pub mod evolution;
pub mod metrics;
pub mod models;
pub mod orchestrator;
pub mod rng;
pub mod sequences;
pub mod series;
pub mod surrogate;
pub mod tags;

pub use error::{Error, Result};
