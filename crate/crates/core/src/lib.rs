//! Domain adaptation on the Grassmann manifold with an adaptively weighted
//! MMD alignment term and a graph regularizer.
//!
//! The pieces are usable on their own: [`manifold`] builds the geodesic
//! flow kernel, [`divergence`] holds MMD and A-distance estimators, [`srm`]
//! the closed-form classifier, and [`mdda`] ties them into the full
//! adaptation loop.

pub mod cli;
pub mod data;
pub mod divergence;
mod error;
pub mod graph;
pub mod kernel;
pub mod manifold;
pub mod mdda;
pub mod model_io;
mod seeds;
pub mod srm;

pub use error::{Error, Result};
pub use mdda::{evaluate, fit, fit_with_estimator, AdaptationReport, IterationRecord, MddaConfig};
pub use srm::{FittedModel, Prediction};
