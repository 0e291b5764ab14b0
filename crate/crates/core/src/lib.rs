//! Responsiveness verification for model predictions: sample the feasible
//! interventions reachable from a point, score them with a model, and
//! estimate or test the fraction that reach a target outcome.

pub mod config;
pub mod effects;
pub mod engine;
pub mod intervention;
pub mod model_io;
pub mod sampler;
pub mod stats;
