//! Relational neural Markov random fields.
//!
//! Models are sets of parfactors whose potentials are neural networks or
//! weighted logic rules, each multiplied by a normalized helper density.
//! Training maximizes pseudo-likelihood; inference is Gibbs sampling and
//! candidate-set ICM.

pub mod conditional;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod optim;
pub mod potentials;
pub mod registry;
pub mod relational;
pub mod trainer;

pub use error::{Error, Result};
pub use relational::{
    ground, Domain, Evidence, Frame, GroundGraph, Parfactor, Predicate, RelationalModel, Universe,
};
