//! Unsupervised learning by reconstruction loss, with convex relaxations.

pub mod cli;
pub mod data_gen;
pub mod dictionary;
pub mod error;
pub mod framework;
pub mod linalg;
pub mod pca;
pub mod rng;
pub mod sos;
pub mod spectral;

pub use error::{Error, Result};
