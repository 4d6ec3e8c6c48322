//! Lattice unit-cell VAE toolkit.
//!
//! Generates a synthetic corpus of 2D strut-lattice unit cells, trains a
//! small convolutional variational autoencoder over it, produces transition
//! regions between lattice topologies by interpolating in the learned
//! latent space, scores transition smoothness with a 3D Sobel gradient
//! metric, and runs the distance-by-intervals sweep with an OLS analysis of
//! the results.
//!
//! The `lvae` binary exposes the full pipeline; see the crate README.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod io;
pub mod latent;
pub mod nn;
pub mod rng;
pub mod smoothness;
pub mod stats;
pub mod vae;

pub use error::{Error, Result};
