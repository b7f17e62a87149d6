//! Learning K-simplices from samples corrupted by isotropic Gaussian noise.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: simplex representation, volumes, facets, membership.
//! * [`sampler`]: the generative model `y = Vφ + σg`.
//! * [`metrics`]: TV / ℓ2 / vertex-ℓ1 distances and Monte-Carlo TV/KL for
//!   Gaussian-smoothed simplex densities.
//! * [`localization`]: the data-driven ball and noise-variance bound.
//! * [`cover`]: ball covers, candidate enumeration and the σ grid.
//! * [`scheffe`]: noisy densities, the Scheffé tournament, the learner.
//! * [`spectral`]: characteristic functions and band-energy checks.
//! * [`minimax`]: lower-bound hypothesis families and empirical risk.
//! * [`harness`]: experiment configs, sweeps and report files.

pub mod assignment;
pub mod cover;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod localization;
pub mod metrics;
pub mod minimax;
pub mod rng;
pub mod sampler;
pub mod scheffe;
pub mod spectral;

pub use error::{Error, Result};
pub use geometry::{GeometrySummary, Simplex};
pub use localization::LocalizationBall;
pub use sampler::{NoisyModel, SampleSet};
