//! Exact asymptotic learning curves for denoising score matching with
//! random-features score models on Gaussian targets, together with the
//! finite-size Monte Carlo and reverse-diffusion sampler used to check them.
//!
//! Modules, bottom-up:
//!
//! - [`diffusion_core`]: OU schedules, exact and empirical scores, forward sampling.
//! - [`gaussian_stats`]: Gaussian moments and Hermite expansions of activations.
//! - [`theory`]: fixed-point systems for `m = ∞` and `m = 1`, learning curves, sweeps.
//! - [`estimator`]: random-features ridge fit and Monte Carlo error estimates.
//! - [`sampler`]: per-time score tables, backward Euler–Maruyama, memorization rate.

pub mod diffusion_core;
mod error;
pub mod estimator;
pub mod gaussian_stats;
pub mod parallel;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod theory;

pub use error::{Error, Result};
