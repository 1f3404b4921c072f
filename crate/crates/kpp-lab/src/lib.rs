//! Numerical laboratory for coupled KPP reaction-diffusion systems
//! with Lotka-Volterra competition and no-flux boundaries.
//!
//! The crate assembles finite-difference surrogates of
//! `-d_i Lap(u_i) = sum_j a_ij(x) u_j - b_i(u)`, computes principal
//! eigenvalues of the linearization at zero, finds and classifies steady
//! states, and probes basins of attraction by time integration.

pub mod discretization;
pub mod error;
pub mod linalg;
pub mod model;
pub mod nonlinearity;
pub mod parabolic;
pub mod parallel;
pub mod report;
pub mod scenario;
pub mod solvers;
pub mod spectral;
pub mod steady;

pub use error::{Error, Result};
