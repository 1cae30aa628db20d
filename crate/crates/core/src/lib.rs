//! Scattering resonances of random highly oscillatory potentials
//! V_N(x) = q₀(x) + Σ_j u_j q(Nx - j) in one dimension.

pub mod cli;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod limits;
pub mod ode;
pub mod perturbation;
pub mod profiles;
pub mod quadrature;
pub mod resonances;
pub mod sobolev;
pub mod stats;

pub use error::{Error, Result};
