#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Simulation and inference for particle diffusion in viscoelastic fluids.
//!
//! Trajectories come from generalized Langevin models through three samplers
//! (exact Cholesky/circulant embedding, Markovian state-space stepping, and a
//! wavelet multiresolution scheme). Tracks are analysed through pathwise MSD,
//! the Local Whittle estimator, and the generalized Stokes–Einstein relation.

pub mod bench;
pub mod cli;
pub mod error;
pub mod exactsim;
pub mod inference;
pub mod kernels;
pub mod markovsim;
pub mod quadrature;
pub mod rng;
pub mod spectral;
pub mod trackio;
pub mod waveletsim;

pub use error::{Error, Result};
