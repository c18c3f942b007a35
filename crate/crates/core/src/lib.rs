//! Continuous-time branching random walk machinery for kinetic-type
//! evolution equations `∂φ/∂t + φ = Q̂(φ, …, φ)`.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs and an explicit random stream; parallel
//! orchestration, file formats and the command line live in the `kinetic`
//! companion crate.
//!
//! * [`spectral`]: weight models, the moment functional `Φ`, the minimiser
//!   `γ*` of `μ(s) = Φ(s)/s` and the constants derived from it.
//! * [`initial_laws`]: initial distributions in a stable domain of normal
//!   attraction, with their limiting stable characteristic functions.
//! * [`branching`]: the branching random walk, Yule laws and martingale
//!   observables.
//! * [`solver`]: smoothing-transform samples, empirical characteristic
//!   functions and a Runge–Kutta reference integrator.
//! * [`fixed_point`]: approximations of the derivative-martingale limit.
//! * [`stats`]: the statistical test kit.
#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod branching;
pub mod error;
pub mod fixed_point;
pub mod initial_laws;
pub mod numeric;
pub mod quad;
pub mod rng;
pub mod solver;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64;
