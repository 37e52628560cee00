//! Simulation and numerical analysis of the self-intersection local time of
//! d-dimensional fractional Brownian motion and the associated Edwards model.
//!
//! * [`fbm`] samples exact fBm paths (dense Cholesky or circulant embedding).
//! * [`local_time`] estimates `L_ε`, its centered version and Edwards weights.
//! * [`kernels`] and [`mean`] evaluate the closed-form kernels and the mean `E(L_ε)`.
//! * [`bounds`] measures the constants of the integrability estimates.
//! * [`quadrature`] evaluates the covariance integrals `E_{εγ}` over time quadruples.
//! * [`mc`] runs deterministic parallel Monte Carlo experiments.
//! * [`acceptance`] reproduces the verification suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod numeric;
pub mod params;
pub mod rng;

pub mod fbm;
pub mod path_io;

pub mod local_time;

pub mod kernels;
pub mod mean;
pub mod oracle;
pub mod cubature;
pub mod quad1d;
pub mod quadrature;
pub mod sampling;
pub mod bounds;
pub mod mc;
pub mod acceptance;

pub use error::{Error, Result};
pub use fbm::{fbm_covariance, generate_path, increment_covariance, FbmGenerator, Method, Path};
pub use kernels::{KernelValues, Region, TimeQuad};
pub use local_time::{EdwardsWeight, LocalTimeEstimate};
pub use params::{ModelParams, TimeGrid};
