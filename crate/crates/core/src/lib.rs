// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

//! Multiple Schramm-Loewner evolution driven by interacting particle
//! systems, Gaussian free field pairings with log/arg decorations, and the
//! Ito-drift audits of the welding and flow-line couplings.
//!
//! The particle and Loewner kernels ([`driving`], [`loewner`], [`cftaux`])
//! are generic over [`Real`] (`f32` or `f64`); the Gaussian and statistical
//! layers work in `f64`.

pub mod cftaux;
pub mod coupling;
pub mod driving;
pub mod error;
pub mod field;
pub mod flowline;
pub mod loewner;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod tolerances;

pub use error::{Error, Result};
pub use num_complex::Complex;
pub use scalar::Real;

/// Double precision complex number.
pub type C64 = Complex<f64>;
/// Double precision configuration.
pub type Config64 = driving::ParticleConfig<f64>;
/// Double precision driving path.
pub type Path64 = driving::DrivingPath<f64>;
/// Single precision driving path.
pub type Path32 = driving::DrivingPath<f32>;
/// Double precision driving model.
pub type Model64 = driving::DrivingModel<f64>;

/// Crate version, echoed in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
