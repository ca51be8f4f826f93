// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

//! Gaussian free fields seen through finitely many test functionals.
//!
//! A field is never put on a grid: a family of functionals defines an exact
//! multivariate Gaussian whose covariance is assembled from log-potential
//! energies of radial measures.

mod functional;
mod gram;
mod quantum;
mod sampling;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::driving::{Chamber, ParticleConfig};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

pub use functional::{parse_family, LinearFunctional};
pub use gram::{gram_matrix, gram_matrix_with, log_energy, FreeConvention, Radial};
pub use quantum::{
    estimate_boundary_length, expected_boundary_length, quantum_area, quantum_boundary_length, AreaGrid, BoundaryGrid, LengthEstimate,
};
pub use sampling::{gaussian_factor, sample_pairings, sample_pairings_with, PairingSample};

pub(crate) use functional::gauss_legendre;

type C64 = Complex<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Dirichlet,
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    HalfPlane,
    Orthant,
}

/// Green function of the upper half-plane (or of the first quadrant through
/// `z -> z^2`).
pub fn green<T: Real>(kind: Boundary, z: Complex<T>, w: Complex<T>) -> Result<T> {
    if z == w {
        return Err(Error::Singularity);
    }
    if !(z.im > T::zero()) || !(w.im > T::zero()) {
        return Err(Error::Domain("Green function needs points of the open half-plane".into()));
    }
    let near = (z - w).norm().ln();
    let far = (z - w.conj()).norm().ln();
    Ok(match kind {
        Boundary::Dirichlet => far - near,
        Boundary::Free => -near - far,
    })
}

/// Green function on `domain`.
pub fn green_on<T: Real>(kind: Boundary, domain: Domain, z: Complex<T>, w: Complex<T>) -> Result<T> {
    match domain {
        Domain::HalfPlane => green(kind, z, w),
        Domain::Orthant => {
            if !(z.re > T::zero()) || !(w.re > T::zero()) {
                return Err(Error::Domain("point outside the quadrant".into()));
            }
            green(kind, z * z, w * w)
        }
    }
}

/// Deterministic harmonic decorations.
#[derive(Clone, Debug, PartialEq)]
pub enum Decoration {
    /// `sum a_i log|z - x_i|`
    Log { anchors: ParticleConfig<f64>, alphas: Vec<f64> },
    /// `-(2/sqrt(kappa)) sum arg(z - x_i)`
    Arg { anchors: ParticleConfig<f64>, kappa: f64 },
    /// `sum a_i (log|z - x_i| + log|z + x_i|) + q log|z|`
    Orthant { anchors: ParticleConfig<f64>, alphas: Vec<f64>, q: f64 },
}

impl Decoration {
    pub fn log(anchors: &[f64], alphas: &[f64]) -> Result<Self> {
        if anchors.len() != alphas.len() {
            return Err(invalid("one weight per anchor"));
        }
        Ok(Self::Log { anchors: ParticleConfig::on_line(anchors.to_vec())?, alphas: alphas.to_vec() })
    }

    pub fn arg(anchors: &[f64], kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(invalid("kappa must be positive"));
        }
        Ok(Self::Arg { anchors: ParticleConfig::on_line(anchors.to_vec())?, kappa })
    }

    pub fn orthant(anchors: &[f64], alphas: &[f64], q: f64) -> Result<Self> {
        if anchors.len() != alphas.len() {
            return Err(invalid("one weight per anchor"));
        }
        Ok(Self::Orthant {
            anchors: ParticleConfig::new(anchors.to_vec(), Chamber::PositiveHalfLine)?,
            alphas: alphas.to_vec(),
            q,
        })
    }

    fn anchors(&self) -> &[f64] {
        match self {
            Self::Log { anchors, .. } | Self::Arg { anchors, .. } | Self::Orthant { anchors, .. } => anchors.points(),
        }
    }

    /// Same decoration with anchors replaced (weights kept).
    pub fn moved_to(&self, anchors: &[f64]) -> Result<Self> {
        match self {
            Self::Log { alphas, .. } => Self::log(anchors, alphas),
            Self::Arg { kappa, .. } => Self::arg(anchors, *kappa),
            Self::Orthant { alphas, q, .. } => Self::orthant(anchors, alphas, *q),
        }
    }

    /// Value at `z`.
    pub fn eval(&self, z: C64) -> Result<f64> {
        if self.anchors().iter().any(|&x| z == Complex::new(x, 0.0)) {
            return Err(Error::Singularity);
        }
        Ok(match self {
            Self::Log { anchors, alphas } => {
                anchors.points().iter().zip(alphas).map(|(&x, a)| a * (z - x).norm().ln()).sum()
            }
            Self::Arg { anchors, kappa } => {
                let s: f64 = anchors.points().iter().map(|&x| (z - x).arg()).sum();
                -2.0 / kappa.sqrt() * s
            }
            Self::Orthant { anchors, alphas, q } => {
                if z == Complex::new(0.0, 0.0) {
                    return Err(Error::Singularity);
                }
                let s: f64 = anchors
                    .points()
                    .iter()
                    .zip(alphas)
                    .map(|(&x, a)| a * ((z - x).norm().ln() + (z + x).norm().ln()))
                    .sum();
                s + q * z.norm().ln()
            }
        })
    }

    /// Average over the upper semicircle of radius `eps` about the boundary point `x`.
    pub fn semicircle_average(&self, x: f64, eps: f64) -> Result<f64> {
        match self {
            // log|z - x_i| is symmetric under conjugation, so the semicircle
            // average is the full circle average.
            Self::Log { anchors, alphas } => Ok(anchors
                .points()
                .iter()
                .zip(alphas)
                .map(|(&xi, a)| a * (x - xi).abs().max(eps).ln())
                .sum()),
            _ => {
                let (nodes, weights) = gauss_legendre(32);
                let mut s = 0.0;
                for (u, w) in nodes.iter().zip(&weights) {
                    let th = 0.5 * std::f64::consts::PI * (u + 1.0);
                    s += 0.5 * w * self.eval(Complex::new(x, 0.0) + Complex::from_polar(eps, th))?;
                }
                Ok(s)
            }
        }
    }
}

/// `decoration.eval(z)`.
pub fn decoration_eval(decoration: &Decoration, z: C64) -> Result<f64> {
    decoration.eval(z)
}

/// A free field specification: boundary condition, decorations and the
/// coupling constants `gamma` (`Q = 2/gamma + gamma/2`) and `chi`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldModel {
    pub boundary: Boundary,
    pub domain: Domain,
    pub gamma: f64,
    pub chi: f64,
    pub decorations: Vec<Decoration>,
}

impl FieldModel {
    pub fn new(boundary: Boundary, domain: Domain, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(invalid(format!("gamma = {gamma} must lie in (0, 2)")));
        }
        let kappa = gamma * gamma;
        Ok(Self {
            boundary,
            domain,
            gamma,
            chi: 2.0 / kappa.sqrt() - kappa.sqrt() / 2.0,
            decorations: Vec::new(),
        })
    }

    pub fn with_decoration(mut self, d: Decoration) -> Self {
        self.decorations.push(d);
        self
    }

    pub fn q(&self) -> f64 {
        2.0 / self.gamma + self.gamma / 2.0
    }

    /// Sum of all decorations at `z`.
    pub fn decoration_value(&self, z: C64) -> Result<f64> {
        self.decorations.iter().map(|d| d.eval(z)).sum()
    }
}
