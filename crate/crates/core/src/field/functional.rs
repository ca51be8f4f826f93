// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::gram::Radial;
use super::{Boundary, C64};
use crate::error::{invalid, Error, Result};

/// Test functionals against which fields are paired.
///
/// Bumps carry the radial profile `exp(-1/(1 - (|z-c|/r)^2))` normalised to
/// mass `weight`. Circle and semicircle averages are uniform probability
/// measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum LinearFunctional {
    #[serde(rename = "bump")]
    Bump { center: C64, radius: f64, weight: f64 },
    CircleAverage { center: C64, radius: f64 },
    #[serde(rename = "semicircle-average")]
    SemicircleAverage { x: f64, radius: f64 },
    /// Unit bump at `plus` minus unit bump at `minus`.
    SignedPair { plus: C64, plus_radius: f64, minus: C64, minus_radius: f64 },
}

impl LinearFunctional {
    pub fn bump(center: C64, radius: f64) -> Self {
        Self::Bump { center, radius, weight: 1.0 }
    }

    pub fn pair(plus: C64, minus: C64, radius: f64) -> Self {
        Self::SignedPair { plus, plus_radius: radius, minus, minus_radius: radius }
    }

    /// Total mass.
    pub fn mass(&self) -> f64 {
        match self {
            Self::Bump { weight, .. } => *weight,
            Self::CircleAverage { .. } | Self::SemicircleAverage { .. } => 1.0,
            Self::SignedPair { .. } => 0.0,
        }
    }

    /// Checks the support lies in the open upper half-plane and that the
    /// functional makes sense for `boundary`.
    pub fn validate(&self, boundary: Boundary) -> Result<()> {
        let inside = |c: C64, r: f64| r > 0.0 && r.is_finite() && c.im > r && c.re.is_finite();
        let ok = match *self {
            Self::Bump { center, radius, weight } => inside(center, radius) && weight.is_finite(),
            Self::CircleAverage { center, radius } => inside(center, radius),
            Self::SemicircleAverage { x, radius } => {
                if boundary == Boundary::Dirichlet {
                    return Err(Error::Admissibility(
                        "boundary averages vanish identically under Dirichlet conditions".into(),
                    ));
                }
                radius > 0.0 && x.is_finite()
            }
            Self::SignedPair { plus, plus_radius, minus, minus_radius } => {
                inside(plus, plus_radius) && inside(minus, minus_radius)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Admissibility(format!("support of {self:?} leaves the open domain")))
        }
    }

    /// Decomposition into weighted radial measures.
    ///
    /// A boundary semicircle about `x` is represented by the full circle: the
    /// free kernel only sees `mu + conj(mu)`, which for the semicircle is twice
    /// the circle.
    pub fn components(&self) -> Vec<(f64, Radial)> {
        match *self {
            Self::Bump { center, radius, weight } => vec![(weight, Radial::bump(center, radius))],
            Self::CircleAverage { center, radius } => vec![(1.0, Radial::ring(center, radius))],
            Self::SemicircleAverage { x, radius } => vec![(1.0, Radial::ring(Complex::new(x, 0.0), radius))],
            Self::SignedPair { plus, plus_radius, minus, minus_radius } => vec![
                (1.0, Radial::bump(plus, plus_radius)),
                (-1.0, Radial::bump(minus, minus_radius)),
            ],
        }
        .into_iter()
        .filter(|(c, _)| *c != 0.0)
        .collect()
    }

    /// Components of the complex-conjugate (mirror image) measure.
    pub fn reflected_components(&self) -> Vec<(f64, Radial)> {
        self.components().into_iter().map(|(c, r)| (c, r.conj())).collect()
    }

    /// Discrete measure `sum_k w_k delta_{z_k}` approximating the functional.
    pub fn quadrature_nodes(&self) -> Vec<(C64, f64)> {
        match *self {
            Self::Bump { center, radius, weight } => bump_nodes(center, radius, weight),
            Self::CircleAverage { center, radius } => {
                let m = 32;
                (0..m)
                    .map(|k| {
                        let th = 2.0 * PI * (k as f64 + 0.5) / m as f64;
                        (center + Complex::from_polar(radius, th), 1.0 / m as f64)
                    })
                    .collect()
            }
            Self::SemicircleAverage { x, radius } => {
                let (u, w) = gauss_legendre(16);
                u.iter()
                    .zip(&w)
                    .map(|(u, w)| {
                        let th = 0.5 * PI * (u + 1.0);
                        (Complex::new(x, 0.0) + Complex::from_polar(radius, th), 0.5 * w)
                    })
                    .collect()
            }
            Self::SignedPair { plus, plus_radius, minus, minus_radius } => {
                let mut v = bump_nodes(plus, plus_radius, 1.0);
                v.extend(bump_nodes(minus, minus_radius, -1.0));
                v
            }
        }
    }

    /// Smallest disc containing the support, as (center, radius) pairs.
    pub fn support_discs(&self) -> Vec<(C64, f64)> {
        match *self {
            Self::Bump { center, radius, .. } | Self::CircleAverage { center, radius } => vec![(center, radius)],
            Self::SemicircleAverage { x, radius } => vec![(Complex::new(x, 0.0), radius)],
            Self::SignedPair { plus, plus_radius, minus, minus_radius } => {
                vec![(plus, plus_radius), (minus, minus_radius)]
            }
        }
    }
}

/// Unnormalised radial bump profile on the unit disc.
pub(crate) fn bump_profile(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// `int_0^1 u psi(u) du`, the radial normaliser of the bump.
pub(crate) fn bump_norm() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| quadrature::integrate(|u| u * bump_profile(u), 0.0, 1.0, 1e-15).integral)
}

/// Probability density of the radius `u in [0,1]` of a unit bump.
pub(crate) fn bump_radial_density(u: f64) -> f64 {
    u * bump_profile(u) / bump_norm()
}

const BUMP_RADIAL_NODES: usize = 12;
const BUMP_ANGULAR_NODES: usize = 9;

fn bump_nodes(center: C64, radius: f64, weight: f64) -> Vec<(C64, f64)> {
    static RADIAL: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    let radial = RADIAL.get_or_init(|| {
        let (u, w) = gauss_legendre(BUMP_RADIAL_NODES);
        let raw: Vec<(f64, f64)> = u
            .iter()
            .zip(&w)
            .map(|(u, w)| {
                let s = 0.5 * (u + 1.0);
                (s, 0.5 * w * bump_radial_density(s))
            })
            .collect();
        // exact total mass; the profile is too flat near u = 1 for GL alone
        let total: f64 = raw.iter().map(|r| r.1).sum();
        raw.into_iter().map(|(s, w)| (s, w / total)).collect()
    });
    let m = BUMP_ANGULAR_NODES;
    let mut out = Vec::with_capacity(radial.len() * m);
    for (j, &(s, ws)) in radial.iter().enumerate() {
        for k in 0..m {
            // stagger the rings so nodes do not line up radially
            let th = 2.0 * PI * (k as f64 + 0.5 * (j % 2) as f64) / m as f64;
            out.push((center + Complex::from_polar(radius * s, th), weight * ws / m as f64));
        }
    }
    out
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Parses a JSON list of `{kind, params}` objects.
pub fn parse_family(json: &str) -> Result<Vec<LinearFunctional>> {
    serde_json::from_str(json).map_err(|e| invalid(format!("functional family: {e}")))
}
