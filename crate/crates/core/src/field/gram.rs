// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

//! Covariances of functionals as log-potential energies.
//!
//! Both half-plane kernels are `-log|z-w| -+ (-log|z-conj w|)`, so every entry
//! reduces to mutual energies `P(a, b) = iint -log|z-w| a(dz) b(dw)` of radial
//! measures (rings and bumps). Separated supports give `-log|c_a - c_b|`
//! exactly; overlapping ones are integrated over radii, with the angular
//! average done in closed form unless the two circles cross.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::functional::bump_radial_density;
use super::{Boundary, LinearFunctional, C64};
use crate::error::{Error, Result};
use crate::tolerances::QUAD_TOL;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Profile {
    /// Uniform measure on a circle.
    Ring,
    /// Normalised bump.
    Bump,
}

/// Rotation invariant probability measure about `center`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Radial {
    center: C64,
    radius: f64,
    profile: Profile,
}

impl Radial {
    pub fn ring(center: C64, radius: f64) -> Self {
        Self { center, radius, profile: Profile::Ring }
    }

    pub fn bump(center: C64, radius: f64) -> Self {
        Self { center, radius, profile: Profile::Bump }
    }

    pub fn conj(self) -> Self {
        Self { center: self.center.conj(), ..self }
    }

    /// `int g(rho) dP(rho)` over the radius distribution.
    fn radial_integral(&self, g: impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
        match self.profile {
            Profile::Ring => g(self.radius),
            Profile::Bump => {
                let r = self.radius;
                piecewise(|s| bump_radial_density(s / r) / r * g(s), 0.0, r, breaks)
            }
        }
    }
}

fn piecewise(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64]) -> f64 {
    let mut pts = vec![a];
    let mut bs: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    bs.sort_by(f64::total_cmp);
    pts.extend(bs);
    pts.push(b);
    pts.windows(2)
        .filter(|w| w[1] - w[0] > 1e-15 * (1.0 + b.abs()))
        .map(|w| quadrature::integrate(&f, w[0], w[1], QUAD_TOL).integral)
        .sum()
}

/// Average over the circle `|w - c_b| = s` of `-log max(|w - c_a|, t)`,
/// with `d = |c_a - c_b|`.
fn ring_ring(d: f64, t: f64, s: f64) -> f64 {
    if d + s <= t {
        return -t.ln();
    }
    if d >= s + t || d + t <= s || s == 0.0 || t == 0.0 {
        return -d.max(s).ln();
    }
    // the circles cross; phi measured from the direction of c_a
    let cos_star = ((d * d + s * s - t * t) / (2.0 * d * s)).clamp(-1.0, 1.0);
    let phi_star = cos_star.acos();
    let outside = quadrature::integrate(
        |phi| -0.5 * (d * d + s * s - 2.0 * d * s * phi.cos()).ln(),
        phi_star,
        PI,
        QUAD_TOL,
    )
    .integral;
    (phi_star * -t.ln() + outside) / PI
}

/// Mutual log energy `P(a, b)`.
pub fn log_energy(a: &Radial, b: &Radial) -> f64 {
    let d = (a.center - b.center).norm();
    if d >= a.radius + b.radius && d > 0.0 {
        return -d.ln();
    }
    let ra = a.radius;
    b.radial_integral(
        |s| a.radial_integral(|t| ring_ring(d, t, s), &[(d - s).abs(), d + s]),
        &[d, (ra - d).abs(), ra + d],
    )
}

/// How non-zero-mass functionals are treated under free boundary conditions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FreeConvention {
    /// Only zero-mass functionals are admissible.
    #[default]
    ZeroMassOnly,
    /// Any functional is paired with the kernel `-log|z-w| - log|z-conj w|`
    /// itself (one representative of the field modulo constants).
    KernelRepresentative,
}

/// Covariance matrix of `fs` under `boundary`.
pub fn gram_matrix(boundary: Boundary, fs: &[LinearFunctional]) -> Result<DMatrix<f64>> {
    gram_matrix_with(boundary, fs, FreeConvention::ZeroMassOnly)
}

pub fn gram_matrix_with(
    boundary: Boundary,
    fs: &[LinearFunctional],
    convention: FreeConvention,
) -> Result<DMatrix<f64>> {
    for f in fs {
        f.validate(boundary)?;
        if boundary == Boundary::Free && convention == FreeConvention::ZeroMassOnly && f.mass() != 0.0 {
            return Err(Error::Admissibility(format!(
                "free-boundary functionals must have zero mass, got {} for {f:?}",
                f.mass()
            )));
        }
    }
    let m = fs.len();
    let comps: Vec<_> = fs.iter().map(|f| f.components()).collect();
    let mirrors: Vec<_> = fs.iter().map(|f| f.reflected_components()).collect();
    let sign = match boundary {
        Boundary::Dirichlet => -1.0,
        Boundary::Free => 1.0,
    };
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a..m).map(move |b| (a, b))).collect();
    let entries: Vec<f64> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let mut v = 0.0;
            for (ca, ra) in &comps[a] {
                for (cb, rb) in &comps[b] {
                    v += ca * cb * log_energy(ra, rb);
                }
                for (cb, rb) in &mirrors[b] {
                    v += sign * ca * cb * log_energy(ra, rb);
                }
            }
            v
        })
        .collect();
    let mut g = DMatrix::zeros(m, m);
    for (&(a, b), v) in pairs.iter().zip(entries) {
        g[(a, b)] = v;
        g[(b, a)] = v;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::green;
    use num_complex::Complex;

    fn c(re: f64, im: f64) -> C64 {
        Complex::new(re, im)
    }

    #[test]
    fn ring_average_crossing_reference_value() {
        // 30-digit reference computed offline
        assert!((ring_ring(0.3, 0.2, 0.25) - 1.054_089_013_900_330_3).abs() < 1e-10);
    }

    #[test]
    fn ring_average_closed_forms_match_quadrature() {
        for &(d, t, s) in &[(0.5, 0.2, 0.1), (0.05, 0.5, 0.2), (0.1, 0.1, 0.6), (0.3, 0.2, 0.25), (0.0, 0.3, 0.1)] {
            let f = |th: f64| -(Complex::from_polar(s, th) + d).norm().max(t).ln();
            // split where |w| crosses t
            let mut cuts = vec![0.0, PI, 2.0 * PI];
            if d > 0.0 && s > 0.0 {
                let c = (t * t - d * d - s * s) / (2.0 * d * s);
                if c.abs() < 1.0 {
                    cuts.extend([c.acos(), 2.0 * PI - c.acos()]);
                }
            }
            cuts.sort_by(f64::total_cmp);
            let direct: f64 =
                cuts.windows(2).map(|w| quadrature::integrate(f, w[0], w[1], 1e-13).integral).sum::<f64>() / (2.0 * PI);
            assert!((ring_ring(d, t, s) - direct).abs() < 1e-9, "{d} {t} {s}");
        }
    }

    #[test]
    fn dirichlet_circle_average_variance() {
        let z = c(0.0, 1.0);
        let eps = 0.1;
        let g = gram_matrix(Boundary::Dirichlet, &[LinearFunctional::CircleAverage { center: z, radius: eps }])
            .unwrap();
        // independent oracle: double angular quadrature of the kernel
        let oracle = {
            let inner = |t1: f64| {
                let z1 = z + Complex::from_polar(eps, t1);
                let f = |t2: f64| green(Boundary::Dirichlet, z1, z + Complex::from_polar(eps, t2)).unwrap_or(0.0);
                quadrature::integrate(&f, t1 - 2.0 * PI, t1, 1e-12).integral
            };
            quadrature::integrate(inner, 0.0, 2.0 * PI, 1e-10).integral / (4.0 * PI * PI)
        };
        assert!((g[(0, 0)] - oracle).abs() < 1e-4 * oracle.abs(), "{} vs {oracle}", g[(0, 0)]);
        assert!((g[(0, 0)] - (-(eps.ln()) + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn far_bumps_see_the_kernel_at_centers() {
        let a = c(0.0, 1.0);
        let b = c(5.0, 2.0);
        let fs = [LinearFunctional::bump(a, 0.2), LinearFunctional::bump(b, 0.3)];
        let g = gram_matrix(Boundary::Dirichlet, &fs).unwrap();
        let k = green(Boundary::Dirichlet, a, b).unwrap();
        assert!((g[(0, 1)] - k).abs() < 0.01 * k.abs());
    }

    #[test]
    fn zero_functional_gives_zero_row() {
        let fs = [
            LinearFunctional::bump(c(0.0, 1.0), 0.2),
            LinearFunctional::Bump { center: c(1.0, 1.0), radius: 0.2, weight: 0.0 },
            LinearFunctional::pair(c(0.0, 2.0), c(0.1, 2.1), 0.2),
        ];
        let g = gram_matrix(Boundary::Dirichlet, &fs).unwrap();
        for k in 0..3 {
            assert_eq!(g[(1, k)], 0.0);
            assert_eq!(g[(k, 1)], 0.0);
        }
    }

    #[test]
    fn bump_self_energy_matches_node_quadrature() {
        // energy of the mollified bump vs Monte-Carlo-free nested quadrature
        let r = 0.5;
        let b = Radial::bump(c(0.0, 0.0), r);
        let e = log_energy(&b, &b);
        let e2 = quadrature::integrate(
            |s| {
                bump_radial_density(s / r) / r
                    * (quadrature::integrate(|t| bump_radial_density(t / r) / r, 0.0, s, 1e-14).integral * -s.ln()
                        + quadrature::integrate(|t| bump_radial_density(t / r) / r * -t.ln(), s, r, 1e-14)
                            .integral)
            },
            0.0,
            r,
            1e-12,
        )
        .integral;
        assert!((e - e2).abs() < 1e-6);
    }

    #[test]
    fn overlapping_bumps_agree_with_node_sums() {
        // smooth kernel from a reflected partner, where node sums are accurate
        let a = LinearFunctional::bump(c(0.0, 1.0), 0.3);
        let b = LinearFunctional::bump(c(0.2, 1.1), 0.3);
        let exact = {
            let ra = Radial::bump(c(0.0, 1.0), 0.3);
            let rb = Radial::bump(c(0.2, -1.1), 0.3);
            log_energy(&ra, &rb)
        };
        let na = a.quadrature_nodes();
        let nb = b.quadrature_nodes();
        let mut s = 0.0;
        for (z, wz) in &na {
            for (w, ww) in &nb {
                s += wz * ww * -(z - w.conj()).norm().ln();
            }
        }
        assert!((s - exact).abs() < 1e-6);
        // crossing case: node sums converge slowly, compare loosely
        let ra = Radial::bump(c(0.0, 1.0), 0.3);
        let rb = Radial::bump(c(0.2, 1.1), 0.3);
        let e = log_energy(&ra, &rb);
        let mut s = 0.0;
        for (z, wz) in &na {
            for (w, ww) in &nb {
                s += wz * ww * -(z - w).norm().ln();
            }
        }
        assert!((s - e).abs() < 0.05, "{s} vs {e}");
    }

    #[test]
    fn free_boundary_rejects_massive_functionals() {
        let fs = [LinearFunctional::bump(c(0.0, 1.0), 0.2)];
        assert!(matches!(gram_matrix(Boundary::Free, &fs), Err(Error::Admissibility(_))));
        assert!(gram_matrix_with(Boundary::Free, &fs, FreeConvention::KernelRepresentative).is_ok());
    }

    #[test]
    fn semicircle_pairs_under_free_kernel() {
        let eps = 0.01;
        let fs = [
            LinearFunctional::SemicircleAverage { x: 0.0, radius: eps },
            LinearFunctional::SemicircleAverage { x: 0.5, radius: eps },
            LinearFunctional::SemicircleAverage { x: 0.015, radius: eps },
        ];
        let g = gram_matrix_with(Boundary::Free, &fs, FreeConvention::KernelRepresentative).unwrap();
        assert!((g[(0, 0)] + 2.0 * eps.ln()).abs() < 1e-12);
        assert!((g[(0, 1)] + 2.0 * 0.5f64.ln()).abs() < 1e-12);
        // overlapping circles: direct angular oracle of 2 P(C_x, C_y)
        let d = 0.015;
        let f = |th: f64| -(Complex::from_polar(eps, th) + d).norm().max(eps).ln();
        let k = (-d / (2.0 * eps)).acos();
        let cuts = [0.0, k, PI, 2.0 * PI - k, 2.0 * PI];
        let oracle = 2.0 * cuts.windows(2).map(|w| quadrature::integrate(f, w[0], w[1], 1e-13).integral).sum::<f64>()
            / (2.0 * PI);
        assert!((g[(0, 2)] - oracle).abs() < 1e-6);
    }

    #[test]
    fn gram_is_symmetric_and_psd() {
        let fs = [
            LinearFunctional::bump(c(0.0, 1.0), 0.3),
            LinearFunctional::bump(c(0.2, 1.2), 0.4),
            LinearFunctional::CircleAverage { center: c(0.1, 0.9), radius: 0.25 },
            LinearFunctional::pair(c(-1.0, 2.0), c(1.0, 0.5), 0.3),
        ];
        let g = gram_matrix(Boundary::Dirichlet, &fs).unwrap();
        assert_eq!(g, g.transpose());
        let eig = g.clone().symmetric_eigenvalues();
        assert!(eig.min() > -1e-10 * g.norm());
        // exchange symmetry under permutation
        let perm = [fs[2].clone(), fs[0].clone(), fs[3].clone(), fs[1].clone()];
        let gp = gram_matrix(Boundary::Dirichlet, &perm).unwrap();
        assert!((gp[(0, 1)] - g[(2, 0)]).abs() < 1e-14);
        assert!((gp[(3, 2)] - g[(1, 3)]).abs() < 1e-14);
    }
}
