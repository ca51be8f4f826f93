// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

use num_complex::Complex;
use serde::Serialize;

use crate::driving::{time_reverse, DrivingPath};
use crate::error::{Error, Result};
use crate::field::{green, Boundary};
use crate::loewner::MapEvaluator;
use crate::scalar::Real;
use crate::tolerances::DISCREPANCY_FLOOR;

/// Which bracket identity to check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossMode {
    /// Reverse flow, real parts, free Green function.
    WeldingFree,
    /// Forward flow, imaginary parts, Dirichlet Green function.
    FlowlineDirichlet,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossVariationReport {
    pub mode: CrossMode,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub z: [f64; 2],
    pub w: [f64; 2],
    /// Integrated bracket.
    pub lhs: f64,
    /// Decrease of the Green function between the transported points.
    pub rhs: f64,
    pub relative_discrepancy: f64,
}

/// Compares `int_0^T sum_i A(z) A(w) dt` with `-(G(map_T z, map_T w) - G(z, w))`.
///
/// In welding mode the map is the reverse flow driven by `X_{T-t}` and `A`
/// is the real part of `2/(map - particle)`; in flow-line mode the forward
/// flow and imaginary parts.
pub fn cross_variation_check<T: Real>(
    mode: CrossMode,
    driving: &DrivingPath<T>,
    z: Complex<T>,
    w: Complex<T>,
    t: T,
) -> Result<CrossVariationReport> {
    if z == w {
        return Err(Error::Singularity);
    }
    if !(z.im > T::zero() && w.im > T::zero()) {
        return Err(Error::Domain("both points must lie in the upper half-plane".into()));
    }
    let reversed;
    let (ev, imaginary, kind) = match mode {
        CrossMode::WeldingFree => {
            reversed = time_reverse(driving, t)?;
            (MapEvaluator::reverse(&reversed), false, Boundary::Free)
        }
        CrossMode::FlowlineDirichlet => {
            driving.grid_index(t)?;
            (MapEvaluator::forward(driving), true, Boundary::Dirichlet)
        }
    };
    let (zt, wt, lhs, early) = ev.transport_pair(z, w, t, imaginary)?;
    if let Some(s) = early {
        return Err(Error::EarlyStop { t_reached: s.as_f64() });
    }
    let rhs = -(green(kind, zt, wt)? - green(kind, z, w)?);
    let (lhs, rhs) = (lhs.as_f64(), rhs.as_f64());
    // both sides vanish on symmetric configurations; do not divide rounding by rounding
    let denom = rhs.abs().max(lhs.abs()).max(DISCREPANCY_FLOOR);
    let relative_discrepancy = (lhs - rhs).abs() / denom;
    Ok(CrossVariationReport {
        mode,
        n: driving.n(),
        t: t.as_f64(),
        z: [z.re.as_f64(), z.im.as_f64()],
        w: [w.re.as_f64(), w.im.as_f64()],
        lhs,
        rhs,
        relative_discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driving::{simulate_driving, DrivingModel, ParticleConfig};

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn single_slit_closed_form() {
        let x0 = ParticleConfig::on_line(vec![0.0]).unwrap();
        let p = DrivingPath::constant(x0, 0.1, 1e-4).unwrap();
        let (z, w) = (c(0.3, 1.0), c(-0.5, 2.0));
        let r = cross_variation_check(CrossMode::WeldingFree, &p, z, w, 0.1).unwrap();
        // f_t(z) = sqrt(z^2 - 4t), upper branch
        let ft = |u: Complex<f64>| {
            let s = (u * u - 4.0 * 0.1).sqrt();
            if s.im < 0.0 { -s } else { s }
        };
        let g = |a: Complex<f64>, b: Complex<f64>| -(a - b).norm().ln() - (a - b.conj()).norm().ln();
        let exact = -(g(ft(z), ft(w)) - g(z, w));
        assert!((r.rhs - exact).abs() < 1e-10);
        assert!(r.relative_discrepancy < 1e-3, "{r:?}");
    }

    #[test]
    fn symmetric_pair_has_both_sides_zero() {
        let x0 = ParticleConfig::on_line(vec![0.0]).unwrap();
        let p = DrivingPath::constant(x0, 0.1, 1e-4).unwrap();
        let r = cross_variation_check(CrossMode::WeldingFree, &p, c(0.0, 1.0), c(0.0, 2.0), 0.1).unwrap();
        assert!(r.lhs.abs() < 1e-14 && r.rhs.abs() < 1e-14);
        assert!(r.relative_discrepancy < 1e-3);
    }

    #[test]
    fn zero_time_is_exactly_zero() {
        let x0 = ParticleConfig::on_line(vec![0.0]).unwrap();
        let p = DrivingPath::constant(x0, 0.1, 1e-3).unwrap();
        for mode in [CrossMode::WeldingFree, CrossMode::FlowlineDirichlet] {
            let r = cross_variation_check(mode, &p, c(0.3, 1.0), c(-1.0, 0.5), 0.0).unwrap();
            assert_eq!((r.lhs, r.rhs, r.relative_discrepancy), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn dyson_flowline_bracket() {
        let m = DrivingModel::canonical(2, 2.0).unwrap();
        let x0 = ParticleConfig::on_line(vec![-0.5, 0.5]).unwrap();
        let p = simulate_driving(&m, &x0, 0.2, 1e-4, 17).unwrap();
        let r = cross_variation_check(CrossMode::FlowlineDirichlet, &p, c(0.2, 1.5), c(-1.0, 1.0), 0.2).unwrap();
        assert!(r.relative_discrepancy < 1e-2, "{r:?}");
        let r = cross_variation_check(CrossMode::WeldingFree, &p, c(0.2, 1.5), c(-1.0, 1.0), 0.2).unwrap();
        assert!(r.relative_discrepancy < 1e-2, "{r:?}");
    }

    #[test]
    fn swallowed_point_stops_early() {
        let x0 = ParticleConfig::on_line(vec![0.0]).unwrap();
        let p = DrivingPath::constant(x0, 1.0, 1e-3).unwrap();
        let e = cross_variation_check(CrossMode::FlowlineDirichlet, &p, c(0.0, 1.0), c(1.0, 1.0), 1.0).unwrap_err();
        assert!(matches!(e, Error::EarlyStop { t_reached } if (t_reached - 0.25).abs() < 1e-2));
    }
}
