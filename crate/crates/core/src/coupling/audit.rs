// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

//! Ito drift of the interpolating processes.
//!
//! Welding: `h*(z) = sum a_i log(f - Y_i) + Q log f'` with the reverse flow
//! `df = -sum 2 l_j/(f - Y_j) dt` and `dY_i = sqrt(k_i) dB_i - F_i dt`.
//!
//! Flow line: `h*(z) = -sum b_i log(g - X_i) - chi log g'` with the forward
//! flow `dg = sum 2/(g - X_j) dt` and `dX_i = sqrt(k) dB_i + F_i dt`; the real
//! field is `Im h*`.

use num_complex::Complex;
use serde::Serialize;

use crate::driving::{check_distinct, drift_eval, DriftScheme, DrivingModel, ParticleConfig};
use crate::error::{invalid, Result};
use crate::params::{c_constant, q_of};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMode {
    Welding,
    Flowline,
    InhomogeneousWelding,
}

/// Constants of the interpolating process.
///
/// `weights` are the `alpha_i` (welding) or `beta_i` (flow line). In the
/// homogeneous modes `lambdas` are all 1 and `kappas` all equal `kappa`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplingParams<T> {
    pub kappa: T,
    /// Liouville constant (welding modes).
    pub gamma: T,
    /// Imaginary-geometry constant (flow-line mode).
    pub chi: T,
    pub weights: Vec<T>,
    pub lambdas: Vec<T>,
    pub kappas: Vec<T>,
}

/// A point of the map together with the particle configuration and the
/// drift `F` the particles are assumed to follow.
#[derive(Clone, Debug)]
pub struct CouplingState<T> {
    pub mode: CouplingMode,
    pub params: CouplingParams<T>,
    /// `f^T_t(z)` (welding) or `g_t(z)` (flow line).
    pub map_point: Complex<T>,
    pub particles: ParticleConfig<T>,
    /// `F_i` at `particles`.
    pub drift: Vec<T>,
}

fn canonical_drift<T: Real>(x: &ParticleConfig<T>) -> Result<Vec<T>> {
    let model = DrivingModel::canonical(x.len(), T::one())?;
    drift_eval(&DriftScheme::Canonical, &model, x.points())
}

impl<T: Real> CouplingState<T> {
    /// Homogeneous welding with weights `alphas` and canonical `F`.
    pub fn welding(kappa: T, gamma: T, alphas: Vec<T>, particles: ParticleConfig<T>, point: Complex<T>) -> Result<Self> {
        let n = particles.len();
        let drift = canonical_drift(&particles)?;
        let s = Self {
            mode: CouplingMode::Welding,
            params: CouplingParams {
                kappa,
                gamma,
                chi: T::zero(),
                weights: alphas,
                lambdas: vec![T::one(); n],
                kappas: vec![kappa; n],
            },
            map_point: point,
            particles,
            drift,
        };
        s.validate()?;
        Ok(s)
    }

    /// Flow line with weights `betas` and canonical `F`.
    pub fn flowline(kappa: T, chi: T, betas: Vec<T>, particles: ParticleConfig<T>, point: Complex<T>) -> Result<Self> {
        let n = particles.len();
        let drift = canonical_drift(&particles)?;
        let s = Self {
            mode: CouplingMode::Flowline,
            params: CouplingParams {
                kappa,
                gamma: kappa.sqrt(),
                chi,
                weights: betas,
                lambdas: vec![T::one(); n],
                kappas: vec![kappa; n],
            },
            map_point: point,
            particles,
            drift,
        };
        s.validate()?;
        Ok(s)
    }

    /// Inhomogeneous welding; `F` is the weighted drift built from
    /// `lambdas` and `alphas`.
    pub fn inhomogeneous(
        gamma: T,
        kappas: Vec<T>,
        lambdas: Vec<T>,
        alphas: Vec<T>,
        particles: ParticleConfig<T>,
        point: Complex<T>,
    ) -> Result<Self> {
        let model = DrivingModel::inhomogeneous(kappas.clone(), lambdas.clone(), alphas.clone())?;
        let drift = drift_eval(&DriftScheme::Inhomogeneous, &model, particles.points())?;
        let s = Self {
            mode: CouplingMode::InhomogeneousWelding,
            params: CouplingParams { kappa: model.kappa, gamma, chi: T::zero(), weights: alphas, lambdas, kappas },
            map_point: point,
            particles,
            drift,
        };
        s.validate()?;
        Ok(s)
    }

    /// Replaces the drift values.
    pub fn with_drift(mut self, drift: Vec<T>) -> Self {
        self.drift = drift;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.particles.len();
        let p = &self.params;
        if p.weights.len() != n || p.lambdas.len() != n || p.kappas.len() != n || self.drift.len() != n {
            return Err(invalid("per-particle lists must have length N"));
        }
        if p.weights.iter().chain(&self.drift).any(|v| !v.is_finite()) {
            return Err(invalid("weights and drift must be finite"));
        }
        if !(p.kappa > T::zero()) || p.kappas.iter().any(|k| !(*k > T::zero())) {
            return Err(invalid("kappa must be positive"));
        }
        match self.mode {
            CouplingMode::Flowline => {
                if !p.chi.is_finite() {
                    return Err(invalid("chi must be finite"));
                }
            }
            _ => {
                if !(p.gamma > T::zero()) {
                    return Err(invalid("gamma must be positive"));
                }
            }
        }
        if self.mode == CouplingMode::InhomogeneousWelding {
            let total = p.lambdas.iter().fold(T::zero(), |a, &b| a + b);
            if (total - T::of(n)).abs() > T::lit(1e-12) {
                return Err(invalid("lambda_i must sum to N"));
            }
        }
        check_distinct(self.particles.points())?;
        if self.particles.points().iter().any(|&x| self.map_point == Complex::new(x, T::zero())) {
            return Err(crate::Error::Domain("map point sits on a particle".into()));
        }
        Ok(())
    }
}

/// Drift and noise loadings of `h*` at one state.
#[derive(Clone, Debug, Serialize)]
pub struct DriftAuditReport {
    pub mode: CouplingMode,
    pub params: CouplingParams<f64>,
    pub point: [f64; 2],
    pub drift_re: f64,
    pub drift_im: f64,
    /// `|drift|`.
    pub residual: f64,
    /// Sum of the moduli of the individual drift terms.
    pub scale: f64,
    /// `dB_i` coefficients, as `[re, im]`.
    pub loadings: Vec<[f64; 2]>,
    /// Coefficients of `1/(p - x_i)^2` after collecting terms.
    pub double_pole: Vec<f64>,
    /// Coefficients of `1/(p - x_i)` after partial fractions.
    pub simple_pole: Vec<f64>,
}

impl DriftAuditReport {
    /// Drift of the real field (`Re h*` for welding, `Im h*` for flow lines).
    pub fn field_drift(&self) -> f64 {
        match self.mode {
            CouplingMode::Flowline => self.drift_im,
            _ => self.drift_re,
        }
    }
}

fn c64<T: Real>(z: Complex<T>) -> [f64; 2] {
    [z.re.as_f64(), z.im.as_f64()]
}

/// Drift and loadings of `dh*` at `state`, assembled term by term from Ito's
/// formula (no simplification), together with the collected pole
/// coefficients.
pub fn drift_audit<T: Real>(state: &CouplingState<T>) -> Result<DriftAuditReport> {
    state.validate()?;
    let x = state.particles.points();
    let p = &state.params;
    let z = state.map_point;
    let n = x.len();
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let zero = Complex::new(T::zero(), T::zero());
    let r: Vec<Complex<T>> = x.iter().map(|&xi| (z - xi).inv()).collect();

    let mut terms: Vec<Complex<T>> = Vec::with_capacity(n * (n + 3));
    let mut loadings = Vec::with_capacity(n);
    let mut double_pole = Vec::with_capacity(n);
    let mut simple_pole = Vec::with_capacity(n);
    match state.mode {
        CouplingMode::Welding | CouplingMode::InhomogeneousWelding => {
            let q = q_of(p.gamma);
            for i in 0..n {
                let a = p.weights[i];
                // a_i d log(f - Y_i)
                for j in 0..n {
                    terms.push(-(r[i] * r[j]) * (two * p.lambdas[j] * a));
                }
                terms.push(r[i] * (a * state.drift[i]));
                terms.push(-(r[i] * r[i]) * (half * p.kappas[i] * a));
                // Q d log f'
                terms.push(r[i] * r[i] * (two * q * p.lambdas[i]));
                loadings.push(c64(-r[i] * (a * p.kappas[i].sqrt())));
                double_pole.push((two * c_constant(a, p.kappas[i], p.lambdas[i], p.gamma)).as_f64());
                let mut s = T::zero();
                for j in 0..n {
                    if j != i {
                        s = s + (a * p.lambdas[j] + p.weights[j] * p.lambdas[i]) / (x[i] - x[j]);
                    }
                }
                simple_pole.push((a * state.drift[i] - two * s).as_f64());
            }
        }
        CouplingMode::Flowline => {
            let k = p.kappa;
            for i in 0..n {
                let b = p.weights[i];
                // -b_i d log(g - X_i)
                for j in 0..n {
                    terms.push(-(r[i] * r[j]) * (two * b));
                }
                terms.push(r[i] * (b * state.drift[i]));
                terms.push(r[i] * r[i] * (half * k * b));
                // -chi d log g'
                terms.push(r[i] * r[i] * (two * p.chi));
                loadings.push(c64(r[i] * (b * k.sqrt())));
                double_pole.push((-two * b + half * k * b + two * p.chi).as_f64());
                let mut s = T::zero();
                for j in 0..n {
                    if j != i {
                        s = s + (b + p.weights[j]) / (x[i] - x[j]);
                    }
                }
                simple_pole.push((b * state.drift[i] - two * s).as_f64());
            }
        }
    }
    let drift = terms.iter().fold(zero, |a, &b| a + b);
    let scale = terms.iter().fold(T::zero(), |a, b| a + b.norm());
    Ok(DriftAuditReport {
        mode: state.mode,
        params: CouplingParams {
            kappa: p.kappa.as_f64(),
            gamma: p.gamma.as_f64(),
            chi: p.chi.as_f64(),
            weights: p.weights.iter().map(|v| v.as_f64()).collect(),
            lambdas: p.lambdas.iter().map(|v| v.as_f64()).collect(),
            kappas: p.kappas.iter().map(|v| v.as_f64()).collect(),
        },
        point: c64(z),
        drift_re: drift.re.as_f64(),
        drift_im: drift.im.as_f64(),
        residual: drift.norm().as_f64(),
        scale: scale.as_f64(),
        loadings,
        double_pole,
        simple_pole,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::chi_of;

    fn cfg(x: &[f64]) -> ParticleConfig<f64> {
        ParticleConfig::on_line(x.to_vec()).unwrap()
    }

    fn recollected(rep: &DriftAuditReport, x: &[f64]) -> Complex<f64> {
        let z = Complex::new(rep.point[0], rep.point[1]);
        x.iter()
            .enumerate()
            .map(|(i, &xi)| {
                let r = (z - xi).inv();
                r * r * rep.double_pole[i] + r * rep.simple_pole[i]
            })
            .sum()
    }

    #[test]
    fn welding_canonical_vanishes() {
        let s = CouplingState::welding(1.0, 1.0, vec![2.0, 2.0], cfg(&[-1.0, 1.0]), Complex::new(0.5, 2.0)).unwrap();
        let r = drift_audit(&s).unwrap();
        assert!(r.residual < 1e-12, "{}", r.residual);
        // loadings are -2/(f - Y_i)
        for (l, &y) in r.loadings.iter().zip(&[-1.0, 1.0]) {
            let want: Complex<f64> = -2.0 / (Complex::new(0.5, 2.0) - y);
            assert!((l[0] - want.re).abs() < 1e-15 && (l[1] - want.im).abs() < 1e-15);
        }
    }

    #[test]
    fn welding_mismatched_kappa_drifts() {
        let s = CouplingState::welding(2.0, 1.0, vec![2.0, 2.0], cfg(&[-1.0, 1.0]), Complex::new(0.5, 2.0)).unwrap();
        assert!(drift_audit(&s).unwrap().residual > 1e-3);
    }

    #[test]
    fn raw_drift_matches_collected_poles() {
        let x = [-1.3, 0.2, 0.9];
        let z = Complex::new(0.4, 0.7);
        let s = CouplingState::welding(1.7, 1.1, vec![1.9, 2.3, 1.2], cfg(&x), z)
            .unwrap()
            .with_drift(vec![0.3, -1.0, 2.0]);
        let r = drift_audit(&s).unwrap();
        let c = recollected(&r, &x);
        assert!((c.re - r.drift_re).abs() < 1e-12 && (c.im - r.drift_im).abs() < 1e-12);
        let f = CouplingState::flowline(2.5, 0.4, vec![1.0, 0.7, 1.6], cfg(&x), z).unwrap().with_drift(vec![1.0, 0.0, -0.5]);
        let r = drift_audit(&f).unwrap();
        let c = recollected(&r, &x);
        assert!((c.re - r.drift_re).abs() < 1e-12 && (c.im - r.drift_im).abs() < 1e-12);
    }

    #[test]
    fn flowline_canonical_vanishes_and_perturbation_does_not() {
        let k = 2.0f64;
        let b = 2.0 / k.sqrt();
        let x = cfg(&[-0.5, 0.3, 1.4]);
        let z = Complex::new(0.2, 0.9);
        let s = CouplingState::flowline(k, chi_of(k), vec![b; 3], x.clone(), z).unwrap();
        let r = drift_audit(&s).unwrap();
        assert!(r.residual < 1e-12);
        for (l, &xi) in r.loadings.iter().zip(x.points()) {
            assert!((l[1] - (2.0 / (z - xi)).im).abs() < 1e-14);
        }
        let s = CouplingState::flowline(k, chi_of(k) + 0.1, vec![b; 3], x, z).unwrap();
        assert!(drift_audit(&s).unwrap().residual > 1e-4);
    }

    #[test]
    fn symmetric_point_has_no_field_drift() {
        // N=1 at 0, z=i: 1/(i)^2 is real, so Im h* has no drift for any chi
        for chi in [0.0, 0.7, 3.0] {
            let s = CouplingState::flowline(3.0, chi, vec![1.0], cfg(&[0.0]), Complex::new(0.0, 1.0)).unwrap();
            assert!(drift_audit(&s).unwrap().field_drift().abs() < 1e-15);
        }
    }

    #[test]
    fn inhomogeneous_with_solved_weights_vanishes() {
        let gamma = 1.2;
        let kappas = vec![0.8, 1.5, 2.2];
        let lambdas = vec![0.5, 1.0, 1.5];
        let alphas: Vec<f64> =
            kappas.iter().zip(&lambdas).map(|(&k, &l)| crate::params::solve_alpha(k, l, gamma)).collect();
        let s = CouplingState::inhomogeneous(gamma, kappas, lambdas, alphas, cfg(&[-1.0, 0.1, 2.0]), Complex::new(0.3, 0.5))
            .unwrap();
        assert!(drift_audit(&s).unwrap().residual < 1e-12);
    }

    #[test]
    fn rejects_bad_states() {
        assert!(CouplingState::welding(1.0, 1.0, vec![2.0], cfg(&[0.0]), Complex::new(0.0, 0.0)).is_err());
        assert!(CouplingState::welding(1.0, 1.0, vec![2.0, 2.0], cfg(&[0.0]), Complex::new(0.0, 1.0)).is_err());
    }
}
