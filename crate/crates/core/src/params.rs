// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

//! Relations tying the Liouville, Loewner and imaginary-geometry constants.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// `Q = 2/gamma + gamma/2`.
pub fn q_of<T: Real>(gamma: T) -> T {
    T::lit(2.0) / gamma + gamma / T::lit(2.0)
}

/// `chi = 2/sqrt(kappa) - sqrt(kappa)/2`.
pub fn chi_of<T: Real>(kappa: T) -> T {
    let s = kappa.sqrt();
    T::lit(2.0) / s - s / T::lit(2.0)
}

/// `C(alpha, kappa_i, lambda_i, gamma) = -(lambda + kappa_i/4) alpha + Q lambda`,
/// the coefficient of the double pole in the welding drift.
pub fn c_constant<T: Real>(alpha: T, kappa_i: T, lambda: T, gamma: T) -> T {
    -(lambda + kappa_i / T::lit(4.0)) * alpha + q_of(gamma) * lambda
}

/// The weight solving `C = 0`: `Q lambda / (lambda + kappa_i/4)`.
pub fn solve_alpha<T: Real>(kappa_i: T, lambda: T, gamma: T) -> T {
    q_of(gamma) * lambda / (lambda + kappa_i / T::lit(4.0))
}

/// `4Q/(4 + kappa)`, the homogeneous solution of `C = 0`.
pub fn homogeneous_alpha<T: Real>(kappa: T, gamma: T) -> T {
    T::lit(4.0) * q_of(gamma) / (T::lit(4.0) + kappa)
}

/// One consistent set of constants for a given `gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CanonicalParams {
    pub gamma: f64,
    pub kappa: f64,
    pub q: f64,
    /// Marked-point weight `2/gamma`.
    pub alpha: f64,
    /// Dyson parameter `8/kappa`.
    pub beta: f64,
    pub chi: f64,
    /// Arg-decoration weight `2/sqrt(kappa)`.
    pub arg_weight: f64,
}

impl CanonicalParams {
    pub fn from_gamma(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(invalid(format!("gamma = {gamma} must lie in (0, 2)")));
        }
        let kappa = gamma * gamma;
        let p = Self {
            gamma,
            kappa,
            q: q_of(gamma),
            alpha: 2.0 / gamma,
            beta: 8.0 / kappa,
            chi: chi_of(kappa),
            arg_weight: 2.0 / gamma,
        };
        debug_assert!(p.consistent());
        Ok(p)
    }

    /// `kappa > 0` without the `gamma < 2` restriction, for the flow-line side.
    pub fn from_kappa(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(invalid(format!("kappa = {kappa} must be positive")));
        }
        let gamma = kappa.sqrt();
        Ok(Self {
            gamma,
            kappa,
            q: q_of(gamma),
            alpha: 2.0 / gamma,
            beta: 8.0 / kappa,
            chi: chi_of(kappa),
            arg_weight: 2.0 / gamma,
        })
    }

    /// All relations hold to a few ulps.
    pub fn consistent(&self) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 8.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0);
        close(self.kappa, self.gamma * self.gamma)
            && close(self.alpha * self.gamma, 2.0)
            && close(self.beta * self.kappa, 8.0)
            && close((1.0 + self.kappa / 4.0) * self.alpha, self.q)
            && close(self.chi, self.arg_weight - self.gamma / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_constants() {
        let p = CanonicalParams::from_gamma(1.0).unwrap();
        assert_eq!((p.kappa, p.alpha, p.beta, p.q, p.chi), (1.0, 2.0, 8.0, 2.5, 1.5));
        assert!(p.consistent());
        assert!(CanonicalParams::from_gamma(2.0).is_err());
        assert!(CanonicalParams::from_gamma(0.0).is_err());
        for g in [0.1, 0.5, 1.3, 1.99] {
            assert!(CanonicalParams::from_gamma(g).unwrap().consistent(), "{g}");
        }
    }

    #[test]
    fn chi_vanishes_at_four() {
        assert_eq!(chi_of(4.0f64), 0.0);
        assert!((chi_of(2.0f64) - (2f64.sqrt() - 2f64.sqrt() / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn solved_alpha_zeroes_c() {
        for &(k, l, g) in &[(1.0f64, 1.0, 1.0), (2.5, 0.3, 1.7), (0.4, 2.2, 0.6)] {
            let a = solve_alpha(k, l, g);
            assert!(c_constant(a, k, l, g).abs() < 1e-14);
        }
        let g = 1.3f64;
        assert!((homogeneous_alpha(g * g, g) - 2.0 / g).abs() < 1e-15);
        assert!((solve_alpha(g * g, 1.0, g) - 2.0 / g).abs() < 1e-15);
    }
}
