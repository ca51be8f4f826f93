// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

//! Null-vector equations for product-form partition functions
//! `Z = prod_{i<j} (x_i - x_j)^p` and the drifts they induce.

use serde::Serialize;

use crate::driving::check_distinct;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Forward or reverse (time-reversed) Loewner side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Forward,
    Reverse,
}

/// `Z = prod_{i<j} (x_i - x_j)^p` together with its `kappa` and side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxiliaryFunctionSpec<T> {
    pub p: T,
    pub kappa: T,
    pub side: Side,
}

impl<T: Real> AuxiliaryFunctionSpec<T> {
    /// `p = 2/kappa`.
    pub fn forward_canonical(kappa: T) -> Self {
        Self { p: T::lit(2.0) / kappa, kappa, side: Side::Forward }
    }

    /// `p = -2/kappa`.
    pub fn reverse_canonical(kappa: T) -> Self {
        Self { p: T::lit(-2.0) / kappa, kappa, side: Side::Reverse }
    }
}

/// Conformal weights attached to `kappa`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Weights<T> {
    /// `(kappa - 6) / (2 kappa)`
    pub h_kappa: T,
    /// `-(kappa + 6) / (2 kappa)`
    pub h_kappa_r: T,
    /// `1 + 3 (kappa + 4)^2 / (2 kappa)`
    pub c_kappa_r: T,
}

pub fn weights<T: Real>(kappa: T) -> Result<Weights<T>> {
    if !(kappa > T::zero()) {
        return Err(Error::Domain(format!("kappa = {kappa} must be positive")));
    }
    let two_k = T::lit(2.0) * kappa;
    let six = T::lit(6.0);
    let k4 = kappa + T::lit(4.0);
    Ok(Weights {
        h_kappa: (kappa - six) / two_k,
        h_kappa_r: -(kappa + six) / two_k,
        c_kappa_r: T::one() + T::lit(3.0) * k4 * k4 / two_k,
    })
}

/// `d_i log Z = p sum_j 1/(x_i - x_j)`.
pub fn d_log_z<T: Real>(spec: &AuxiliaryFunctionSpec<T>, x: &[T], i: usize) -> T {
    let mut s = T::zero();
    for (j, &xj) in x.iter().enumerate() {
        if j != i {
            s = s + T::one() / (x[i] - xj);
        }
    }
    spec.p * s
}

/// `d_i^2 log Z = -p sum_j 1/(x_i - x_j)^2`.
pub fn d2_log_z<T: Real>(spec: &AuxiliaryFunctionSpec<T>, x: &[T], i: usize) -> T {
    let mut s = T::zero();
    for (j, &xj) in x.iter().enumerate() {
        if j != i {
            let d = x[i] - xj;
            s = s + T::one() / (d * d);
        }
    }
    -spec.p * s
}

/// Terms of `(D_i Z) / Z`, in the order second derivative, first-order
/// terms, potential terms.
///
/// Forward: `D_i = (k/2) d_i^2 + 2 sum_j [ d_j / (x_j - x_i) + h / (x_j - x_i)^2 ]`
/// with `h = h_kappa`.
/// Reverse: `D_i = (k/2) d_i^2 - 2 sum_j [ d_j / (x_j - x_i) - h / (x_j - x_i)^2 ]`
/// with `h = h_kappa_r`.
fn operator_terms<T: Real>(spec: &AuxiliaryFunctionSpec<T>, x: &[T], i: usize) -> Result<Vec<T>> {
    let w = weights(spec.kappa)?;
    let two = T::lit(2.0);
    let dl = d_log_z(spec, x, i);
    let mut terms = vec![spec.kappa / two * (d2_log_z(spec, x, i) + dl * dl)];
    let (sgn, h) = match spec.side {
        Side::Forward => (T::one(), w.h_kappa),
        Side::Reverse => (-T::one(), w.h_kappa_r),
    };
    for j in 0..x.len() {
        if j == i {
            continue;
        }
        let d = x[j] - x[i];
        terms.push(sgn * two * d_log_z(spec, x, j) / d);
        terms.push(two * h / (d * d));
    }
    Ok(terms)
}

/// `|D_i Z / Z|` relative to the sum of the magnitudes of its terms.
pub fn annihilation_residual<T: Real>(spec: &AuxiliaryFunctionSpec<T>, x: &[T], i: usize) -> Result<T> {
    check_distinct(x)?;
    if i >= x.len() {
        return Err(Error::InvalidParameter(format!("index {i} out of range")));
    }
    let terms = operator_terms(spec, x, i)?;
    let total = terms.iter().fold(T::zero(), |a, &b| a + b);
    let scale = terms.iter().fold(T::zero(), |a, &b| a + b.abs());
    if scale == T::zero() {
        return Ok(T::zero());
    }
    Ok(total.abs() / scale)
}

/// Largest residual over all indices.
pub fn max_annihilation_residual<T: Real>(spec: &AuxiliaryFunctionSpec<T>, x: &[T]) -> Result<T> {
    let mut m = T::zero();
    for i in 0..x.len() {
        m = m.max(annihilation_residual(spec, x, i)?);
    }
    Ok(m)
}

/// `kappa d_i log Z +- sum_j 2/(x_i - x_j)`, plus on the forward side.
pub fn drift_from_z<T: Real>(spec: &AuxiliaryFunctionSpec<T>, x: &[T]) -> Result<Vec<T>> {
    check_distinct(x)?;
    let sgn = match spec.side {
        Side::Forward => T::one(),
        Side::Reverse => -T::one(),
    };
    let two = T::lit(2.0);
    Ok((0..x.len())
        .map(|i| {
            let mut s = T::zero();
            for (j, &xj) in x.iter().enumerate() {
                if j != i {
                    s = s + two / (x[i] - xj);
                }
            }
            spec.kappa * d_log_z(spec, x, i) + sgn * s
        })
        .collect())
}

/// Summary written by the `cft-check` experiment.
#[derive(Clone, Debug, Serialize)]
pub struct CftReport {
    pub side: Side,
    pub p: f64,
    pub kappa: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub max_residual: f64,
}
