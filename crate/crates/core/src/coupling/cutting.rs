// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

//! Pull-back of field pairings through the uniformizing map.

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::Serialize;

use super::crossvar::CrossMode;
use crate::driving::{time_reverse, DrivingPath};
use crate::error::{Error, Result};
use crate::field::{gram_matrix_with, Boundary, FieldModel, FreeConvention, LinearFunctional};
use crate::loewner::{MapEvaluator, Tracked};

type C64 = Complex<f64>;

/// One functional expressed in the slit domain.
#[derive(Clone, Debug, Serialize)]
pub struct PulledFunctional {
    pub source: LinearFunctional,
    /// Quadrature nodes `(w_k, c_k)` of the functional in the upper half-plane.
    pub nodes: Vec<(C64, f64)>,
    /// `g_T^{-1}(w_k)`.
    pub images: Vec<C64>,
    /// Continuous branch of `log (g_T^{-1})'(w_k)`.
    pub log_derivatives: Vec<C64>,
    /// `Q sum_k c_k log |(g_T^{-1})'(w_k)|`.
    pub mean_offset: f64,
}

impl PulledFunctional {
    /// Total mass of the pushed-forward measure.
    pub fn mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.1).sum()
    }

    /// `sum_k c_k u(g_T^{-1}(w_k))`.
    pub fn pair_with(&self, u: impl Fn(C64) -> Result<f64>) -> Result<f64> {
        self.images.iter().zip(&self.nodes).map(|(&z, &(_, c))| Ok(c * u(z)?)).sum()
    }
}

/// Pairing recipe for `H o g_T^{-1} + Q log |(g_T^{-1})'|`.
#[derive(Clone, Debug, Serialize)]
pub struct CuttingRecipe {
    #[serde(rename = "T")]
    pub t: f64,
    pub q: f64,
    pub functionals: Vec<PulledFunctional>,
}

impl CuttingRecipe {
    /// Mean pairings of the cut field when `H` is `field`'s decoration plus
    /// a centred Gaussian field.
    pub fn decoration_means(&self, field: &FieldModel) -> Result<Vec<f64>> {
        self.functionals
            .iter()
            .map(|f| Ok(f.pair_with(|z| field.decoration_value(z))? + f.mean_offset))
            .collect()
    }

    /// Covariance of the cut Gaussian part, `base` being the Gram matrix of
    /// the source functionals under `boundary`.
    pub fn covariance(&self, boundary: Boundary, base: &DMatrix<f64>) -> DMatrix<f64> {
        let maps: Vec<MappedNodes<'_>> = self
            .functionals
            .iter()
            .map(|f| MappedNodes { nodes: &f.nodes, images: &f.images, log_derivatives: &f.log_derivatives })
            .collect();
        transported_gram(boundary, base, &maps)
    }
}

/// Nodes together with their images and log-derivatives under a conformal map.
pub(crate) struct MappedNodes<'a> {
    pub nodes: &'a [(C64, f64)],
    pub images: &'a [C64],
    pub log_derivatives: &'a [C64],
}

/// `G(phi u, phi v) - G(u, v)`, continued to `u = v`.
fn kernel_change(kind: Boundary, u: C64, pu: C64, ldu: C64, v: C64, pv: C64) -> f64 {
    let near = if u == v { ldu.re } else { ((pu - pv).norm() / (u - v).norm()).ln() };
    let far = ((pu - pv.conj()).norm() / (u - v.conj()).norm()).ln();
    match kind {
        Boundary::Dirichlet => far - near,
        Boundary::Free => -near - far,
    }
}

/// Gram matrix of measures transported by a conformal map: `base` plus the
/// node sum of the (smooth) change of the Green kernel.
pub(crate) fn transported_gram(kind: Boundary, base: &DMatrix<f64>, maps: &[MappedNodes<'_>]) -> DMatrix<f64> {
    let m = maps.len();
    let mut out = base.clone();
    for a in 0..m {
        for b in a..m {
            let (ma, mb) = (&maps[a], &maps[b]);
            let mut s = 0.0;
            for (k, &(u, cu)) in ma.nodes.iter().enumerate() {
                for (l, &(v, cv)) in mb.nodes.iter().enumerate() {
                    s += cu * cv * kernel_change(kind, u, ma.images[k], ma.log_derivatives[k], v, mb.images[l]);
                }
            }
            out[(a, b)] += s;
            if a != b {
                out[(b, a)] += s;
            }
        }
    }
    out
}

fn tracked_parts(tr: &[Tracked<f64>]) -> (Vec<C64>, Vec<C64>) {
    (tr.iter().map(|t| t.value).collect(), tr.iter().map(|t| t.log_derivative).collect())
}

/// Realises `g_T^{-1*} H = H o g_T^{-1} + Q log |(g_T^{-1})'|` at the level of
/// pairings: each functional's nodes are pushed through `g_T^{-1}` (weights
/// unchanged, as for any push-forward of a discrete measure) and the shift is
/// recorded as a mean offset.
pub fn cutting_operation(
    field: &FieldModel,
    fs: &[LinearFunctional],
    driving: &DrivingPath<f64>,
    t: f64,
) -> Result<CuttingRecipe> {
    let ev = MapEvaluator::forward(driving);
    driving.grid_index(t)?;
    let q = field.q();
    let functionals = fs
        .iter()
        .map(|f| {
            let nodes = f.quadrature_nodes();
            let tr: Vec<Tracked<f64>> = nodes
                .iter()
                .map(|&(w, _)| {
                    ev.invert_tracked(w, t).map_err(|e| match e {
                        Error::Inversion { t } | Error::Stiffness { t } => {
                            Error::Support(format!("{f:?} could not be pulled back (t = {t})"))
                        }
                        e => e,
                    })
                })
                .collect::<Result<_>>()?;
            let (images, log_derivatives) = tracked_parts(&tr);
            let mean_offset = q * nodes.iter().zip(&log_derivatives).map(|(n, l)| n.1 * l.re).sum::<f64>();
            Ok(PulledFunctional { source: f.clone(), nodes, images, log_derivatives, mean_offset })
        })
        .collect::<Result<_>>()?;
    Ok(CuttingRecipe { t, q, functionals })
}

/// `E_s(rho)` at the requested times: the energy of `rho` for the Green
/// function transported by the reverse flow (welding) or the forward flow
/// (flow line).
pub fn energy_profile(
    mode: CrossMode,
    driving: &DrivingPath<f64>,
    f: &LinearFunctional,
    horizon: f64,
    times: &[f64],
) -> Result<Vec<f64>> {
    let (kind, reversed) = match mode {
        CrossMode::WeldingFree => (Boundary::Free, Some(time_reverse(driving, horizon)?)),
        CrossMode::FlowlineDirichlet => (Boundary::Dirichlet, None),
    };
    let ev = match &reversed {
        Some(r) => MapEvaluator::reverse(r),
        None => MapEvaluator::forward(driving),
    };
    let base = gram_matrix_with(kind, std::slice::from_ref(f), FreeConvention::KernelRepresentative)?;
    let nodes = f.quadrature_nodes();
    let pts: Vec<C64> = nodes.iter().map(|n| n.0).collect();
    times
        .iter()
        .map(|&s| {
            let tr = ev.evolve(&pts, s)?;
            if let Some(bad) = tr.iter().find(|t| t.swallowed) {
                return Err(Error::EarlyStop { t_reached: bad.t });
            }
            let (images, log_derivatives) = tracked_parts(&tr);
            let g = transported_gram(
                kind,
                &base,
                &[MappedNodes { nodes: &nodes, images: &images, log_derivatives: &log_derivatives }],
            );
            Ok(g[(0, 0)])
        })
        .collect()
}
