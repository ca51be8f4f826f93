// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

//! Fixed-scale quantum boundary length and area.

use num_complex::Complex;

use serde::Serialize;

use super::{sample_pairings_with, Boundary, FieldModel, FreeConvention, LinearFunctional};
use crate::error::{invalid, Error, Result};

/// Midpoint grid on `[a, b]` whose nodes carry semicircle averages of radius `eps`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryGrid {
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub xs: Vec<f64>,
    pub dx: f64,
}

impl BoundaryGrid {
    /// Grid with spacing at most `spacing`, which must not exceed `eps`.
    pub fn new(a: f64, b: f64, eps: f64, spacing: f64) -> Result<Self> {
        if !(b > a) || !(eps > 0.0) || !(spacing > 0.0) {
            return Err(invalid("need a < b, eps > 0 and spacing > 0"));
        }
        if spacing > eps * (1.0 + 1e-12) {
            return Err(Error::Grid(format!("spacing {spacing} is coarser than eps = {eps}")));
        }
        let n = ((b - a) / spacing - 1e-9).ceil().max(1.0) as usize;
        let dx = (b - a) / n as f64;
        let xs = (0..n).map(|k| a + (k as f64 + 0.5) * dx).collect();
        Ok(Self { a, b, eps, xs, dx })
    }

    /// Semicircle averages at the grid nodes.
    pub fn functionals(&self) -> Vec<LinearFunctional> {
        self.xs.iter().map(|&x| LinearFunctional::SemicircleAverage { x, radius: self.eps }).collect()
    }

    fn decoration(&self, model: &FieldModel) -> Result<Vec<f64>> {
        self.xs
            .iter()
            .map(|&x| model.decorations.iter().map(|d| d.semicircle_average(x, self.eps)).sum())
            .collect()
    }
}

/// `sum eps^(g^2/4) exp(g h_eps(x_k) / 2) dx` where `h_eps` is the drawn
/// semicircle average plus the model's decorations.
pub fn quantum_boundary_length(model: &FieldModel, grid: &BoundaryGrid, draw: &[f64]) -> Result<f64> {
    if draw.len() != grid.xs.len() {
        return Err(invalid(format!("{} values for {} grid nodes", draw.len(), grid.xs.len())));
    }
    let g = model.gamma;
    let pre = grid.eps.powf(g * g / 4.0) * grid.dx;
    let deco = grid.decoration(model)?;
    Ok(draw.iter().zip(&deco).map(|(h, u)| pre * (0.5 * g * (h + u)).exp()).sum())
}

/// Exact mean of [`quantum_boundary_length`] when the draw is centred
/// Gaussian with the given node variances.
pub fn expected_boundary_length(model: &FieldModel, grid: &BoundaryGrid, variances: &[f64]) -> Result<f64> {
    let g = model.gamma;
    let pre = grid.eps.powf(g * g / 4.0) * grid.dx;
    let deco = grid.decoration(model)?;
    Ok(variances.iter().zip(&deco).map(|(v, u)| pre * (0.5 * g * u + g * g * v / 8.0).exp()).sum())
}

/// Monte Carlo estimate of the mean fixed-`eps` boundary length.
#[derive(Clone, Debug, Serialize)]
pub struct LengthEstimate {
    pub eps: f64,
    pub nodes: usize,
    pub replicas: usize,
    pub mean: f64,
    pub std_error: f64,
    /// Closed-form mean from the node variances.
    pub exact_mean: f64,
}

/// Samples the semicircle averages on `grid` and averages
/// [`quantum_boundary_length`] over `replicas` draws. Free boundary
/// conditions use the kernel representative (the averages carry mass).
pub fn estimate_boundary_length(model: &FieldModel, grid: &BoundaryGrid, replicas: usize, seed: u64) -> Result<LengthEstimate> {
    if model.boundary != Boundary::Free {
        return Err(invalid("boundary length needs free boundary conditions"));
    }
    if replicas < 2 {
        return Err(invalid("need at least two replicas"));
    }
    let fs = grid.functionals();
    let draws = sample_pairings_with(model.boundary, &fs, replicas, seed, FreeConvention::KernelRepresentative)?;
    let lengths: Vec<f64> = draws
        .samples
        .row_iter()
        .map(|r| quantum_boundary_length(model, grid, r.transpose().as_slice()))
        .collect::<Result<_>>()?;
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<f64>() / n;
    let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let variances: Vec<f64> = (0..fs.len()).map(|k| draws.gram[(k, k)]).collect();
    Ok(LengthEstimate {
        eps: grid.eps,
        nodes: fs.len(),
        replicas,
        mean,
        std_error: (var / n).sqrt(),
        exact_mean: expected_boundary_length(model, grid, &variances)?,
    })
}

/// Cell-centre grid on a rectangle `[x0, x1] x [y0, y1]` of the half-plane
/// carrying circle averages of radius `eps`.
#[derive(Clone, Debug, PartialEq)]
pub struct AreaGrid {
    pub eps: f64,
    pub points: Vec<Complex<f64>>,
    pub cell: f64,
}

impl AreaGrid {
    pub fn new(x: (f64, f64), y: (f64, f64), eps: f64, spacing: f64) -> Result<Self> {
        if spacing > eps * (1.0 + 1e-12) {
            return Err(Error::Grid(format!("spacing {spacing} is coarser than eps = {eps}")));
        }
        if !(x.1 > x.0 && y.1 > y.0 && y.0 >= eps && spacing > 0.0) {
            return Err(invalid("rectangle must sit at height >= eps"));
        }
        let nx = ((x.1 - x.0) / spacing - 1e-9).ceil() as usize;
        let ny = ((y.1 - y.0) / spacing - 1e-9).ceil() as usize;
        let (hx, hy) = ((x.1 - x.0) / nx as f64, (y.1 - y.0) / ny as f64);
        let points = (0..ny)
            .flat_map(|j| (0..nx).map(move |i| Complex::new(x.0 + (i as f64 + 0.5) * hx, y.0 + (j as f64 + 0.5) * hy)))
            .collect();
        Ok(Self { eps, points, cell: hx * hy })
    }

    pub fn functionals(&self) -> Vec<LinearFunctional> {
        self.points.iter().map(|&c| LinearFunctional::CircleAverage { center: c, radius: self.eps }).collect()
    }
}

/// `sum eps^(g^2/2) exp(g h_eps(z_k)) dA`, decorations evaluated at the centres.
pub fn quantum_area(model: &FieldModel, grid: &AreaGrid, draw: &[f64]) -> Result<f64> {
    if draw.len() != grid.points.len() {
        return Err(invalid("one value per grid cell"));
    }
    let g = model.gamma;
    let pre = grid.eps.powf(g * g / 2.0) * grid.cell;
    let mut s = 0.0;
    for (z, h) in grid.points.iter().zip(draw) {
        s += pre * (g * (h + model.decoration_value(*z)?)).exp();
    }
    Ok(s)
}
