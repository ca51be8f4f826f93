// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{gram_matrix_with, Boundary, FreeConvention, LinearFunctional};
use crate::error::{Error, Result};
use crate::rng;
use crate::tolerances::PSD_SLACK;

/// Gaussian draws of a functional family.
#[derive(Clone, Debug)]
pub struct PairingSample {
    pub gram: DMatrix<f64>,
    /// One row per replica.
    pub samples: DMatrix<f64>,
    pub seed: u64,
}

impl PairingSample {
    /// Writes `replica,f1,...,fM`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "replica")?;
        for j in 1..=self.samples.ncols() {
            write!(w, ",f{j}")?;
        }
        writeln!(w)?;
        for r in 0..self.samples.nrows() {
            write!(w, "{r}")?;
            for j in 0..self.samples.ncols() {
                write!(w, ",{:.16e}", self.samples[(r, j)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Square root `L` with `L L^T = gram`, from the spectral decomposition.
///
/// Tiny negative eigenvalues (relative size below the PSD slack) are clipped;
/// anything larger is a factorisation error.
pub fn gaussian_factor(gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = gram.nrows();
    if m == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let sym = (gram + gram.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let scale = gram.norm().max(f64::MIN_POSITIVE);
    let min = eig.eigenvalues.min();
    if min < -PSD_SLACK * scale || !min.is_finite() {
        return Err(Error::Factorization { min_eig: min });
    }
    let roots = DVector::from_iterator(m, eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// Draws `replicas` independent centred Gaussian vectors with covariance
/// given by the Gram matrix of `fs`.
pub fn sample_pairings(boundary: Boundary, fs: &[LinearFunctional], replicas: usize, seed: u64) -> Result<PairingSample> {
    sample_pairings_with(boundary, fs, replicas, seed, FreeConvention::ZeroMassOnly)
}

/// [`sample_pairings`] with an explicit free-boundary convention.
pub fn sample_pairings_with(
    boundary: Boundary,
    fs: &[LinearFunctional],
    replicas: usize,
    seed: u64,
    convention: FreeConvention,
) -> Result<PairingSample> {
    let gram = gram_matrix_with(boundary, fs, convention)?;
    let factor = gaussian_factor(&gram)?;
    let samples = draw(&factor, replicas, seed);
    Ok(PairingSample { gram, samples, seed })
}

pub(crate) fn draw(factor: &DMatrix<f64>, replicas: usize, seed: u64) -> DMatrix<f64> {
    let m = factor.nrows();
    let mut g = rng::stream(seed, 0);
    let z = DMatrix::from_fn(m, replicas, |_, _| g.sample::<f64, _>(StandardNormal));
    (factor * z).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn fam() -> Vec<LinearFunctional> {
        vec![
            LinearFunctional::bump(Complex::new(0.0, 1.0), 0.3),
            LinearFunctional::CircleAverage { center: Complex::new(0.5, 1.2), radius: 0.2 },
        ]
    }

    #[test]
    fn variance_matches_gram() {
        let fs = &fam()[..1];
        let s = sample_pairings(Boundary::Dirichlet, fs, 10_000, 3).unwrap();
        let v = s.gram[(0, 0)];
        let col = s.samples.column(0);
        let var = col.iter().map(|x| x * x).sum::<f64>() / col.len() as f64;
        assert!((var - v).abs() < 0.05 * v, "{var} vs {v}");
    }

    #[test]
    fn sample_covariance_converges() {
        let r = 20_000;
        let s = sample_pairings(Boundary::Dirichlet, &fam(), r, 11).unwrap();
        let emp = s.samples.transpose() * &s.samples / r as f64;
        let tol = 5.0 / (r as f64).sqrt();
        for a in 0..2 {
            for b in 0..2 {
                let scale = (s.gram[(a, a)] * s.gram[(b, b)]).sqrt();
                assert!((emp[(a, b)] - s.gram[(a, b)]).abs() < tol * scale);
            }
        }
    }

    #[test]
    fn marginal_passes_ks_against_gram_variance() {
        let fs = &fam()[1..];
        let s = sample_pairings(Boundary::Dirichlet, fs, 10_000, 5).unwrap();
        let sd = s.gram[(0, 0)].sqrt();
        let n = Normal::new(0.0, sd).unwrap();
        let xs: Vec<f64> = s.samples.column(0).iter().copied().collect();
        let p = crate::stats::ks_one_sample(&xs, |x| n.cdf(x)).p_value;
        assert!(p > 0.01, "{p}");
    }

    #[test]
    fn deterministic_and_degenerate_inputs() {
        let a = sample_pairings(Boundary::Dirichlet, &fam(), 50, 9).unwrap();
        let b = sample_pairings(Boundary::Dirichlet, &fam(), 50, 9).unwrap();
        assert_eq!(a.samples, b.samples);
        let e = sample_pairings(Boundary::Dirichlet, &[], 10, 9).unwrap();
        assert_eq!(e.samples.ncols(), 0);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(gaussian_factor(&g), Err(Error::Factorization { .. })));
    }

    #[test]
    fn csv_layout() {
        let s = sample_pairings(Boundary::Dirichlet, &fam(), 2, 1).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("replica,f1,f2\n0,"));
        assert_eq!(text.lines().count(), 3);
    }
}
