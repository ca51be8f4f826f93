// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

//! Monte Carlo comparison of the two samplings that the couplings identify.
//!
//! Welding: the driving `Y` runs the sign-flipped SDE `dY = sqrt(kappa) dB - F dt`
//! from `x_0`, and its reverse flow `f_T` is the inverse map of the forward
//! chain driven by `t -> Y_{T-t}`. A pairs `H^{x_0, alpha}` (free field plus
//! log decoration), B pairs the cut field `H^{Y_T, alpha} o f_T + Q log|f_T'|`.
//! Flow line: A pairs `H^{x_0, beta}` (Dirichlet field plus arg decoration),
//! B pairs `H^{X_T, beta} o g_T - chi arg g_T'` with `dX = sqrt(kappa) dB + F dt`.
//! Both samples of a replica use independent Gaussian draws.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cutting::{cutting_operation, transported_gram, MappedNodes};
use crate::driving::{simulate_driving_with, time_reverse, DrivingModel, DrivingPath, ParticleConfig, SimOptions};
use crate::error::{invalid, Error, Result};
use crate::field::{gaussian_factor, gram_matrix_with, Boundary, Decoration, Domain, FieldModel, FreeConvention, LinearFunctional};
use crate::loewner::{trace_slits_with, MapEvaluator, TraceOptions};
use crate::params::chi_of;
use crate::rng;
use crate::stats::{ks_two_sample, mean_var};
use crate::tolerances::{KS_LEVEL, MAX_DISCARD, MIN_REPLICAS};

// A coarse hull is enough to keep supports clear of the slits.
const HULL_TIP_OFFSET: f64 = 1e-3;
const HULL_SAMPLES: usize = 50;
const HULL_MARGIN: f64 = 0.05;

type C64 = Complex<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StationarityMode {
    Welding,
    Flowline,
}

#[derive(Clone, Debug, Serialize)]
pub struct StationarityConfig {
    pub mode: StationarityMode,
    pub x0: Vec<f64>,
    #[serde(rename = "T")]
    pub t: f64,
    pub dt: f64,
    /// `kappa = gamma^2` for welding; `kappa` in `(0, 4]` for flow lines.
    pub kappa: f64,
    /// Welding weight; `2/gamma` when absent.
    pub alpha: Option<f64>,
    /// Flow-line constant; `2/sqrt(kappa) - sqrt(kappa)/2` when absent.
    pub chi: Option<f64>,
    pub functionals: Vec<LinearFunctional>,
    pub replicas: usize,
    pub seed: u64,
    /// Family-wise level, split over the functionals.
    pub level: f64,
}

impl StationarityConfig {
    pub fn new(mode: StationarityMode, x0: Vec<f64>, t: f64, kappa: f64, functionals: Vec<LinearFunctional>) -> Self {
        Self {
            mode,
            x0,
            t,
            dt: 1e-3,
            kappa,
            alpha: None,
            chi: None,
            functionals,
            replicas: 2000,
            seed: 0,
            level: KS_LEVEL,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replicas < MIN_REPLICAS {
            return Err(Error::InsufficientReplicas { need: MIN_REPLICAS, got: self.replicas });
        }
        if self.functionals.is_empty() {
            return Err(invalid("no functionals to compare"));
        }
        if !(self.t >= 0.0 && self.dt > 0.0) {
            return Err(invalid("need T >= 0 and dt > 0"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(invalid("level must lie in (0, 1)"));
        }
        match self.mode {
            StationarityMode::Welding if !(self.kappa > 0.0 && self.kappa < 4.0) => {
                Err(invalid("welding needs kappa = gamma^2 in (0, 4)"))
            }
            StationarityMode::Flowline if !(self.kappa > 0.0 && self.kappa <= 4.0) => {
                Err(invalid("flow lines need kappa in (0, 4]"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FunctionalStat {
    pub ks_stat: f64,
    pub p_value: f64,
    #[serde(rename = "meanA")]
    pub mean_a: f64,
    #[serde(rename = "meanB")]
    pub mean_b: f64,
    #[serde(rename = "varA")]
    pub var_a: f64,
    #[serde(rename = "varB")]
    pub var_b: f64,
    pub discard_fraction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StationarityReport {
    pub mode: StationarityMode,
    pub replicas: usize,
    pub accepted: usize,
    pub discard_fraction: f64,
    pub level: f64,
    /// Per-functional level after the Bonferroni split.
    pub corrected_level: f64,
    /// All p-values above the corrected level and discards below the cap.
    pub passed: bool,
    pub functionals: Vec<FunctionalStat>,
    /// Accepted rows of sample A and B.
    #[serde(skip)]
    pub samples_a: Vec<Vec<f64>>,
    #[serde(skip)]
    pub samples_b: Vec<Vec<f64>>,
}

/// Shared, replica-independent data.
struct Setup {
    model: DrivingModel<f64>,
    sim: SimOptions,
    x0: ParticleConfig<f64>,
    boundary: Boundary,
    base: DMatrix<f64>,
    base_factor: DMatrix<f64>,
    gamma: f64,
    alpha: f64,
    chi: f64,
}

fn gaussian(mean: &[f64], factor: &DMatrix<f64>, seed: u64, stream: u64) -> Vec<f64> {
    let mut g = rng::stream(seed, stream);
    let xi = DVector::from_fn(mean.len(), |_, _| g.sample::<f64, _>(StandardNormal));
    let v = factor * xi;
    mean.iter().zip(v.iter()).map(|(m, v)| m + v).collect()
}

fn node_pairing(f: &LinearFunctional, u: impl Fn(C64) -> Result<f64>) -> Result<f64> {
    f.quadrature_nodes().iter().map(|&(z, c)| Ok(c * u(z)?)).sum()
}

/// A failure that only invalidates the current replica.
fn discardable(e: &Error) -> bool {
    matches!(
        e,
        Error::Support(_) | Error::EarlyStop { .. } | Error::Inversion { .. } | Error::Stiffness { .. } | Error::Collision { .. }
    )
}

impl Setup {
    fn new(cfg: &StationarityConfig) -> Result<Self> {
        let n = cfg.x0.len();
        let (boundary, alpha) = match cfg.mode {
            StationarityMode::Welding => (Boundary::Free, cfg.alpha.unwrap_or(2.0 / cfg.kappa.sqrt())),
            StationarityMode::Flowline => (Boundary::Dirichlet, 0.0),
        };
        // welding runs the sign-flipped (time-reversed) dynamics
        let sim = SimOptions { negate_drift: cfg.mode == StationarityMode::Welding, ..SimOptions::default() };
        let model = DrivingModel::canonical(n, cfg.kappa)?;
        let x0 = ParticleConfig::on_line(cfg.x0.clone())?;
        let base = gram_matrix_with(boundary, &cfg.functionals, FreeConvention::KernelRepresentative)?;
        let base_factor = gaussian_factor(&base)?;
        Ok(Self {
            model,
            sim,
            x0,
            boundary,
            base,
            base_factor,
            gamma: cfg.kappa.sqrt(),
            alpha,
            chi: cfg.chi.unwrap_or(chi_of(cfg.kappa)),
        })
    }

    fn decoration(&self, cfg: &StationarityConfig, anchors: &[f64]) -> Result<Decoration> {
        match cfg.mode {
            StationarityMode::Welding => Decoration::log(anchors, &vec![self.alpha; anchors.len()]),
            StationarityMode::Flowline => Decoration::arg(anchors, cfg.kappa),
        }
    }

    fn sample_a(&self, cfg: &StationarityConfig, seed: u64) -> Result<Vec<f64>> {
        let deco = self.decoration(cfg, &cfg.x0)?;
        let mean: Vec<f64> =
            cfg.functionals.iter().map(|f| node_pairing(f, |z| deco.eval(z))).collect::<Result<_>>()?;
        Ok(gaussian(&mean, &self.base_factor, seed, 2))
    }

    fn sample_b(&self, cfg: &StationarityConfig, seed: u64) -> Result<Vec<f64>> {
        let path = simulate_driving_with(&self.model, &self.x0, cfg.t, cfg.dt, rng::child_seed(seed, 1), &self.sim)?;
        let end = path.values.last().expect("non-empty path").points().to_vec();
        let (mean, cov) = match cfg.mode {
            StationarityMode::Welding => {
                // f_T for Y is g_T^{-1} for the reversed path
                let forward = time_reverse(&path, cfg.t)?;
                let field = FieldModel::new(Boundary::Free, Domain::HalfPlane, self.gamma)?
                    .with_decoration(self.decoration(cfg, &end)?);
                let recipe = cutting_operation(&field, &cfg.functionals, &forward, cfg.t)?;
                (recipe.decoration_means(&field)?, recipe.covariance(self.boundary, &self.base))
            }
            StationarityMode::Flowline => self.flowline_b(cfg, &path, &end)?,
        };
        let factor = gaussian_factor(&cov)?;
        Ok(gaussian(&mean, &factor, seed, 3))
    }

    fn flowline_b(&self, cfg: &StationarityConfig, path: &DrivingPath<f64>, end: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        if cfg.t > 0.0 {
            let slits = trace_slits_with(path, &TraceOptions { tip_offset: HULL_TIP_OFFSET, samples: HULL_SAMPLES })?;
            for f in &cfg.functionals {
                for (c, r) in f.support_discs() {
                    if slits.distance_to(c) <= r + HULL_MARGIN {
                        return Err(Error::Support(format!("slit enters the support of {f:?}")));
                    }
                }
            }
        }
        let ev = MapEvaluator::forward(path);
        let deco = self.decoration(cfg, end)?;
        let mut nodes = Vec::new();
        let mut images = Vec::new();
        let mut logs = Vec::new();
        let mut mean = Vec::new();
        for f in &cfg.functionals {
            let nd = f.quadrature_nodes();
            let pts: Vec<C64> = nd.iter().map(|n| n.0).collect();
            let tr = ev.evolve(&pts, cfg.t)?;
            if let Some(bad) = tr.iter().find(|t| t.swallowed) {
                return Err(Error::EarlyStop { t_reached: bad.t });
            }
            let mut m = 0.0;
            for (t, &(_, c)) in tr.iter().zip(&nd) {
                m += c * (deco.eval(t.value)? - self.chi * t.log_derivative.im);
            }
            mean.push(m);
            images.push(tr.iter().map(|t| t.value).collect::<Vec<_>>());
            logs.push(tr.iter().map(|t| t.log_derivative).collect::<Vec<_>>());
            nodes.push(nd);
        }
        let maps: Vec<MappedNodes<'_>> = (0..nodes.len())
            .map(|i| MappedNodes { nodes: &nodes[i], images: &images[i], log_derivatives: &logs[i] })
            .collect();
        Ok((mean, transported_gram(self.boundary, &self.base, &maps)))
    }
}

/// Runs the two samplings and compares each functional's marginals with a
/// two-sample Kolmogorov-Smirnov test at the Bonferroni-corrected level.
pub fn stationarity_test(cfg: &StationarityConfig) -> Result<StationarityReport> {
    cfg.validate()?;
    let setup = Setup::new(cfg)?;
    let rows: Vec<Result<Option<(Vec<f64>, Vec<f64>)>>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let seed = rng::child_seed(cfg.seed, r as u64);
            let a = setup.sample_a(cfg, rng::child_seed(seed, 10));
            let b = setup.sample_b(cfg, rng::child_seed(seed, 11));
            match (a, b) {
                (Ok(a), Ok(b)) => Ok(Some((a, b))),
                (Err(e), _) | (_, Err(e)) if discardable(&e) => Ok(None),
                (Err(e), _) | (_, Err(e)) => Err(e),
            }
        })
        .collect();
    let mut samples_a = Vec::with_capacity(cfg.replicas);
    let mut samples_b = Vec::with_capacity(cfg.replicas);
    for row in rows {
        if let Some((a, b)) = row? {
            samples_a.push(a);
            samples_b.push(b);
        }
    }
    let accepted = samples_a.len();
    let discard_fraction = 1.0 - accepted as f64 / cfg.replicas as f64;
    let m = cfg.functionals.len();
    let corrected_level = cfg.level / m as f64;
    let functionals: Vec<FunctionalStat> = (0..m)
        .map(|j| {
            let a: Vec<f64> = samples_a.iter().map(|r| r[j]).collect();
            let b: Vec<f64> = samples_b.iter().map(|r| r[j]).collect();
            let ks = ks_two_sample(&a, &b);
            let (mean_a, var_a) = mean_var(&a);
            let (mean_b, var_b) = mean_var(&b);
            FunctionalStat { ks_stat: ks.statistic, p_value: ks.p_value, mean_a, mean_b, var_a, var_b, discard_fraction }
        })
        .collect();
    let passed = accepted >= MIN_REPLICAS
        && discard_fraction < MAX_DISCARD
        && functionals.iter().all(|f| f.p_value > corrected_level);
    Ok(StationarityReport {
        mode: cfg.mode,
        replicas: cfg.replicas,
        accepted,
        discard_fraction,
        level: cfg.level,
        corrected_level,
        passed,
        functionals,
        samples_a,
        samples_b,
    })
}
