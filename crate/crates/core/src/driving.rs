// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

//! Interacting particle systems that drive the Loewner chains.
//!
//! All models are simulated as `dX_i = sqrt(k_i) dB_i + D_i(X) dt` with an
//! Euler-Maruyama scheme. A step that breaks the ordering is split in two
//! halves, the stored Gaussian increment being refined by a Brownian bridge,
//! so the realised noise is still exactly the stored one.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cftaux::AuxiliaryFunctionSpec;
use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::scalar::Real;
use crate::tolerances;

/// Where a configuration lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chamber {
    FullLine,
    PositiveHalfLine,
}

/// Strictly increasing points on the line or on the positive half-line.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleConfig<T> {
    points: Vec<T>,
    chamber: Chamber,
}

impl<T: Real> ParticleConfig<T> {
    pub fn new(points: Vec<T>, chamber: Chamber) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("configuration needs at least one point"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(invalid("non-finite particle position"));
        }
        if !points.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("points must be strictly increasing"));
        }
        if chamber == Chamber::PositiveHalfLine && points[0] <= T::zero() {
            return Err(invalid("half-line configuration must be positive"));
        }
        Ok(Self { points, chamber })
    }

    /// Configuration on the full line.
    pub fn on_line(points: Vec<T>) -> Result<Self> {
        Self::new(points, Chamber::FullLine)
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn chamber(&self) -> Chamber {
        self.chamber
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest neighbour gap (and distance to 0 on the half-line).
    pub fn min_gap(&self) -> T {
        min_gap(&self.points, self.chamber)
    }
}

fn min_gap<T: Real>(x: &[T], chamber: Chamber) -> T {
    let mut g = T::infinity();
    for w in x.windows(2) {
        g = g.min(w[1] - w[0]);
    }
    if chamber == Chamber::PositiveHalfLine {
        g = g.min(x[0]);
    }
    g
}

/// Which interacting system drives the slits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Dyson,
    Wishart,
    Inhomogeneous,
    Custom,
}

/// User supplied drift `x -> D(x)`.
#[derive(Clone)]
pub struct CustomDrift<T>(pub Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>);

impl<T> fmt::Debug for CustomDrift<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomDrift(..)")
    }
}

/// Parameters of a driving system.
///
/// Dyson and Wishart models are run in the time scale `kappa * t`, i.e. with
/// noise `sqrt(kappa)` and drift multiplied by `kappa`. With `beta = 8/kappa`
/// the Dyson drift is the canonical `sum 4/(x_i - x_j)`.
#[derive(Clone, Debug)]
pub struct DrivingModel<T> {
    pub kind: ModelKind,
    pub n: usize,
    pub kappa: T,
    pub beta: T,
    pub nu: T,
    /// Weight of the `4 delta / g` term of the quadrant equation.
    pub delta: T,
    pub lambdas: Vec<T>,
    pub kappas: Vec<T>,
    pub alphas: Vec<T>,
    pub custom: Option<CustomDrift<T>>,
}

impl<T: Real> DrivingModel<T> {
    fn base(kind: ModelKind, n: usize, kappa: T) -> Self {
        Self {
            kind,
            n,
            kappa,
            beta: T::lit(8.0) / kappa,
            nu: T::zero(),
            delta: T::zero(),
            lambdas: vec![T::one(); n],
            kappas: vec![kappa; n],
            alphas: vec![T::lit(2.0) / kappa.sqrt(); n],
            custom: None,
        }
    }

    pub fn dyson(n: usize, kappa: T, beta: T) -> Result<Self> {
        let m = Self { beta, ..Self::base(ModelKind::Dyson, n, kappa) };
        m.validate()?;
        Ok(m)
    }

    /// Dyson model with `beta = 8/kappa`, whose drift is the canonical one.
    pub fn canonical(n: usize, kappa: T) -> Result<Self> {
        Self::dyson(n, kappa, T::lit(8.0) / kappa)
    }

    pub fn wishart(n: usize, kappa: T, beta: T, nu: T) -> Result<Self> {
        let m = Self { beta, nu, ..Self::base(ModelKind::Wishart, n, kappa) };
        m.validate()?;
        Ok(m)
    }

    /// Per-particle noise `kappas`, capacity weights `lambdas` and decoration
    /// weights `alphas`; the drift is the one making the welding process a
    /// local martingale.
    pub fn inhomogeneous(kappas: Vec<T>, lambdas: Vec<T>, alphas: Vec<T>) -> Result<Self> {
        let n = kappas.len();
        let kappa = kappas.first().copied().unwrap_or_else(T::one);
        let m = Self {
            lambdas,
            kappas,
            alphas,
            ..Self::base(ModelKind::Inhomogeneous, n, kappa)
        };
        m.validate()?;
        Ok(m)
    }

    pub fn custom(n: usize, kappa: T, drift: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Result<Self> {
        let m = Self {
            custom: Some(CustomDrift(Arc::new(drift))),
            ..Self::base(ModelKind::Custom, n, kappa)
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(invalid("N must be at least 1"));
        }
        if !(self.kappa > T::zero()) || !self.kappa.is_finite() {
            return Err(invalid("kappa must be positive"));
        }
        if !(self.beta > T::zero()) {
            return Err(invalid("beta must be positive"));
        }
        if !(self.nu > -T::one()) {
            return Err(invalid("nu must exceed -1"));
        }
        if self.lambdas.len() != n || self.kappas.len() != n || self.alphas.len() != n {
            return Err(invalid("per-particle parameter lists must have length N"));
        }
        if self.lambdas.iter().any(|l| !(*l > T::zero())) {
            return Err(invalid("lambda_i must be positive"));
        }
        let total = self.lambdas.iter().fold(T::zero(), |a, &b| a + b);
        if (total - T::of(n)).abs() > T::lit(1e-12).max(T::epsilon() * T::of(4 * n)) {
            return Err(invalid("lambda_i must sum to N"));
        }
        if self.kappas.iter().any(|k| !(*k > T::zero())) {
            return Err(invalid("kappa_i must be positive"));
        }
        if self.kind == ModelKind::Custom && self.custom.is_none() {
            return Err(invalid("custom model without drift"));
        }
        Ok(())
    }

    /// Chamber the model lives in.
    pub fn chamber(&self) -> Chamber {
        match self.kind {
            ModelKind::Wishart => Chamber::PositiveHalfLine,
            _ => Chamber::FullLine,
        }
    }

    /// Noise amplitude `sqrt(kappa_i)` of particle `i`.
    pub fn noise_scale(&self, i: usize) -> T {
        match self.kind {
            ModelKind::Inhomogeneous => self.kappas[i].sqrt(),
            _ => self.kappa.sqrt(),
        }
    }

    /// Drift `D(x)` used by the simulation.
    pub fn drift(&self, x: &[T], out: &mut [T]) {
        let half = T::lit(0.5);
        match self.kind {
            ModelKind::Dyson => {
                let c = self.kappa * self.beta * half;
                for (i, o) in out.iter_mut().enumerate() {
                    *o = c * pair_sum(x, i);
                }
            }
            ModelKind::Wishart => {
                let k = self.kappa;
                let wall = (self.beta * (self.nu + T::one()) - T::one()) * half;
                for (i, o) in out.iter_mut().enumerate() {
                    let mut s = T::zero();
                    for (j, &xj) in x.iter().enumerate() {
                        if j != i {
                            s = s + T::one() / (x[i] - xj) + T::one() / (x[i] + xj);
                        }
                    }
                    *o = k * (wall / x[i] + self.beta * half * s);
                }
            }
            ModelKind::Inhomogeneous => inhomogeneous_drift(&self.lambdas, &self.alphas, x, out),
            ModelKind::Custom => {
                let f = self.custom.as_ref().expect("validated custom drift");
                let v = (f.0)(x);
                out.copy_from_slice(&v[..out.len()]);
            }
        }
    }
}

fn pair_sum<T: Real>(x: &[T], i: usize) -> T {
    let mut s = T::zero();
    for (j, &xj) in x.iter().enumerate() {
        if j != i {
            s = s + T::one() / (x[i] - xj);
        }
    }
    s
}

fn inhomogeneous_drift<T: Real>(lambdas: &[T], alphas: &[T], x: &[T], out: &mut [T]) {
    let two = T::lit(2.0);
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = T::zero();
        for j in 0..x.len() {
            if j != i {
                s = s + (alphas[i] * lambdas[j] + alphas[j] * lambdas[i]) / (x[i] - x[j]);
            }
        }
        *o = two / alphas[i] * s;
    }
}

/// Closed-form drifts `F`.
#[derive(Clone, Debug)]
pub enum DriftScheme<T> {
    /// `F_i = sum_j 4/(x_i - x_j)`.
    Canonical,
    /// `F_i = (2/a_i) sum_j (a_i l_j + a_j l_i)/(x_i - x_j)` from the model's weights.
    Inhomogeneous,
    /// `kappa d_i log Z + sum_j 2/(x_i - x_j)` (reverse side: minus the sum).
    FromAuxFunction(AuxiliaryFunctionSpec<T>),
}

/// Evaluates a drift scheme at `x`.
pub fn drift_eval<T: Real>(scheme: &DriftScheme<T>, model: &DrivingModel<T>, x: &[T]) -> Result<Vec<T>> {
    check_distinct(x)?;
    let mut out = vec![T::zero(); x.len()];
    match scheme {
        DriftScheme::Canonical => {
            let four = T::lit(4.0);
            for (i, o) in out.iter_mut().enumerate() {
                *o = four * pair_sum(x, i);
            }
        }
        DriftScheme::Inhomogeneous => {
            if model.lambdas.len() != x.len() || model.alphas.len() != x.len() {
                return Err(invalid("model weights do not match configuration size"));
            }
            inhomogeneous_drift(&model.lambdas, &model.alphas, x, &mut out);
        }
        DriftScheme::FromAuxFunction(spec) => out = crate::cftaux::drift_from_z(spec, x)?,
    }
    Ok(out)
}

pub(crate) fn check_distinct<T: Real>(x: &[T]) -> Result<()> {
    for i in 0..x.len() {
        for j in 0..i {
            if x[i] == x[j] {
                return Err(Error::Domain("coincident particles".into()));
            }
        }
    }
    Ok(())
}

/// Knobs of [`simulate_driving_with`].
#[derive(Clone, Debug)]
pub struct SimOptions {
    /// Test hook: all Brownian increments are zero.
    pub suppress_noise: bool,
    pub gap_floor: f64,
    pub max_halvings: u32,
    /// Simulate `dX = sqrt(k) dB - D(X) dt` (the time-reversed dynamics).
    pub negate_drift: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            suppress_noise: false,
            gap_floor: tolerances::GAP_FLOOR,
            max_halvings: tolerances::MAX_HALVINGS,
            negate_drift: false,
        }
    }
}

/// A sampled driving process on the grid `t_k = k dt`.
#[derive(Clone, Debug)]
pub struct DrivingPath<T> {
    pub times: Vec<T>,
    pub values: Vec<ParticleConfig<T>>,
    /// Standard Brownian increments `B(t_{k+1}) - B(t_k)`, one row per step.
    pub noise: Vec<Vec<T>>,
    pub seed: u64,
    pub model: DrivingModel<T>,
    pub dt: T,
}

impl<T: Real> DrivingPath<T> {
    /// Number of particles.
    pub fn n(&self) -> usize {
        self.values[0].len()
    }

    /// Number of steps `K`.
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    /// Last grid time.
    pub fn horizon(&self) -> T {
        *self.times.last().expect("non-empty path")
    }

    /// Path frozen at `x0` (noise-free and drift-free), useful as a reference driving.
    pub fn constant(x0: ParticleConfig<T>, t: T, dt: T) -> Result<Self> {
        let k = step_count(t, dt)?;
        let n = x0.len();
        let model = DrivingModel::custom(n, T::one(), move |x: &[T]| vec![T::zero(); x.len()])?;
        Ok(Self {
            times: (0..=k).map(|i| T::of(i) * dt).collect(),
            values: vec![x0; k + 1],
            noise: vec![vec![T::zero(); n]; k],
            seed: 0,
            model,
            dt,
        })
    }

    /// Path given by explicit samples `values[k]` at `k dt`.
    pub fn from_values(model: DrivingModel<T>, dt: T, values: Vec<ParticleConfig<T>>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("empty path"));
        }
        let n = values[0].len();
        let k = values.len() - 1;
        Ok(Self {
            times: (0..=k).map(|i| T::of(i) * dt).collect(),
            values,
            noise: vec![vec![T::zero(); n]; k],
            seed: 0,
            model,
            dt,
        })
    }

    /// Grid index of time `t`, if `t` is a grid point.
    pub fn grid_index(&self, t: T) -> Result<usize> {
        let r = t / self.dt;
        let k = r.round();
        if !(t >= T::zero()) || (r - k).abs() > T::lit(1e-6) || k.to_usize().map_or(true, |k| k > self.steps()) {
            return Err(Error::Grid(format!("{}", t)));
        }
        Ok(k.to_usize().unwrap())
    }

    /// Piecewise linear interpolation of the path at time `t`.
    pub fn sample_into(&self, t: T, out: &mut [T]) {
        let k_max = self.steps();
        let s = (t / self.dt).max(T::zero());
        let k = s.floor().to_usize().unwrap_or(0).min(k_max.saturating_sub(1));
        let a = self.values[k].points();
        if k_max == 0 {
            out.copy_from_slice(a);
            return;
        }
        let b = self.values[k + 1].points();
        let u = s - T::of(k);
        for i in 0..out.len() {
            out[i] = a[i] + (b[i] - a[i]) * u;
        }
    }

    /// Writes `t,x1,...,xN` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "t")?;
        for i in 1..=self.n() {
            write!(w, ",x{i}")?;
        }
        writeln!(w)?;
        for (t, x) in self.times.iter().zip(&self.values) {
            write!(w, "{:.16e}", t.as_f64())?;
            for v in x.points() {
                write!(w, ",{:.16e}", v.as_f64())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn step_count<T: Real>(t: T, dt: T) -> Result<usize> {
    if !(dt > T::zero()) || !(t >= T::zero()) || !t.is_finite() {
        return Err(invalid("need dt > 0 and T >= 0"));
    }
    if dt > t && t > T::zero() {
        return Err(invalid("dt must not exceed T"));
    }
    let k = (t / dt - T::lit(1e-9)).ceil().max(T::zero());
    k.to_usize().ok_or_else(|| invalid("too many steps"))
}

/// Simulates `model` from `x0` up to `t` with step `dt`.
pub fn simulate_driving<T: Real>(
    model: &DrivingModel<T>,
    x0: &ParticleConfig<T>,
    t: T,
    dt: T,
    seed: u64,
) -> Result<DrivingPath<T>> {
    simulate_driving_with(model, x0, t, dt, seed, &SimOptions::default())
}

pub fn simulate_driving_with<T: Real>(
    model: &DrivingModel<T>,
    x0: &ParticleConfig<T>,
    t: T,
    dt: T,
    seed: u64,
    opts: &SimOptions,
) -> Result<DrivingPath<T>> {
    model.validate()?;
    if x0.len() != model.n {
        return Err(invalid(format!("x0 has {} points, model expects {}", x0.len(), model.n)));
    }
    if model.chamber() == Chamber::PositiveHalfLine && x0.points()[0] <= T::zero() {
        return Err(invalid("x0 must lie in the positive chamber"));
    }
    if matches!(model.kind, ModelKind::Dyson | ModelKind::Wishart) && model.beta < T::one() {
        return Err(invalid("beta < 1 (colliding regime) is not supported"));
    }
    let k = step_count(t, dt)?;
    let n = model.n;
    let chamber = model.chamber();
    let sqrt_dt = dt.sqrt().as_f64();

    let mut main = rng::stream(seed, rng::STREAM_DRIVING);
    let mut stepper = Stepper {
        model,
        chamber,
        floor: T::lit(opts.gap_floor),
        max_halvings: opts.max_halvings,
        sign: if opts.negate_drift { -T::one() } else { T::one() },
        drift: vec![T::zero(); n],
    };

    let mut times = Vec::with_capacity(k + 1);
    let mut values = Vec::with_capacity(k + 1);
    let mut noise = Vec::with_capacity(k);
    times.push(T::zero());
    values.push(x0.clone());
    let mut x = x0.points().to_vec();
    for step in 0..k {
        let dw: Vec<T> = (0..n)
            .map(|_| {
                let z: f64 = main.sample(StandardNormal);
                if opts.suppress_noise {
                    T::zero()
                } else {
                    T::lit(z * sqrt_dt)
                }
            })
            .collect();
        let mut bridge = rng::stream(seed, step as u64 + 1);
        let next = stepper
            .advance(&x, dt, &dw, 0, &mut bridge, opts.suppress_noise)
            .map_err(|e| match e {
                StepError::Collision => Error::Collision { step, t: (T::of(step) * dt).as_f64() },
                StepError::Blowup => Error::NumericalBlowup { step },
            })?;
        x = next;
        times.push(T::of(step + 1) * dt);
        values.push(ParticleConfig { points: x.clone(), chamber });
        noise.push(dw);
    }
    Ok(DrivingPath { times, values, noise, seed, model: model.clone(), dt })
}

enum StepError {
    Collision,
    Blowup,
}

struct Stepper<'a, T> {
    model: &'a DrivingModel<T>,
    chamber: Chamber,
    floor: T,
    max_halvings: u32,
    sign: T,
    drift: Vec<T>,
}

impl<T: Real> Stepper<'_, T> {
    fn advance(
        &mut self,
        x: &[T],
        h: T,
        dw: &[T],
        depth: u32,
        bridge: &mut rand_chacha::ChaCha20Rng,
        quiet: bool,
    ) -> core::result::Result<Vec<T>, StepError> {
        self.model.drift(x, &mut self.drift);
        let y: Vec<T> = (0..x.len())
            .map(|i| x[i] + self.model.noise_scale(i) * dw[i] + self.sign * self.drift[i] * h)
            .collect();
        if y.iter().any(|v| !v.is_finite()) && depth >= self.max_halvings {
            return Err(StepError::Blowup);
        }
        let ordered = y.iter().all(|v| v.is_finite())
            && y.windows(2).all(|w| w[0] < w[1])
            && min_gap(&y, self.chamber) >= self.floor;
        if ordered {
            return Ok(y);
        }
        if depth >= self.max_halvings {
            return Err(StepError::Collision);
        }
        // Brownian bridge: given W(h) - W(0) = dw, the midpoint increment is
        // dw/2 + N(0, h/4).
        let half = T::lit(0.5);
        let sd = (h * T::lit(0.25)).sqrt().as_f64();
        let mid: Vec<T> = dw
            .iter()
            .map(|&d| {
                let z: f64 = bridge.sample(StandardNormal);
                if quiet {
                    d * half
                } else {
                    d * half + T::lit(z * sd)
                }
            })
            .collect();
        let rest: Vec<T> = dw.iter().zip(&mid).map(|(&d, &m)| d - m).collect();
        let x1 = self.advance(x, h * half, &mid, depth + 1, bridge, quiet)?;
        self.advance(&x1, h * half, &rest, depth + 1, bridge, quiet)
    }
}

/// Time reversal `Y_t = X_{T-t}` on `[0, T]`.
///
/// The stored increments are reversed and negated, so `dY = -sqrt(k) dB' ...`
/// is described by the same generator and reversing twice restores the path.
pub fn time_reverse<T: Real>(path: &DrivingPath<T>, t: T) -> Result<DrivingPath<T>> {
    let m = path.grid_index(t)?;
    let values: Vec<_> = path.values[..=m].iter().rev().cloned().collect();
    let noise: Vec<Vec<T>> = path.noise[..m]
        .iter()
        .rev()
        .map(|row| row.iter().map(|&v| -v).collect())
        .collect();
    Ok(DrivingPath {
        times: path.times[..=m].to_vec(),
        values,
        noise,
        seed: path.seed,
        model: path.model.clone(),
        dt: path.dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> SimOptions {
        SimOptions { suppress_noise: true, ..SimOptions::default() }
    }

    #[test]
    fn config_invariants() {
        assert!(ParticleConfig::on_line(vec![0.0, 1.0]).is_ok());
        assert!(ParticleConfig::on_line(vec![1.0, 1.0]).is_err());
        assert!(ParticleConfig::on_line(vec![2.0, 1.0]).is_err());
        assert!(ParticleConfig::new(vec![0.0, 1.0], Chamber::PositiveHalfLine).is_err());
        assert!(ParticleConfig::<f64>::on_line(vec![]).is_err());
    }

    #[test]
    fn single_particle_without_noise_stays_put() {
        let m = DrivingModel::dyson(1, 1.0, 2.0).unwrap();
        let x0 = ParticleConfig::on_line(vec![0.0]).unwrap();
        let p = simulate_driving_with(&m, &x0, 1.0, 1e-2, 3, &quiet()).unwrap();
        assert_eq!(p.steps(), 100);
        assert!(p.values.iter().all(|c| c.points()[0] == 0.0));
    }

    #[test]
    fn dyson_gap_follows_square_root_law() {
        let m = DrivingModel::dyson(2, 1.0, 2.0).unwrap();
        let x0 = ParticleConfig::on_line(vec![-1.0, 1.0]).unwrap();
        let p = simulate_driving_with(&m, &x0, 1.0, 1e-4, 1, &quiet()).unwrap();
        let last = p.values.last().unwrap().points();
        let gap = last[1] - last[0];
        // dg/dt = beta/g
        assert!((gap - 8f64.sqrt()).abs() < 1e-3, "{gap}");
    }

    #[test]
    fn wishart_single_particle() {
        let m = DrivingModel::wishart(1, 1.0, 2.0, 0.0).unwrap();
        let x0 = ParticleConfig::new(vec![1.0], Chamber::PositiveHalfLine).unwrap();
        let p = simulate_driving_with(&m, &x0, 1.0, 1e-4, 1, &quiet()).unwrap();
        let x = p.values.last().unwrap().points()[0];
        assert!((x - 2f64.sqrt()).abs() < 1e-3, "{x}");
    }

    #[test]
    fn small_beta_is_rejected() {
        let m = DrivingModel::dyson(2, 1.0, 0.5).unwrap();
        let x0 = ParticleConfig::on_line(vec![-1.0, 1.0]).unwrap();
        assert!(matches!(simulate_driving(&m, &x0, 1.0, 1e-2, 1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn canonical_drift_examples() {
        let m = DrivingModel::canonical(2, 2.0).unwrap();
        let f = drift_eval(&DriftScheme::Canonical, &m, &[0.0, 1.0]).unwrap();
        assert_eq!(f, vec![-4.0, 4.0]);
        let m1 = DrivingModel::canonical(1, 2.0).unwrap();
        assert_eq!(drift_eval(&DriftScheme::Canonical, &m1, &[0.3]).unwrap(), vec![0.0]);
        assert!(matches!(
            drift_eval(&DriftScheme::Canonical, &m, &[0.5, 0.5]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn canonical_dyson_is_canonical_drift() {
        let kappa = 3.0f64;
        let m = DrivingModel::canonical(3, kappa).unwrap();
        let x = [-0.7, 0.2, 1.9];
        let mut d = [0.0; 3];
        m.drift(&x, &mut d);
        let f = drift_eval(&DriftScheme::Canonical, &m, &x).unwrap();
        for i in 0..3 {
            assert!((d[i] - f[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_weights_reduce_to_canonical() {
        use rand::{Rng, SeedableRng};
        let mut r = rand::rngs::StdRng::seed_from_u64(5);
        for _ in 0..100 {
            let n = r.random_range(1..6);
            let kappa: f64 = r.random_range(0.5..6.0);
            let a: f64 = r.random_range(-3.0..3.0);
            let a = if a.abs() < 0.1 { 1.0 } else { a };
            let m = DrivingModel::inhomogeneous(vec![kappa; n], vec![1.0; n], vec![a; n]).unwrap();
            let mut x: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
            x.sort_by(f64::total_cmp);
            let f1 = drift_eval(&DriftScheme::Inhomogeneous, &m, &x).unwrap();
            let f0 = drift_eval(&DriftScheme::Canonical, &m, &x).unwrap();
            for i in 0..n {
                assert!((f1[i] - f0[i]).abs() < 1e-12 * (1.0 + f0[i].abs()));
            }
        }
    }

    #[test]
    fn lambdas_must_sum_to_n() {
        assert!(DrivingModel::inhomogeneous(vec![1.0; 2], vec![0.5, 0.5], vec![1.0; 2]).is_err());
        assert!(DrivingModel::inhomogeneous(vec![1.0; 2], vec![0.5, 1.5], vec![1.0; 2]).is_ok());
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let m = DrivingModel::canonical(3, 2.0).unwrap();
        let x0 = ParticleConfig::on_line(vec![-1.0, 0.0, 1.0]).unwrap();
        let a = simulate_driving(&m, &x0, 0.5, 1e-3, 99).unwrap();
        let b = simulate_driving(&m, &x0, 0.5, 1e-3, 99).unwrap();
        let c = simulate_driving(&m, &x0, 0.5, 1e-3, 100).unwrap();
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn reversal_is_an_involution() {
        let m = DrivingModel::canonical(2, 2.0).unwrap();
        let x0 = ParticleConfig::on_line(vec![-1.0, 1.0]).unwrap();
        let p = simulate_driving(&m, &x0, 0.5, 1e-3, 4).unwrap();
        let r = time_reverse(&p, 0.3).unwrap();
        assert_eq!(r.values[0], p.values[300]);
        assert_eq!(r.values[300], p.values[0]);
        let rr = time_reverse(&r, 0.3).unwrap();
        assert_eq!(rr.values, p.values[..=300].to_vec());
        assert_eq!(rr.noise, p.noise[..300].to_vec());
        assert!(matches!(time_reverse(&p, 0.30005), Err(Error::Grid(_))));
        assert!(matches!(time_reverse(&p, 0.6), Err(Error::Grid(_))));
    }

    #[test]
    fn constant_path_reverses_to_itself() {
        let x0 = ParticleConfig::on_line(vec![0.0, 2.0]).unwrap();
        let p = DrivingPath::constant(x0, 1.0, 0.1).unwrap();
        assert_eq!(time_reverse(&p, 1.0).unwrap().values, p.values);
    }

    #[test]
    fn reversed_increments_obey_flipped_drift() {
        let m = DrivingModel::dyson(2, 1.0, 2.0).unwrap();
        let x0 = ParticleConfig::on_line(vec![-1.0, 1.0]).unwrap();
        let dt = 1e-3f64;
        let p = simulate_driving(&m, &x0, 1.0, dt, 8).unwrap();
        let r = time_reverse(&p, 1.0).unwrap();
        let mut f = [0.0; 2];
        for k in 0..r.steps() {
            let y0 = r.values[k].points();
            let y1 = r.values[k + 1].points();
            m.drift(y0, &mut f);
            for i in 0..2 {
                let res = (y1[i] - y0[i]) + f[i] * dt - m.noise_scale(i) * r.noise[k][i];
                assert!(res.abs() < 5.0 * dt, "step {k}: {res}");
            }
        }
    }

    #[test]
    fn csv_has_header_and_precision() {
        let x0 = ParticleConfig::on_line(vec![0.0, 1.0 / 3.0]).unwrap();
        let p = DrivingPath::constant(x0, 0.2, 0.1).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("t,x1,x2"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[2].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(s.lines().count(), 4);
    }

    #[test]
    fn single_precision_kernel_runs() {
        let m = DrivingModel::<f32>::canonical(2, 2.0).unwrap();
        let x0 = ParticleConfig::on_line(vec![-1.0f32, 1.0]).unwrap();
        let p = simulate_driving(&m, &x0, 0.1, 1e-3, 1).unwrap();
        assert!(p.values.iter().all(|c| c.min_gap() > 0.0));
    }
}
