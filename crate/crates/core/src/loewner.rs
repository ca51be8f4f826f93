// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

//! Forward and reverse multiple Loewner flows.
//!
//! Points are transported with classical RK4. Inside each grid interval the
//! driving is linear; substeps shrink like `d^2` near a driving point, where
//! `d` is the distance to the closest singularity of the vector field.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex;
use serde::Serialize;

use crate::driving::DrivingPath;
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::tolerances;

/// Vector field `Psi(z, x)` with its `z`-derivative, for custom geometries.
#[derive(Clone)]
pub struct CustomField<T> {
    pub field: Arc<dyn Fn(Complex<T>, &[T]) -> Complex<T> + Send + Sync>,
    pub derivative: Arc<dyn Fn(Complex<T>, &[T]) -> Complex<T> + Send + Sync>,
}

impl<T> std::fmt::Debug for CustomField<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("CustomField(..)")
    }
}

#[derive(Clone, Debug)]
pub enum Geometry<T> {
    /// `sum 2 l_i / (z - x_i)` on the upper half-plane.
    HalfPlane,
    /// `sum [2/(z - x_i) + 2/(z + x_i)] + 4 delta / z` on the first quadrant.
    Quadrant { delta: T },
    /// Custom field on the upper half-plane.
    Custom(CustomField<T>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `dg/dt = +Psi(g, X_t)`
    Forward,
    /// `df/dt = -Psi(f, X_t)`
    Reverse,
}

/// Loewner maps realised by transporting points along a driving path.
#[derive(Clone, Debug)]
pub struct MapEvaluator<'a, T> {
    pub driving: &'a DrivingPath<T>,
    pub geometry: Geometry<T>,
    pub direction: Direction,
    pub ode_step: T,
    pub swallow_tolerance: T,
    /// Substep cap as a fraction of the local time scale `d^2 / (2N)`.
    pub step_safety: T,
    pub min_step: T,
    /// Capacity weights `l_i` of the half-plane kernel (all 1 by default).
    pub weights: Vec<T>,
}

/// Result of transporting one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tracked<T> {
    pub value: Complex<T>,
    /// Continuous branch of `log` of the map derivative.
    pub log_derivative: Complex<T>,
    pub swallowed: bool,
    /// Time reached (the swallowing time if swallowed).
    pub t: T,
}

impl<T: Real> Tracked<T> {
    pub fn derivative(&self) -> Complex<T> {
        self.log_derivative.exp()
    }
}

/// How the integrator walks the driving grid.
#[derive(Clone, Copy)]
struct Schedule {
    /// `Some(m)` walks the grid backwards from index `m` (time-reversed driving).
    reversed_from: Option<usize>,
}

enum Stop<T> {
    Done,
    Swallowed(T),
    Left(T),
}

impl<'a, T: Real> MapEvaluator<'a, T> {
    pub fn new(driving: &'a DrivingPath<T>, geometry: Geometry<T>, direction: Direction) -> Self {
        Self {
            driving,
            geometry,
            direction,
            ode_step: T::lit(tolerances::ODE_STEP),
            swallow_tolerance: T::lit(tolerances::SWALLOW_TOLERANCE),
            step_safety: T::lit(tolerances::STEP_SAFETY),
            min_step: T::lit(tolerances::MIN_STEP),
            weights: vec![T::one(); driving.n()],
        }
    }

    pub fn forward(driving: &'a DrivingPath<T>) -> Self {
        Self::new(driving, Geometry::HalfPlane, Direction::Forward)
    }

    pub fn reverse(driving: &'a DrivingPath<T>) -> Self {
        Self::new(driving, Geometry::HalfPlane, Direction::Reverse)
    }

    fn sign(&self, dir: Direction) -> T {
        match dir {
            Direction::Forward => T::one(),
            Direction::Reverse => -T::one(),
        }
    }

    /// `Psi(z, x)` and `dPsi/dz`.
    fn field(&self, z: Complex<T>, x: &[T]) -> (Complex<T>, Complex<T>) {
        let two = T::lit(2.0);
        match &self.geometry {
            Geometry::HalfPlane => {
                let mut v = Complex::new(T::zero(), T::zero());
                let mut dv = v;
                for (i, &xi) in x.iter().enumerate() {
                    let r = (z - xi).inv();
                    let c = two * self.weights[i];
                    v = v + r * c;
                    dv = dv - r * r * c;
                }
                (v, dv)
            }
            Geometry::Quadrant { delta } => {
                let mut v = Complex::new(T::zero(), T::zero());
                let mut dv = v;
                for &xi in x {
                    let a = (z - xi).inv();
                    let b = (z + xi).inv();
                    v = v + (a + b) * two;
                    dv = dv - (a * a + b * b) * two;
                }
                let four_d = T::lit(4.0) * *delta;
                let r = z.inv();
                (v + r * four_d, dv - r * r * four_d)
            }
            Geometry::Custom(c) => ((c.field)(z, x), (c.derivative)(z, x)),
        }
    }

    fn in_domain(&self, z: Complex<T>) -> bool {
        let ok = z.re.is_finite() && z.im.is_finite() && z.im > T::zero();
        match self.geometry {
            Geometry::Quadrant { .. } => ok && z.re > T::zero(),
            _ => ok,
        }
    }

    /// Distance from `z` to the singular set of the field.
    fn singular_distance(&self, z: Complex<T>, x: &[T]) -> T {
        let mut d = T::infinity();
        for &xi in x {
            d = d.min((z - xi).norm());
        }
        if let Geometry::Quadrant { delta } = self.geometry {
            for &xi in x {
                d = d.min((z + xi).norm());
            }
            if delta != T::zero() {
                d = d.min(z.norm());
            }
        }
        d
    }

    fn field_strength(&self) -> T {
        let n = T::of(self.driving.n());
        match self.geometry {
            Geometry::Quadrant { delta } => T::lit(4.0) * n + T::lit(4.0) * delta.abs(),
            _ => {
                let s = self.weights.iter().fold(T::zero(), |a, &b| a + b);
                T::lit(2.0) * s.max(T::one())
            }
        }
    }

    fn check_time(&self, t: T) -> Result<()> {
        let h = self.driving.horizon();
        if !(t >= T::zero()) || t > h + self.driving.dt * T::lit(1e-9) {
            return Err(invalid(format!("time {t} outside [0, {h}]")));
        }
        Ok(())
    }

    /// RK4 transport of `M` complex quantities up to flow time `t_end`.
    ///
    /// The first `positions` entries are points of the domain; the closure
    /// computes derivatives from the velocity and its `z`-derivative at those
    /// points.
    fn integrate<const M: usize, F>(
        &self,
        mut y: [Complex<T>; M],
        positions: usize,
        t_end: T,
        dir: Direction,
        sched: Schedule,
        rhs: F,
    ) -> Result<([Complex<T>; M], T, Stop<T>)>
    where
        F: Fn(&[(Complex<T>, Complex<T>)], &[T], &[Complex<T>; M]) -> [Complex<T>; M],
    {
        let path = self.driving;
        let dt = path.dt;
        let n = path.n();
        let sign = self.sign(dir);
        let watch_swallow = dir == Direction::Forward;
        let strength = self.field_strength();
        let quarter = T::lit(0.25);
        let half = T::lit(0.5);
        let sixth = T::one() / T::lit(6.0);

        let mut xa = vec![T::zero(); n];
        let mut xb = vec![T::zero(); n];
        let mut xt = vec![T::zero(); n];
        let mut vel = vec![(Complex::new(T::zero(), T::zero()), Complex::new(T::zero(), T::zero())); positions];

        let eval = |x: &[T], y: &[Complex<T>; M], vel: &mut Vec<(Complex<T>, Complex<T>)>| -> [Complex<T>; M] {
            for (p, v) in vel.iter_mut().enumerate() {
                let (f, df) = self.field(y[p], x);
                *v = (f * sign, df * sign);
            }
            rhs(vel, x, y)
        };

        let intervals = match sched.reversed_from {
            None => path.steps(),
            Some(m) => m,
        };
        let mut t = T::zero();
        let mut k = 0usize;
        while t < t_end && k < intervals {
            let (a, b) = match sched.reversed_from {
                None => (path.values[k].points(), path.values[k + 1].points()),
                Some(m) => (path.values[m - k].points(), path.values[m - k - 1].points()),
            };
            xa.copy_from_slice(a);
            xb.copy_from_slice(b);
            let t0 = T::of(k) * dt;
            let t1 = if k + 1 == intervals { t_end } else { (t0 + dt).min(t_end) };
            let mut slope = T::zero();
            for i in 0..n {
                slope = slope.max(((xb[i] - xa[i]) / dt).abs());
            }
            let at = |s: T, out: &mut Vec<T>| {
                let u = (s - t0) / dt;
                for i in 0..n {
                    out[i] = xa[i] + (xb[i] - xa[i]) * u;
                }
            };
            while t < t1 {
                at(t, &mut xt);
                let mut d = T::infinity();
                for p in 0..positions {
                    d = d.min(self.singular_distance(y[p], &xt));
                }
                if watch_swallow {
                    let mut close = T::infinity();
                    for p in 0..positions {
                        for &xi in xt.iter() {
                            close = close.min((y[p] - xi).norm());
                        }
                    }
                    if close < self.swallow_tolerance {
                        return Ok((y, t, Stop::Swallowed(t)));
                    }
                }
                let mut h = (t1 - t).min(self.ode_step);
                h = h.min(self.step_safety * d * d / strength);
                if slope > T::zero() {
                    h = h.min(quarter * d / slope);
                }
                if h < self.min_step * t_end.max(T::one()) && t1 - t > h {
                    if watch_swallow {
                        return Ok((y, t, Stop::Swallowed(t)));
                    }
                    return Err(Error::Stiffness { t: t.as_f64() });
                }
                let k1 = eval(&xt, &y, &mut vel);
                let mut tmp = y;
                for j in 0..M {
                    tmp[j] = y[j] + k1[j] * (h * half);
                }
                at(t + h * half, &mut xt);
                let k2 = eval(&xt, &tmp, &mut vel);
                for j in 0..M {
                    tmp[j] = y[j] + k2[j] * (h * half);
                }
                let k3 = eval(&xt, &tmp, &mut vel);
                at(t + h, &mut xt);
                for j in 0..M {
                    tmp[j] = y[j] + k3[j] * h;
                }
                let k4 = eval(&xt, &tmp, &mut vel);
                for j in 0..M {
                    y[j] = y[j] + (k1[j] + k2[j] * T::lit(2.0) + k3[j] * T::lit(2.0) + k4[j]) * (h * sixth);
                }
                t = if t1 - (t + h) < T::epsilon() * t1.max(T::one()) { t1 } else { t + h };
                for p in 0..positions {
                    if !self.in_domain(y[p]) {
                        if watch_swallow {
                            return Ok((y, t, Stop::Swallowed(t)));
                        }
                        return Ok((y, t, Stop::Left(t)));
                    }
                }
            }
            k += 1;
        }
        Ok((y, t, Stop::Done))
    }

    fn schedule(&self) -> Schedule {
        Schedule { reversed_from: None }
    }

    fn track_one(&self, z: Complex<T>, t: T, dir: Direction, sched: Schedule) -> Result<(Tracked<T>, bool)> {
        let zero = Complex::new(T::zero(), T::zero());
        let (y, t_reached, stop) = self.integrate([z, zero], 1, t, dir, sched, |vel, _, _| [vel[0].0, vel[0].1])?;
        let (swallowed, left) = match stop {
            Stop::Done => (false, false),
            Stop::Swallowed(_) => (true, false),
            Stop::Left(_) => (false, true),
        };
        Ok((Tracked { value: y[0], log_derivative: y[1], swallowed, t: t_reached }, left))
    }

    /// Transports `points` to time `t` in the evaluator's direction.
    ///
    /// Swallowed points are flagged and frozen at the swallowing time.
    pub fn evolve(&self, points: &[Complex<T>], t: T) -> Result<Vec<Tracked<T>>> {
        self.check_time(t)?;
        points
            .iter()
            .map(|&z| {
                if !self.in_domain(z) {
                    return Err(Error::Domain(format!("{z} is not in the open domain")));
                }
                let (tr, left) = self.track_one(z, t, self.direction, self.schedule())?;
                if left {
                    return Err(Error::Inversion { t: tr.t.as_f64() });
                }
                Ok(tr)
            })
            .collect()
    }

    /// Transports a single point, see [`evolve`](Self::evolve).
    pub fn evolve_point(&self, z: Complex<T>, t: T) -> Result<Tracked<T>> {
        Ok(self.evolve(&[z], t)?[0])
    }

    /// `g_t^{-1}(w)` with its derivative, computed with the reverse flow
    /// driven by `s -> X_{t-s}`.
    pub fn invert_tracked(&self, w: Complex<T>, t: T) -> Result<Tracked<T>> {
        let m = self.driving.grid_index(t)?;
        if !self.in_domain(w) {
            return Err(Error::Domain(format!("{w} is not in the open domain")));
        }
        let (tr, left) = self.track_one(w, t, Direction::Reverse, Schedule { reversed_from: Some(m) })?;
        if left || !self.in_domain(tr.value) {
            return Err(Error::Inversion { t: tr.t.as_f64() });
        }
        Ok(tr)
    }

    /// `g_t^{-1}(w)`.
    pub fn invert(&self, w: Complex<T>, t: T) -> Result<Complex<T>> {
        Ok(self.invert_tracked(w, t)?.value)
    }

    /// Integrates `sum_i A(z_i) A(w_i)` along the flow, where `A` takes the real
    /// (`imaginary = false`) or imaginary part of `2/(map - X_i)`.
    ///
    /// Returns the transported points and the integral, or the reached time if
    /// a point is swallowed.
    pub(crate) fn transport_pair(
        &self,
        z: Complex<T>,
        w: Complex<T>,
        t: T,
        imaginary: bool,
    ) -> Result<(Complex<T>, Complex<T>, T, Option<T>)> {
        self.check_time(t)?;
        let two = T::lit(2.0);
        let zero = Complex::new(T::zero(), T::zero());
        let (y, _, stop) = self.integrate([z, w, zero], 2, t, self.direction, self.schedule(), |vel, x, y| {
            let mut acc = T::zero();
            for &xi in x {
                let a = (y[0] - xi).inv() * two;
                let b = (y[1] - xi).inv() * two;
                acc = acc + if imaginary { a.im * b.im } else { a.re * b.re };
            }
            [vel[0].0, vel[1].0, Complex::new(acc, T::zero())]
        })?;
        let early = match stop {
            Stop::Done => None,
            Stop::Swallowed(s) | Stop::Left(s) => Some(s),
        };
        Ok((y[0], y[1], y[2].re, early))
    }

    /// Half-plane capacity of the hull at time `t` from the expansion
    /// `g_t(z) = z + C/z + O(z^-2)`.
    pub fn capacity_estimate(&self, t: T) -> Result<CapacityReport> {
        self.capacity_estimate_at(t, T::lit(tolerances::CAPACITY_RADIUS))
    }

    pub fn capacity_estimate_at(&self, t: T, radius: T) -> Result<CapacityReport> {
        if self.direction != Direction::Forward {
            return Err(invalid("capacity needs a forward evaluator"));
        }
        let z1 = Complex::new(T::zero(), radius);
        let z2 = Complex::new(T::zero(), radius * T::lit(2.0));
        let g = self.evolve(&[z1, z2], t)?;
        let c1 = ((g[0].value - z1) * z1).re;
        let c2 = ((g[1].value - z2) * z2).re;
        // real coefficients: Re C(iR) = C + O(R^-2), extrapolate that term away
        let c = (T::lit(4.0) * c2 - c1) / T::lit(3.0);
        let residual = if c == T::zero() { (c2 - c1).abs() } else { ((c - c2) / c).abs() };
        Ok(CapacityReport {
            t: t.as_f64(),
            n: self.driving.n(),
            capacity: c.as_f64(),
            fit_residual: residual.as_f64(),
            poor_fit: residual.as_f64() > tolerances::CAPACITY_FIT_WARN,
        })
    }
}

/// Capacity fit summary.
#[derive(Clone, Debug, Serialize)]
pub struct CapacityReport {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub capacity: f64,
    pub fit_residual: f64,
    /// Set when `fit_residual` exceeds the warning threshold.
    pub poor_fit: bool,
}

/// One sample of a slit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlitPoint<T> {
    pub t: T,
    pub z: Complex<T>,
}

/// Traced slits with their anchors.
#[derive(Clone, Debug)]
pub struct SlitSet<T> {
    pub slits: Vec<Vec<SlitPoint<T>>>,
    pub anchors: Vec<T>,
}

impl<T: Real> SlitSet<T> {
    /// Writes `slit_index,t,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "slit_index,t,re,im")?;
        for (i, s) in self.slits.iter().enumerate() {
            for p in s {
                writeln!(w, "{i},{:.16e},{:.16e},{:.16e}", p.t.as_f64(), p.z.re.as_f64(), p.z.im.as_f64())?;
            }
        }
        Ok(())
    }

    /// Smallest distance between points of different slits.
    pub fn min_separation(&self) -> T {
        let mut d = T::infinity();
        for a in 0..self.slits.len() {
            for b in a + 1..self.slits.len() {
                for p in &self.slits[a] {
                    for q in &self.slits[b] {
                        d = d.min((p.z - q.z).norm());
                    }
                }
            }
        }
        d
    }

    /// Distance from `z` to the polylines (anchors included).
    pub fn distance_to(&self, z: Complex<T>) -> T {
        let mut d = T::infinity();
        for (s, &a) in self.slits.iter().zip(&self.anchors) {
            let mut prev = Complex::new(a, T::zero());
            for p in s {
                d = d.min(segment_distance(z, prev, p.z));
                prev = p.z;
            }
        }
        d
    }
}

pub(crate) fn segment_distance<T: Real>(z: Complex<T>, a: Complex<T>, b: Complex<T>) -> T {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == T::zero() {
        return (z - a).norm();
    }
    let u = (((z - a) * ab.conj()).re / len2).max(T::zero()).min(T::one());
    (z - (a + ab * u)).norm()
}

/// Options of [`trace_slits_with`].
#[derive(Clone, Debug)]
pub struct TraceOptions {
    pub tip_offset: f64,
    /// Number of sample times (evenly strided over the grid).
    pub samples: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { tip_offset: tolerances::TIP_OFFSET, samples: 100 }
    }
}

/// Traces the half-plane slits `eta_i(t) ~ g_t^{-1}(X_t^i + i tip_offset)`.
pub fn trace_slits<T: Real>(driving: &DrivingPath<T>, tip_offset: T) -> Result<SlitSet<T>> {
    trace_slits_with(driving, &TraceOptions { tip_offset: tip_offset.as_f64(), ..TraceOptions::default() })
}

pub fn trace_slits_with<T: Real>(driving: &DrivingPath<T>, opts: &TraceOptions) -> Result<SlitSet<T>> {
    if !(opts.tip_offset > 0.0) {
        return Err(invalid("tip_offset must be positive"));
    }
    let ev = MapEvaluator::forward(driving);
    trace_with_evaluator(&ev, opts)
}

/// Tracing for any geometry of a forward evaluator.
pub fn trace_with_evaluator<T: Real>(ev: &MapEvaluator<'_, T>, opts: &TraceOptions) -> Result<SlitSet<T>> {
    let driving = ev.driving;
    let n = driving.n();
    let k = driving.steps();
    let samples = opts.samples.max(1).min(k.max(1));
    let eps = T::lit(opts.tip_offset);
    let mut slits = vec![Vec::with_capacity(samples); n];
    for s in 1..=samples {
        let idx = ((s * k) as f64 / samples as f64).round() as usize;
        if idx == 0 {
            continue;
        }
        let t = driving.times[idx];
        let x = driving.values[idx].points();
        for i in 0..n {
            let w = Complex::new(x[i], eps);
            let z = ev.invert(w, t)?;
            slits[i].push(SlitPoint { t, z });
        }
    }
    Ok(SlitSet { slits, anchors: driving.values[0].points().to_vec() })
}
