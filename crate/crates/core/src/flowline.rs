// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

//! Flow lines `d eta/ds = exp(i h(eta)/chi)` of smooth fields on the upper
//! half-plane, the coordinate-change check `h o psi - chi arg psi'`, and the
//! boundary values of the arg-decorated Dirichlet field.

use std::cell::Cell;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field::Decoration;
use crate::loewner::segment_distance;
use crate::params::chi_of;

type C64 = Complex<f64>;

/// Why tracing stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    MaxSteps,
    /// Came within `dt` of the real line.
    Boundary,
}

/// A traced flow line. Consecutive points are exactly `dt` apart.
#[derive(Clone, Debug, Serialize)]
pub struct FlowLine {
    pub start: C64,
    pub chi: f64,
    pub dt: f64,
    pub points: Vec<C64>,
    pub termination: Termination,
}

impl FlowLine {
    /// Polyline length.
    pub fn length(&self) -> f64 {
        self.dt * (self.points.len() - 1) as f64
    }

    /// CSV with header `s,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "s,re,im")?;
        for (k, z) in self.points.iter().enumerate() {
            writeln!(w, "{:.17e},{:.17e},{:.17e}", k as f64 * self.dt, z.re, z.im)?;
        }
        Ok(())
    }
}

fn field_at(h: &impl Fn(C64) -> Result<f64>, z: C64, s: f64) -> Result<f64> {
    match h(z) {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(Error::FieldEvaluation { s, msg: format!("non-finite value {v} at {z}") }),
        Err(e) => Err(Error::FieldEvaluation { s, msg: e.to_string() }),
    }
}

/// One RK4 step of arclength `len`.
fn rk4(h: &impl Fn(C64) -> Result<f64>, chi: f64, z: C64, len: f64, s: f64) -> Result<C64> {
    let dir = |u: C64| -> Result<C64> { Ok(Complex::from_polar(1.0, field_at(h, u, s)? / chi)) };
    let k1 = dir(z)?;
    let k2 = dir(z + k1 * (0.5 * len))?;
    let k3 = dir(z + k2 * (0.5 * len))?;
    let k4 = dir(z + k3 * len)?;
    Ok((k1 + k2 * 2.0 + k3 * 2.0 + k4) * (len / 6.0))
}

/// Traces the flow line of `h` from `start`.
///
/// Each step lands on the integral curve (RK4) at chord distance exactly `dt`
/// from the previous point; the arclength used for the step is adjusted by a
/// few secant iterations.
pub fn trace_flow_line(
    h: impl Fn(C64) -> Result<f64>,
    chi: f64,
    start: C64,
    dt: f64,
    max_steps: usize,
) -> Result<FlowLine> {
    if !(chi != 0.0 && chi.is_finite()) {
        return Err(invalid("chi must be finite and nonzero"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt must be positive"));
    }
    if !(start.im > 0.0) {
        return Err(Error::Domain(format!("{start} is not in the upper half-plane")));
    }
    let mut points = Vec::with_capacity(max_steps.min(1 << 20) + 1);
    points.push(start);
    let mut z = start;
    let mut termination = Termination::MaxSteps;
    for k in 0..max_steps {
        if z.im < dt {
            termination = Termination::Boundary;
            break;
        }
        let s = k as f64 * dt;
        let mut len = dt;
        let mut d = rk4(&h, chi, z, len, s)?;
        for _ in 0..6 {
            let chord = d.norm();
            if (chord - dt).abs() <= 1e-14 * dt {
                break;
            }
            len *= dt / chord;
            d = rk4(&h, chi, z, len, s)?;
        }
        // remove the last rounding so the chord is dt to working precision
        d *= dt / d.norm();
        z += d;
        points.push(z);
    }
    if points.len() > 1 && z.im < dt {
        termination = Termination::Boundary;
    }
    Ok(FlowLine { start, chi, dt, points, termination })
}

/// Distance from `z` to a polyline.
fn polyline_distance(z: C64, line: &[C64]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [p] => (z - p).norm(),
        _ => line.windows(2).map(|s| segment_distance(z, s[0], s[1])).fold(f64::INFINITY, f64::min),
    }
}

/// Symmetric Hausdorff distance between two polylines, measured from vertices.
pub fn hausdorff(a: &[C64], b: &[C64]) -> f64 {
    let one = |p: &[C64], q: &[C64]| p.iter().map(|&z| polyline_distance(z, q)).fold(0.0, f64::max);
    one(a, b).max(one(b, a))
}

/// `line` cut at arclength `len`, interpolating the last segment.
fn truncate(line: &[C64], len: f64) -> Vec<C64> {
    let mut out = vec![line[0]];
    let mut acc = 0.0;
    for s in line.windows(2) {
        let l = (s[1] - s[0]).norm();
        if acc + l >= len {
            let u = if l > 0.0 { (len - acc) / l } else { 0.0 };
            out.push(s[0] + (s[1] - s[0]) * u);
            return out;
        }
        acc += l;
        out.push(s[1]);
    }
    out
}

fn polyline_length(line: &[C64]) -> f64 {
    line.windows(2).map(|s| (s[1] - s[0]).norm()).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct CovarianceReport {
    pub chi: f64,
    pub dt: f64,
    /// Common arclength of the compared pieces.
    pub compared_length: f64,
    pub hausdorff: f64,
    /// `eta` under `h`, from `psi(start)`.
    pub direct: Vec<C64>,
    /// `psi(eta~)`, where `eta~` is traced under `h o psi - chi arg psi'`.
    pub transported: Vec<C64>,
}

/// Traces `eta` from `psi(start)` under `h` and `eta~` from `start` under
/// `h o psi - chi arg psi'`, and compares `psi(eta~)` with `eta`.
///
/// `psi` returns `(psi(z), psi'(z))` and must map the upper half-plane into
/// itself. `arg psi'` is followed continuously along the trace. Both traces
/// are cut to the same length, `dt * max_steps` at most.
pub fn covariance_check(
    h: impl Fn(C64) -> Result<f64>,
    chi: f64,
    psi: impl Fn(C64) -> (C64, C64),
    start: C64,
    dt: f64,
    max_steps: usize,
) -> Result<CovarianceReport> {
    let (p0, dp0) = psi(start);
    if !(p0.im > 0.0) || dp0 == Complex::new(0.0, 0.0) {
        return Err(Error::Domain(format!("psi does not map {start} into the half-plane conformally")));
    }
    let direct = trace_flow_line(&h, chi, p0, dt, max_steps)?;
    let target = direct.length();

    let branch = Cell::new(dp0.arg());
    let pulled = |z: C64| -> Result<f64> {
        let (w, dw) = psi(z);
        if !(w.im > 0.0) {
            return Err(Error::Domain(format!("psi({z}) left the half-plane")));
        }
        let prev = branch.get();
        let mut a = dw.arg();
        a += 2.0 * PI * ((prev - a) / (2.0 * PI)).round();
        branch.set(a);
        Ok(h(w)? - chi * a)
    };
    // step so that the images advance at roughly the direct step
    let step = dt / dp0.norm();
    let mut tilde = Vec::new();
    let mut image = vec![p0];
    let mut z = start;
    let mut budget = 100 * max_steps.max(1);
    while polyline_length(&image) < target && budget > 0 {
        let chunk = trace_flow_line(&pulled, chi, z, step, 64.min(budget))?;
        budget -= chunk.points.len() - 1;
        image.extend(chunk.points[1..].iter().map(|&u| psi(u).0));
        tilde.extend_from_slice(&chunk.points[1..]);
        z = *chunk.points.last().expect("non-empty trace");
        if chunk.termination == Termination::Boundary || chunk.points.len() == 1 {
            break;
        }
    }
    let reached = polyline_length(&image);
    let common = target.min(reached);
    if common + 2.0 * dt < target {
        return Err(Error::TruncatedComparison(reached));
    }
    let transported = truncate(&image, common);
    let direct_cut = truncate(&direct.points, common);
    Ok(CovarianceReport {
        chi,
        dt,
        compared_length: common,
        hausdorff: hausdorff(&direct_cut, &transported),
        direct: direct_cut,
        transported,
    })
}

/// Boundary arithmetic of the arg-decorated Dirichlet field near `X^{(i)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JumpReport {
    pub kappa: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub i: usize,
    pub chi: f64,
    /// Tangent angle of the slit at its base.
    pub theta: f64,
    /// Plateau `-(2 pi/sqrt(kappa)) (N - i)` on `(X^{(i)}, X^{(i+1)})`.
    pub lambda_i: f64,
    pub left_limit_offset: f64,
    pub right_limit_offset: f64,
    /// `right - left`, with the `chi theta` terms cancelled symbolically.
    pub jump: f64,
}

/// [`boundary_jump_at`] with `theta = 0`.
pub fn boundary_jump(kappa: f64, n: usize, i: usize) -> Result<JumpReport> {
    boundary_jump_at(kappa, n, i, 0.0)
}

/// Left and right boundary limits at the `i`-th base point (1-based), for a
/// slit leaving at tangent angle `theta`.
pub fn boundary_jump_at(kappa: f64, n: usize, i: usize, theta: f64) -> Result<JumpReport> {
    if !(kappa > 0.0 && kappa <= 4.0) {
        return Err(invalid(format!("kappa = {kappa} must lie in (0, 4]")));
    }
    if !(1 <= i && i <= n) {
        return Err(invalid(format!("need 1 <= i <= N, got i = {i}, N = {n}")));
    }
    let chi = chi_of(kappa);
    let unit = 2.0 * PI / kappa.sqrt();
    let lambda = |j: usize| -unit * (n - j) as f64;
    Ok(JumpReport {
        kappa,
        n,
        i,
        chi,
        theta,
        lambda_i: lambda(i),
        left_limit_offset: -unit * (n - i + 1) as f64 + chi * theta,
        right_limit_offset: lambda(i) + chi * theta - chi * PI,
        jump: unit - chi * PI,
    })
}

/// Boundary values of `-(2/sqrt(kappa)) sum arg(z - x_j)` at the midpoints of
/// `(x_i, x_{i+1})`, `i = 1..N` (the last interval is `(x_N, x_N + 1)`).
pub fn decorated_plateaus(anchors: &[f64], kappa: f64) -> Result<Vec<f64>> {
    let deco = Decoration::arg(anchors, kappa)?;
    let n = anchors.len();
    (0..n)
        .map(|i| {
            let mid = if i + 1 < n { 0.5 * (anchors[i] + anchors[i + 1]) } else { anchors[i] + 1.0 };
            // +0 imaginary part: the limit from the upper half-plane
            deco.eval(Complex::new(mid, 0.0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        Complex::new(re, im)
    }

    #[test]
    fn zero_field_is_a_horizontal_ray() {
        let fl = trace_flow_line(|_| Ok(0.0), 1.5, c(0.2, 1.0), 1e-2, 100).unwrap();
        assert_eq!(fl.points.len(), 101);
        for (k, z) in fl.points.iter().enumerate() {
            assert!((z - c(0.2 + k as f64 * 1e-2, 1.0)).norm() < 1e-12);
        }
        assert_eq!(fl.termination, Termination::MaxSteps);
    }

    #[test]
    fn constant_field_gives_vertical_ray() {
        let chi = 0.7;
        let fl = trace_flow_line(|_| Ok(chi * PI / 2.0), chi, c(0.0, 1.0), 1e-3, 500).unwrap();
        let end = fl.points.last().unwrap();
        assert!(end.re.abs() < 1e-12 && (end.im - 1.5).abs() < 1e-12);
    }

    #[test]
    fn downward_line_stops_at_boundary() {
        let chi = 1.0;
        let fl = trace_flow_line(|_| Ok(-chi * PI / 2.0), chi, c(0.0, 0.1), 1e-3, 10_000).unwrap();
        assert_eq!(fl.termination, Termination::Boundary);
        assert!(fl.points.last().unwrap().im < 1e-3 + 1e-12);
    }

    #[test]
    fn unit_chords() {
        let chi = 1.2;
        let h = |z: C64| Ok(-chi * z.arg() + 0.3 * (z.re * 2.0).sin());
        let fl = trace_flow_line(h, chi, c(0.0, 1.0), 1e-2, 300).unwrap();
        for s in fl.points.windows(2) {
            assert!(((s[1] - s[0]).norm() - 1e-2).abs() < 1e-12);
        }
    }

    #[test]
    fn arg_field_self_convergence() {
        let chi = 1.5;
        let h = |z: C64| Ok(-chi * z.arg());
        let coarse = trace_flow_line(h, chi, c(0.0, 1.0), 1e-2, 100).unwrap();
        let fine = trace_flow_line(h, chi, c(0.0, 1.0), 1e-4, 10_000).unwrap();
        // straight down the imaginary axis; both stop near the real line
        assert_eq!(coarse.termination, Termination::Boundary);
        let len = coarse.length().min(fine.length());
        let d = hausdorff(&truncate(&coarse.points, len), &truncate(&fine.points, len));
        assert!(d < 1e-4, "{d}");
        // off the axis the line bends; halving the step barely moves it
        let a = trace_flow_line(h, chi, c(1.0, 1.0), 2e-2, 40).unwrap();
        let b = trace_flow_line(h, chi, c(1.0, 1.0), 1e-2, 80).unwrap();
        let len = a.length().min(b.length());
        let d = hausdorff(&truncate(&a.points, len), &truncate(&b.points, len));
        assert!(d < 1e-4, "{d}");
    }

    #[test]
    fn field_failures_carry_arclength() {
        let h = |z: C64| if z.re > 0.05 { Err(Error::Singularity) } else { Ok(0.0) };
        let e = trace_flow_line(h, 1.0, c(0.0, 1.0), 1e-2, 100).unwrap_err();
        assert!(matches!(e, Error::FieldEvaluation { s, .. } if (s - 0.05).abs() < 0.011));
    }

    #[test]
    fn identity_and_scaling_covariance() {
        let chi = 1.5;
        let r = covariance_check(|z: C64| Ok(0.2 * z.re), chi, |z| (z, c(1.0, 0.0)), c(0.0, 1.0), 1e-2, 100).unwrap();
        assert!(r.hausdorff < 1e-12);
        let r = covariance_check(|_| Ok(0.4), chi, |z| (2.0 * z, c(2.0, 0.0)), c(0.0, 1.0), 1e-3, 400).unwrap();
        assert!(r.hausdorff < 1e-6, "{}", r.hausdorff);
    }

    #[test]
    fn mobius_covariance() {
        let chi = 1.5;
        let h = |z: C64| Ok(chi * PI / 2.0 + 0.8 * (-(z - c(0.2, 0.6)).norm_sqr() / 0.05).exp());
        let psi = |z: C64| {
            let d = c(1.0, 0.0) + z;
            (z / d, 1.0 / (d * d))
        };
        let r = covariance_check(h, chi, psi, c(0.3, 0.5), 1e-4, 2000).unwrap();
        assert!(r.hausdorff < 1e-3, "{}", r.hausdorff);
        assert!(r.compared_length > 0.19);
    }

    #[test]
    fn jump_values() {
        let r = boundary_jump(4.0, 3, 2).unwrap();
        assert_eq!(r.chi, 0.0);
        assert!((r.jump - PI).abs() < 1e-15);
        let r = boundary_jump(2.0, 3, 2).unwrap();
        assert!((r.jump - 2.221_441_469_079_183).abs() < 1e-12);
        let j: Vec<f64> = [0.0, PI / 4.0, PI / 2.0].iter().map(|&t| boundary_jump_at(2.0, 3, 2, t).unwrap().jump).collect();
        assert!(j[0] == j[1] && j[1] == j[2]);
        assert!((r.right_limit_offset - r.left_limit_offset - r.jump).abs() < 1e-12);
        assert!(boundary_jump(4.5, 3, 1).is_err());
        assert!(boundary_jump(2.0, 3, 0).is_err());
        assert!(boundary_jump(2.0, 3, 4).is_err());
    }

    #[test]
    fn plateaus_match_lambda() {
        let anchors = [-1.0, 0.3, 2.0];
        for kappa in [0.5, 2.0, 4.0] {
            let p = decorated_plateaus(&anchors, kappa).unwrap();
            for i in 1..=3 {
                let l = boundary_jump(kappa, 3, i).unwrap().lambda_i;
                assert!((p[i - 1] - l).abs() < 1e-12, "{kappa} {i}");
            }
        }
    }

    #[test]
    fn csv_header() {
        let fl = trace_flow_line(|_| Ok(0.0), 1.0, c(0.0, 1.0), 0.5, 2).unwrap();
        let mut buf = Vec::new();
        fl.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("s,re,im\n0.00000000000000000e0,"));
        assert_eq!(s.lines().count(), 4);
    }
}
