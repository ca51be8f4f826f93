// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use loewnerlab::driving::{simulate_driving, Chamber, DrivingModel, DrivingPath, ParticleConfig};
use loewnerlab::loewner::{trace_slits_with, MapEvaluator, TraceOptions};
use loewnerlab::rng::{child_seed, stream};
use loewnerlab::{tolerances, Complex, Error};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{has_unknown, invalid, parse, Artifacts, Failure, Outcome};

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    /// Dyson with `beta = 8/kappa`.
    #[default]
    Canonical,
    Dyson,
    Wishart,
    /// Particles frozen at `x0`.
    Static,
}

/// Driving block shared by several experiments.
#[derive(Clone, Debug, Deserialize)]
pub struct DrivingSpec {
    #[serde(default)]
    pub model: ModelName,
    pub kappa: Option<f64>,
    pub beta: Option<f64>,
    pub nu: Option<f64>,
    pub x0: Vec<f64>,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dt() -> f64 {
    1e-3
}

impl DrivingSpec {
    pub fn n(&self) -> usize {
        self.x0.len()
    }

    fn kappa(&self) -> Result<f64, Failure> {
        self.kappa.ok_or_else(|| invalid(format!("missing field `kappa` (required by the {:?} model)", self.model)))
    }

    /// Checks everything that can be checked before simulating.
    pub fn validate(&self) -> Result<(), Failure> {
        if !(self.t >= 0.0 && self.t.is_finite() && self.dt > 0.0) {
            return Err(invalid("need T >= 0 and dt > 0"));
        }
        self.initial()?;
        if self.model != ModelName::Static {
            self.model()?;
        }
        Ok(())
    }

    fn initial(&self) -> Result<ParticleConfig<f64>, Failure> {
        let chamber = if self.model == ModelName::Wishart { Chamber::PositiveHalfLine } else { Chamber::FullLine };
        Ok(ParticleConfig::new(self.x0.clone(), chamber)?)
    }

    fn model(&self) -> Result<DrivingModel<f64>, Failure> {
        let n = self.n();
        let kappa = self.kappa()?;
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| invalid(format!("missing field `{name}`")));
        Ok(match self.model {
            ModelName::Canonical => DrivingModel::canonical(n, kappa)?,
            ModelName::Dyson => DrivingModel::dyson(n, kappa, need(self.beta, "beta")?)?,
            ModelName::Wishart => DrivingModel::wishart(n, kappa, need(self.beta, "beta")?, need(self.nu, "nu")?)?,
            ModelName::Static => return Err(invalid("static driving has no model")),
        })
    }

    /// The driving path for `seed`.
    pub fn path(&self, seed: u64) -> Result<DrivingPath<f64>, Failure> {
        let x0 = self.initial()?;
        if self.model == ModelName::Static {
            return Ok(DrivingPath::constant(x0, self.t, self.dt)?);
        }
        Ok(simulate_driving(&self.model()?, &x0, self.t, self.dt, seed)?)
    }
}

/// Seed of replica `r`: the scenario seed itself for a single replica.
pub fn replica_seed(seed: u64, replicas: usize, r: usize) -> u64 {
    if replicas == 1 {
        seed
    } else {
        child_seed(seed, r as u64)
    }
}

#[derive(Deserialize)]
struct SimulateParams {
    #[serde(flatten)]
    driving: DrivingSpec,
    #[serde(default = "one")]
    replicas: usize,
    /// Random points `w` for the `g_T(f_T(w)) = w` check on replica 0.
    #[serde(default)]
    inverse_points: usize,
    #[serde(default = "default_min_im")]
    inverse_min_im: f64,
    #[serde(default = "default_round_trip")]
    tolerance: f64,
    #[serde(flatten)]
    unknown: BTreeMap<String, Value>,
}
has_unknown!(SimulateParams);

fn one() -> usize {
    1
}

fn default_min_im() -> f64 {
    0.3
}

fn default_round_trip() -> f64 {
    tolerances::COMPOSITION_TOL
}

#[derive(Serialize)]
struct RoundTrip {
    points: usize,
    max_error: f64,
    tolerance: f64,
}

pub fn simulate(params: Map<String, Value>, seed: u64, out: &mut Artifacts) -> Result<Outcome, Failure> {
    let p: SimulateParams = parse(params)?;
    p.driving.validate()?;
    if p.replicas == 0 {
        return Err(invalid("replicas must be positive"));
    }
    let (mut collisions, mut unordered, mut min_gap) = (0usize, 0usize, f64::INFINITY);
    let mut first = None;
    for r in 0..p.replicas {
        match p.driving.path(replica_seed(seed, p.replicas, r)) {
            Ok(path) => {
                for c in &path.values {
                    if !c.points().windows(2).all(|w| w[0] < w[1]) {
                        unordered += 1;
                        break;
                    }
                }
                min_gap = min_gap.min(path.values.iter().map(|c| c.min_gap()).fold(f64::INFINITY, f64::min));
                if first.is_none() {
                    first = Some(path);
                }
            }
            Err(Failure::Numerical(m)) if p.replicas > 1 => {
                collisions += 1;
                eprintln!("replica {r}: {m}");
            }
            Err(e) => return Err(e),
        }
    }
    let mut round_trip = None;
    if let Some(path) = &first {
        out.csv("path.csv", |w| path.write_csv(w));
        if p.inverse_points > 0 {
            round_trip = Some(inverse_round_trip(path, p.inverse_points, p.inverse_min_im, seed, p.tolerance)?);
        }
    }
    let final_points = first.as_ref().map(|p| p.values.last().expect("non-empty path").points().to_vec());
    let mut passed = None;
    if p.replicas > 1 {
        passed = Some(collisions == 0 && unordered == 0);
    }
    if let Some(rt) = &round_trip {
        passed = Some(passed.unwrap_or(true) && rt.max_error < rt.tolerance);
    }
    let report = json!({
        "model": p.driving.model,
        "N": p.driving.n(),
        "T": p.driving.t,
        "dt": p.driving.dt,
        "replicas": p.replicas,
        "failed_replicas": collisions,
        "unordered_replicas": unordered,
        "min_gap": if min_gap.is_finite() { json!(min_gap) } else { Value::Null },
        "final": final_points,
        "round_trip": round_trip,
        "passed": passed,
    });
    Ok(Outcome::new(report, passed))
}

fn inverse_round_trip(path: &DrivingPath<f64>, points: usize, min_im: f64, seed: u64, tol: f64) -> Result<RoundTrip, Failure> {
    if !(min_im > 0.0) {
        return Err(invalid("inverse_min_im must be positive"));
    }
    let ev = MapEvaluator::forward(path);
    let t = path.horizon();
    // stream 7 keeps the test points apart from the driving noise
    let mut g = stream(seed, 7);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let w = Complex::new(g.random_range(-3.0..3.0), g.random_range(min_im..min_im + 3.0));
        let z = ev.invert(w, t)?;
        worst = worst.max((ev.evolve_point(z, t)?.value - w).norm());
    }
    Ok(RoundTrip { points, max_error: worst, tolerance: tol })
}

#[derive(Deserialize)]
struct TraceParams {
    #[serde(flatten)]
    driving: DrivingSpec,
    #[serde(default = "default_tip")]
    tip_offset: f64,
    #[serde(default = "default_samples")]
    samples: usize,
    #[serde(flatten)]
    unknown: BTreeMap<String, Value>,
}
has_unknown!(TraceParams);

fn default_tip() -> f64 {
    tolerances::TIP_OFFSET
}

fn default_samples() -> usize {
    100
}

pub fn trace(params: Map<String, Value>, seed: u64, out: &mut Artifacts) -> Result<Outcome, Failure> {
    let p: TraceParams = parse(params)?;
    p.driving.validate()?;
    let path = p.driving.path(seed)?;
    out.csv("path.csv", |w| path.write_csv(w));
    let slits = trace_slits_with(&path, &TraceOptions { tip_offset: p.tip_offset, samples: p.samples })?;
    out.csv("slits.csv", |w| slits.write_csv(w));
    let report = json!({
        "N": p.driving.n(),
        "T": p.driving.t,
        "samples": p.samples,
        "tip_offset": p.tip_offset,
        "min_separation": slits.min_separation(),
        "tips": slits.slits.iter().map(|s| s.last().map(|q| [q.z.re, q.z.im])).collect::<Vec<_>>(),
    });
    Ok(Outcome::new(report, None))
}

#[derive(Deserialize)]
struct CapacityParams {
    #[serde(flatten)]
    driving: DrivingSpec,
    /// Times at which to fit; defaults to `[T]`.
    times: Option<Vec<f64>>,
    #[serde(default = "default_capacity_tol")]
    tolerance: f64,
    #[serde(flatten)]
    unknown: BTreeMap<String, Value>,
}
has_unknown!(CapacityParams);

fn default_capacity_tol() -> f64 {
    0.01
}

pub fn capacity(params: Map<String, Value>, seed: u64, out: &mut Artifacts) -> Result<Outcome, Failure> {
    let p: CapacityParams = parse(params)?;
    p.driving.validate()?;
    let times = p.times.clone().unwrap_or_else(|| vec![p.driving.t]);
    if times.iter().any(|&t| !(t > 0.0 && t <= p.driving.t)) {
        return Err(invalid("capacity times must lie in (0, T]"));
    }
    let path = p.driving.path(seed)?;
    out.csv("path.csv", |w| path.write_csv(w));
    let ev = MapEvaluator::forward(&path);
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for &t in &times {
        let r = match ev.capacity_estimate(t) {
            Ok(r) => r,
            Err(e @ Error::Grid(_)) => return Err(invalid(e.to_string())),
            Err(e) => return Err(e.into()),
        };
        let expected = 2.0 * r.n as f64 * t;
        let rel = (r.capacity / expected - 1.0).abs();
        worst = worst.max(rel);
        rows.push(json!({ "fit": r, "expected": expected, "relative_error": rel }));
    }
    let passed = worst < p.tolerance;
    let report = json!({
        "N": p.driving.n(),
        "estimates": rows,
        "max_relative_error": worst,
        "tolerance": p.tolerance,
        "passed": passed,
    });
    Ok(Outcome::new(report, Some(passed)))
}
