// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::f64::consts::PI;

use loewnerlab::driving::ParticleConfig;
use loewnerlab::field::{estimate_boundary_length, Boundary, BoundaryGrid, Decoration, Domain, FieldModel};
use loewnerlab::flowline::{boundary_jump_at, decorated_plateaus, trace_flow_line};
use loewnerlab::params::chi_of;
use loewnerlab::rng::child_seed;
use loewnerlab::Complex;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use super::{has_unknown, invalid, parse, Artifacts, Failure, Outcome};

#[derive(Deserialize)]
struct FlowlineParams {
    anchors: Vec<f64>,
    kappas: Vec<f64>,
    /// Slit angles at which the jump is evaluated.
    #[serde(default = "default_thetas")]
    thetas: Vec<f64>,
    /// Start of an optional flow-line trace under the first `kappa`.
    start: Option<[f64; 2]>,
    /// Added to the field as `angle * chi`.
    #[serde(default)]
    angle: f64,
    #[serde(default = "default_step")]
    dt: f64,
    #[serde(default = "default_steps")]
    max_steps: usize,
    #[serde(default = "default_exact")]
    tolerance: f64,
    #[serde(flatten)]
    unknown: BTreeMap<String, Value>,
}
has_unknown!(FlowlineParams);

fn default_thetas() -> Vec<f64> {
    vec![0.0, PI / 4.0, PI / 2.0]
}
fn default_step() -> f64 {
    1e-2
}
fn default_steps() -> usize {
    1000
}
fn default_exact() -> f64 {
    1e-12
}

pub fn flowline(params: Map<String, Value>, _seed: u64, out: &mut Artifacts) -> Result<Outcome, Failure> {
    let p: FlowlineParams = parse(params)?;
    ParticleConfig::on_line(p.anchors.clone())?;
    if p.kappas.is_empty() || p.kappas.iter().any(|k| !(*k > 0.0 && *k <= 4.0)) {
        return Err(invalid("kappas must be a non-empty list in (0, 4]"));
    }
    if !(p.dt > 0.0) {
        return Err(invalid("dt must be positive"));
    }
    let n = p.anchors.len();
    let mut jumps = Vec::new();
    let mut plateaus = Vec::new();
    let (mut jump_err, mut plateau_err, mut theta_free) = (0.0f64, 0.0f64, true);
    for &kappa in &p.kappas {
        let values = decorated_plateaus(&p.anchors, kappa)?;
        for i in 1..=n {
            let mut first = None;
            for &theta in &p.thetas {
                let r = boundary_jump_at(kappa, n, i, theta)?;
                jump_err = jump_err.max((r.jump - kappa.sqrt() * PI / 2.0).abs());
                theta_free &= first.is_none_or(|j| j == r.jump);
                first.get_or_insert(r.jump);
                jumps.push(r);
            }
            let lambda = boundary_jump_at(kappa, n, i, 0.0)?.lambda_i;
            plateau_err = plateau_err.max((values[i - 1] - lambda).abs());
            plateaus.push(json!({ "kappa": kappa, "i": i, "plateau": values[i - 1], "lambda_i": lambda }));
        }
    }
    let mut trace = Value::Null;
    if let Some(s) = p.start {
        let kappa = p.kappas[0];
        let chi = chi_of(kappa);
        let deco = Decoration::arg(&p.anchors, kappa)?;
        let h = |z| Ok(deco.eval(z)? + p.angle * chi);
        let line = trace_flow_line(h, chi, Complex::new(s[0], s[1]), p.dt, p.max_steps)?;
        out.csv("flowline.csv", |w| line.write_csv(w));
        trace = json!({
            "kappa": kappa,
            "chi": chi,
            "angle": p.angle,
            "points": line.points.len(),
            "length": line.length(),
            "termination": line.termination,
        });
    }
    let passed = jump_err < p.tolerance && plateau_err < p.tolerance && theta_free;
    let report = json!({
        "jumps": jumps,
        "plateaus": plateaus,
        "max_jump_error": jump_err,
        "max_plateau_error": plateau_err,
        "theta_free": theta_free,
        "tolerance": p.tolerance,
        "trace": trace,
        "passed": passed,
    });
    Ok(Outcome::new(report, Some(passed)))
}

#[derive(Deserialize)]
struct LengthParams {
    gamma: f64,
    interval: [f64; 2],
    eps: Vec<f64>,
    #[serde(default = "default_replicas")]
    replicas: usize,
    #[serde(default = "default_stability")]
    tolerance: f64,
    #[serde(flatten)]
    unknown: BTreeMap<String, Value>,
}
has_unknown!(LengthParams);

fn default_replicas() -> usize {
    10_000
}
fn default_stability() -> f64 {
    0.05
}

pub fn boundary_length(params: Map<String, Value>, seed: u64, out: &mut Artifacts) -> Result<Outcome, Failure> {
    let p: LengthParams = parse(params)?;
    let model = FieldModel::new(Boundary::Free, Domain::HalfPlane, p.gamma)?;
    if p.eps.is_empty() {
        return Err(invalid("eps must list at least one scale"));
    }
    let grids = p
        .eps
        .iter()
        .map(|&e| BoundaryGrid::new(p.interval[0], p.interval[1], e, e))
        .collect::<Result<Vec<_>, _>>()?;
    let mut estimates = Vec::new();
    for (k, grid) in grids.iter().enumerate() {
        estimates.push(estimate_boundary_length(&model, grid, p.replicas, child_seed(seed, k as u64))?);
    }
    let (lo, hi) = estimates.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), e| (lo.min(e.mean), hi.max(e.mean)));
    let spread = hi / lo - 1.0;
    out.csv("estimates.csv", |w| {
        use std::io::Write;
        writeln!(w, "eps,nodes,replicas,mean,std_error,exact_mean")?;
        for e in &estimates {
            writeln!(w, "{:.17e},{},{},{:.17e},{:.17e},{:.17e}", e.eps, e.nodes, e.replicas, e.mean, e.std_error, e.exact_mean)?;
        }
        Ok(())
    });
    let passed = spread < p.tolerance;
    let report = json!({
        "gamma": p.gamma,
        "interval": p.interval,
        "estimates": estimates,
        "relative_spread": spread,
        "tolerance": p.tolerance,
        "passed": passed,
    });
    Ok(Outcome::new(report, Some(passed)))
}
