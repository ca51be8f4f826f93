// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use loewnerlab::cftaux::{drift_from_z, max_annihilation_residual, AuxiliaryFunctionSpec, CftReport, Side};
use loewnerlab::coupling::{
    cross_variation_check, drift_audit as audit, stationarity_test, CouplingState, CrossMode, StationarityConfig,
    StationarityMode,
};
use loewnerlab::driving::{drift_eval, DriftScheme, DrivingModel, ParticleConfig};
use loewnerlab::field::LinearFunctional;
use loewnerlab::params::{chi_of, solve_alpha};
use loewnerlab::rng::stream;
use loewnerlab::{Complex, C64};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::driving::{replica_seed, DrivingSpec};
use super::{has_unknown, invalid, parse, Artifacts, Failure, Outcome};

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum AuditMode {
    Welding,
    Flowline,
    Inhomogeneous,
}

#[derive(Deserialize)]
struct AuditParams {
    mode: AuditMode,
    kappa: Option<f64>,
    gamma: Option<f64>,
    chi: Option<f64>,
    /// `alpha_i` (welding) or `beta_i` (flow line).
    weights: Option<Vec<f64>>,
    kappas: Option<Vec<f64>>,
    lambdas: Option<Vec<f64>>,
    /// Defaults to the canonical (or weighted) drift.
    drift: Option<Vec<f64>>,
    x: Option<Vec<f64>>,
    point: Option<[f64; 2]>,
    /// Runs the random-state protocol instead of a single audit.
    #[serde(default)]
    random_states: usize,
    #[serde(default = "default_n_max")]
    n_max: usize,
    #[serde(default = "default_gamma_range")]
    gamma_range: [f64; 2],
    #[serde(default = "default_perturbation")]
    perturbation: f64,
    #[serde(default = "default_null")]
    null_tolerance: f64,
    #[serde(default = "default_detect")]
    detect_tolerance: f64,
    #[serde(flatten)]
    unknown: BTreeMap<String, Value>,
}
has_unknown!(AuditParams);

fn default_n_max() -> usize {
    5
}
fn default_gamma_range() -> [f64; 2] {
    [0.5, 1.9]
}
fn default_perturbation() -> f64 {
    1e-3
}
fn default_null() -> f64 {
    1e-10
}
fn default_detect() -> f64 {
    1e-6
}

fn canonical_drift(kappa: f64, x: &[f64]) -> Result<Vec<f64>, Failure> {
    let m = DrivingModel::canonical(x.len(), kappa)?;
    Ok(drift_eval(&DriftScheme::Canonical, &m, x)?)
}

/// Builds one state from explicit parameters; absent weights and drift take
/// their canonical values.
fn build_state(p: &AuditParams, x: Vec<f64>, point: C64) -> Result<CouplingState<f64>, Failure> {
    let n = x.len();
    let cfg = ParticleConfig::on_line(x.clone())?;
    let need_kappa = || p.kappa.ok_or_else(|| invalid("missing field `kappa`"));
    let state = match p.mode {
        AuditMode::Welding => {
            let kappa = need_kappa()?;
            let gamma = p.gamma.unwrap_or(kappa.sqrt());
            let weights = p.weights.clone().unwrap_or(vec![2.0 / gamma; n]);
            let drift = match &p.drift {
                Some(d) => d.clone(),
                None => canonical_drift(kappa, &x)?,
            };
            CouplingState::welding(kappa, gamma, weights, cfg, point)?.with_drift(drift)
        }
        AuditMode::Flowline => {
            let kappa = need_kappa()?;
            let weights = p.weights.clone().unwrap_or(vec![2.0 / kappa.sqrt(); n]);
            let drift = match &p.drift {
                Some(d) => d.clone(),
                None => canonical_drift(kappa, &x)?,
            };
            CouplingState::flowline(kappa, p.chi.unwrap_or(chi_of(kappa)), weights, cfg, point)?.with_drift(drift)
        }
        AuditMode::Inhomogeneous => {
            let gamma = p.gamma.ok_or_else(|| invalid("missing field `gamma`"))?;
            let kappas = p.kappas.clone().ok_or_else(|| invalid("missing field `kappas`"))?;
            let lambdas = p.lambdas.clone().unwrap_or(vec![1.0; n]);
            if kappas.len() != n || lambdas.len() != n {
                return Err(invalid("kappas and lambdas need one entry per particle"));
            }
            let weights = p
                .weights
                .clone()
                .unwrap_or_else(|| (0..n).map(|i| solve_alpha(kappas[i], lambdas[i], gamma)).collect());
            let s = CouplingState::inhomogeneous(gamma, kappas, lambdas, weights, cfg, point)?;
            match &p.drift {
                Some(d) => s.with_drift(d.clone()),
                None => s,
            }
        }
    };
    state.validate()?;
    Ok(state)
}

pub fn drift_audit(params: Map<String, Value>, seed: u64, out: &mut Artifacts) -> Result<Outcome, Failure> {
    let p: AuditParams = parse(params)?;
    if p.random_states > 0 {
        return random_protocol(&p, seed, out);
    }
    let x = p.x.clone().ok_or_else(|| invalid("missing field `x` (or set `random_states`)"))?;
    let point = p.point.ok_or_else(|| invalid("missing field `point`"))?;
    let state = build_state(&p, x, Complex::new(point[0], point[1]))?;
    let report = audit(&state)?;
    Ok(Outcome::new(report, None))
}

fn random_config(g: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..n).map(|_| g.random_range(-2.0..2.0)).collect();
        x.sort_by(f64::total_cmp);
        if x.windows(2).all(|w| w[1] - w[0] >= 0.1) {
            return x;
        }
    }
}

#[derive(Serialize)]
struct ProtocolRow {
    #[serde(rename = "N")]
    n: usize,
    gamma: f64,
    point: [f64; 2],
    null_residual: f64,
    /// Smallest residual over the perturbed states (absent for the
    /// inhomogeneous mode, which has no perturbation step).
    perturbed_residual: Option<f64>,
}

/// Residual at random canonical states, and after perturbing `kappa`, one
/// weight and one drift component.
fn random_protocol(p: &AuditParams, seed: u64, out: &mut Artifacts) -> Result<Outcome, Failure> {
    let [lo, hi] = p.gamma_range;
    if !(0.0 < lo && lo < hi && hi < 2.0) {
        return Err(invalid("gamma_range must satisfy 0 < lo < hi < 2"));
    }
    if p.n_max == 0 {
        return Err(invalid("n_max must be positive"));
    }
    let mut g = stream(seed, 0);
    let mut rows = Vec::with_capacity(p.random_states);
    while rows.len() < p.random_states {
        let n = g.random_range(1..=p.n_max);
        let x = random_config(&mut g, n);
        let z = Complex::new(g.random_range(-3.0..3.0), g.random_range(0.1..2.0));
        if x.iter().any(|&v| (z - v).norm() < 1e-3) {
            continue;
        }
        let gamma: f64 = g.random_range(lo..hi);
        let kappa = gamma * gamma;
        let cfg = ParticleConfig::on_line(x.clone())?;
        let (state, weights) = match p.mode {
            AuditMode::Welding => {
                let w = vec![2.0 / gamma; n];
                (CouplingState::welding(kappa, gamma, w.clone(), cfg, z)?.with_drift(canonical_drift(kappa, &x)?), w)
            }
            AuditMode::Flowline => {
                let w = vec![2.0 / gamma; n];
                let s = CouplingState::flowline(kappa, chi_of(kappa), w.clone(), cfg, z)?;
                (s.with_drift(canonical_drift(kappa, &x)?), w)
            }
            AuditMode::Inhomogeneous => {
                let raw: Vec<f64> = (0..n).map(|_| g.random_range(0.2..2.0)).collect();
                let total: f64 = raw.iter().sum();
                let lambdas: Vec<f64> = raw.iter().map(|l| l * n as f64 / total).collect();
                let kappas: Vec<f64> = (0..n).map(|_| g.random_range(0.2..6.0)).collect();
                let w: Vec<f64> = (0..n).map(|i| solve_alpha(kappas[i], lambdas[i], gamma)).collect();
                (CouplingState::inhomogeneous(gamma, kappas, lambdas, w.clone(), cfg, z)?, w)
            }
        };
        let null_residual = audit(&state)?.residual;
        let perturbed_residual = if p.mode == AuditMode::Inhomogeneous {
            None
        } else {
            let i = g.random_range(0..n);
            let mut variants = Vec::new();
            let mut s = state.clone();
            s.params.kappa += p.perturbation;
            s.params.kappas.iter_mut().for_each(|k| *k += p.perturbation);
            variants.push(s);
            let mut s = state.clone();
            s.params.weights[i] = weights[i] + p.perturbation;
            variants.push(s);
            let mut d = state.drift.clone();
            d[i] += p.perturbation;
            variants.push(state.clone().with_drift(d));
            let mut worst = f64::INFINITY;
            for v in &variants {
                worst = worst.min(audit(v)?.residual);
            }
            Some(worst)
        };
        rows.push(ProtocolRow { n, gamma, point: [z.re, z.im], null_residual, perturbed_residual });
    }
    let max_null = rows.iter().map(|r| r.null_residual).fold(0.0, f64::max);
    let min_perturbed = rows.iter().filter_map(|r| r.perturbed_residual).fold(f64::INFINITY, f64::min);
    let passed = max_null < p.null_tolerance && (p.mode == AuditMode::Inhomogeneous || min_perturbed > p.detect_tolerance);
    out.csv("states.csv", |w| {
        use std::io::Write;
        writeln!(w, "N,gamma,re,im,null_residual,perturbed_residual")?;
        for r in &rows {
            let pr = r.perturbed_residual.map(|v| format!("{v:.17e}")).unwrap_or_default();
            writeln!(w, "{},{:.17e},{:.17e},{:.17e},{:.17e},{pr}", r.n, r.gamma, r.point[0], r.point[1], r.null_residual)?;
        }
        Ok(())
    });
    let report = json!({
        "mode": p.mode,
        "states": rows.len(),
        "perturbation": p.perturbation,
        "max_null_residual": max_null,
        "null_tolerance": p.null_tolerance,
        "min_perturbed_residual": if min_perturbed.is_finite() { json!(min_perturbed) } else { Value::Null },
        "detect_tolerance": p.detect_tolerance,
        "passed": passed,
    });
    Ok(Outcome::new(report, Some(passed)))
}

#[derive(Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum CrossModeName {
    WeldingFree,
    FlowlineDirichlet,
}

#[derive(Deserialize)]
struct CrossParams {
    #[serde(flatten)]
    driving: DrivingSpec,
    mode: CrossModeName,
    /// `[[z_re, z_im], [w_re, w_im]]` pairs.
    pairs: Vec<[[f64; 2]; 2]>,
    #[serde(default = "one")]
    replicas: usize,
    #[serde(default = "default_bracket")]
    tolerance: f64,
    #[serde(flatten)]
    unknown: BTreeMap<String, Value>,
}
has_unknown!(CrossParams);

fn one() -> usize {
    1
}
fn default_bracket() -> f64 {
    1e-2
}

pub fn cross_variation(params: Map<String, Value>, seed: u64, out: &mut Artifacts) -> Result<Outcome, Failure> {
    let p: CrossParams = parse(params)?;
    p.driving.validate()?;
    if p.pairs.is_empty() || p.replicas == 0 {
        return Err(invalid("need at least one pair and one replica"));
    }
    for [z, w] in &p.pairs {
        if !(z[1] > 0.0 && w[1] > 0.0) || z == w {
            return Err(invalid("pair points must be distinct and in the upper half-plane"));
        }
    }
    let mode = match p.mode {
        CrossModeName::WeldingFree => CrossMode::WeldingFree,
        CrossModeName::FlowlineDirichlet => CrossMode::FlowlineDirichlet,
    };
    let mut reports = Vec::new();
    for r in 0..p.replicas {
        let path = p.driving.path(replica_seed(seed, p.replicas, r))?;
        if r == 0 {
            out.csv("path.csv", |w| path.write_csv(w));
        }
        for [z, w] in &p.pairs {
            let z = Complex::new(z[0], z[1]);
            let w = Complex::new(w[0], w[1]);
            reports.push(cross_variation_check(mode, &path, z, w, p.driving.t)?);
        }
    }
    let worst = reports.iter().map(|r| r.relative_discrepancy).fold(0.0, f64::max);
    let passed = worst < p.tolerance;
    let report = json!({
        "checks": reports,
        "max_relative_discrepancy": worst,
        "tolerance": p.tolerance,
        "passed": passed,
    });
    Ok(Outcome::new(report, Some(passed)))
}

#[derive(Deserialize)]
struct StationarityParams {
    mode: StationarityMode,
    x0: Vec<f64>,
    #[serde(rename = "T")]
    t: f64,
    dt: Option<f64>,
    kappa: f64,
    alpha: Option<f64>,
    chi: Option<f64>,
    functionals: Vec<LinearFunctional>,
    replicas: Option<usize>,
    level: Option<f64>,
    /// Control runs: the test is expected to reject.
    #[serde(default)]
    expect_rejection: bool,
    #[serde(flatten)]
    unknown: BTreeMap<String, Value>,
}
has_unknown!(StationarityParams);

pub fn stationarity(params: Map<String, Value>, seed: u64, out: &mut Artifacts) -> Result<Outcome, Failure> {
    let p: StationarityParams = parse(params)?;
    ParticleConfig::on_line(p.x0.clone())?;
    for f in &p.functionals {
        f.validate(match p.mode {
            StationarityMode::Welding => loewnerlab::field::Boundary::Free,
            StationarityMode::Flowline => loewnerlab::field::Boundary::Dirichlet,
        })?;
    }
    let mut cfg = StationarityConfig::new(p.mode, p.x0, p.t, p.kappa, p.functionals);
    cfg.dt = p.dt.unwrap_or(cfg.dt);
    cfg.replicas = p.replicas.unwrap_or(cfg.replicas);
    cfg.level = p.level.unwrap_or(cfg.level);
    cfg.alpha = p.alpha;
    cfg.chi = p.chi;
    cfg.seed = seed;
    let r = stationarity_test(&cfg)?;
    out.csv("samples.csv", |w| {
        use std::io::Write;
        writeln!(w, "functional,row,a,b")?;
        for (k, (a, b)) in r.samples_a.iter().zip(&r.samples_b).enumerate() {
            for (j, (x, y)) in a.iter().zip(b).enumerate() {
                writeln!(w, "{j},{k},{x:.17e},{y:.17e}")?;
            }
        }
        Ok(())
    });
    let passed = r.passed != p.expect_rejection;
    let report = json!({ "result": r, "expect_rejection": p.expect_rejection, "passed": passed });
    Ok(Outcome::new(report, Some(passed)))
}

#[derive(Deserialize)]
struct CftParams {
    kappas: Vec<f64>,
    #[serde(default = "default_cft_n")]
    n_max: usize,
    #[serde(default = "default_configs")]
    configs: usize,
    #[serde(default = "default_annihilation")]
    tolerance: f64,
    #[serde(flatten)]
    unknown: BTreeMap<String, Value>,
}
has_unknown!(CftParams);

fn default_cft_n() -> usize {
    6
}
fn default_configs() -> usize {
    100
}
fn default_annihilation() -> f64 {
    1e-10
}

pub fn cft_check(params: Map<String, Value>, seed: u64, out: &mut Artifacts) -> Result<Outcome, Failure> {
    let p: CftParams = parse(params)?;
    if p.kappas.is_empty() || p.kappas.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
        return Err(invalid("kappas must be a non-empty list of positive values"));
    }
    if p.n_max < 1 {
        return Err(invalid("n_max must be positive"));
    }
    let mut g = stream(seed, 0);
    let mut reports: Vec<CftReport> = Vec::new();
    let mut drift_gap = 0.0f64;
    for &kappa in &p.kappas {
        // worst case per (side, N)
        let mut worst: BTreeMap<(u8, usize), f64> = BTreeMap::new();
        for _ in 0..p.configs {
            let n = g.random_range(1..=p.n_max);
            let x = random_config(&mut g, n);
            let canon = canonical_drift(kappa, &x)?;
            for (tag, spec, sign) in [
                (0u8, AuxiliaryFunctionSpec::forward_canonical(kappa), 1.0),
                (1, AuxiliaryFunctionSpec::reverse_canonical(kappa), -1.0),
            ] {
                let res = max_annihilation_residual(&spec, &x)?;
                let e = worst.entry((tag, n)).or_insert(0.0);
                *e = e.max(res);
                for (d, c) in drift_from_z(&spec, &x)?.iter().zip(&canon) {
                    drift_gap = drift_gap.max((d - sign * c).abs());
                }
            }
        }
        for ((tag, n), max_residual) in worst {
            let spec = if tag == 0 {
                AuxiliaryFunctionSpec::forward_canonical(kappa)
            } else {
                AuxiliaryFunctionSpec::reverse_canonical(kappa)
            };
            reports.push(CftReport { side: spec.side, p: spec.p, kappa, n, max_residual });
        }
    }
    let max_residual = reports.iter().map(|r| r.max_residual).fold(0.0, f64::max);
    let passed = max_residual < p.tolerance && drift_gap < p.tolerance;
    out.csv("residuals.csv", |w| {
        use std::io::Write;
        writeln!(w, "kappa,side,N,p,max_residual")?;
        for r in &reports {
            let side = if r.side == Side::Forward { "forward" } else { "reverse" };
            writeln!(w, "{:.17e},{side},{},{:.17e},{:.17e}", r.kappa, r.n, r.p, r.max_residual)?;
        }
        Ok(())
    });
    let report = json!({
        "residuals": reports,
        "max_residual": max_residual,
        "max_drift_mismatch": drift_gap,
        "tolerance": p.tolerance,
        "passed": passed,
    });
    Ok(Outcome::new(report, Some(passed)))
}
