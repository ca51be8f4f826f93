// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

//! Loading, running and recording one scenario file.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use loewnerlab::rng::parse_seed;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::experiments::{self, Artifacts, Failure, Outcome};

/// Environment variable that overrides the seed of every scenario.
pub const SEED_ENV: &str = "LOEWNERLAB_SEED";

/// Keys shared by all experiments; everything else is the parameter block.
const COMMON_KEYS: [&str; 4] = ["name", "experiment", "seed", "description"];

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SeedSource {
    Flag,
    Env,
    Config,
    Default,
}

#[derive(Serialize)]
struct Versions {
    loewnerlab: &'static str,
    #[serde(rename = "loewnerlab-cli")]
    cli: &'static str,
}

#[derive(Serialize)]
pub struct Manifest {
    pub name: String,
    pub experiment: Option<String>,
    pub config_path: String,
    /// The configuration file as read.
    pub config: Value,
    pub seed: Option<u64>,
    pub seed_source: Option<SeedSource>,
    versions: Versions,
    pub started_unix: u64,
    pub wall_time_s: f64,
    pub status: &'static str,
    pub exit_code: u8,
    pub error: Option<String>,
    pub passed: Option<bool>,
    pub outputs: Vec<String>,
}

/// Seed given on the command line, already parsed.
#[derive(Clone, Copy, Debug, Default)]
pub struct SeedOverride(pub Option<u64>);

fn resolve_seed(flag: SeedOverride, config: Option<&Value>) -> Result<(u64, SeedSource), Failure> {
    if let Some(s) = flag.0 {
        return Ok((s, SeedSource::Flag));
    }
    if let Ok(text) = std::env::var(SEED_ENV) {
        let s = parse_seed(&text).map_err(|e| experiments::invalid(format!("{SEED_ENV}: {e}")))?;
        return Ok((s, SeedSource::Env));
    }
    match config {
        None => Ok((0, SeedSource::Default)),
        Some(Value::Number(n)) => {
            n.as_u64().map(|s| (s, SeedSource::Config)).ok_or_else(|| experiments::invalid("seed must be a non-negative integer"))
        }
        Some(Value::String(t)) => Ok((parse_seed(t).map_err(|e| experiments::invalid(e.to_string()))?, SeedSource::Config)),
        Some(_) => Err(experiments::invalid("seed must be an integer or a string")),
    }
}

/// Output of [`run_file`].
pub struct RunSummary {
    pub name: String,
    pub dir: PathBuf,
    pub exit_code: u8,
    pub status: &'static str,
    pub error: Option<String>,
    pub wall_time_s: f64,
}

/// Runs the scenario at `path`, writing its artifacts below `out`.
pub fn run_file(path: &Path, out: &Path, seed: SeedOverride) -> anyhow::Result<RunSummary> {
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario").to_owned();

    let mut config = Value::Null;
    let mut name = stem;
    let mut experiment = None;
    let mut seed_used = None;
    let mut artifacts = Artifacts::default();

    let result: Result<Outcome, Failure> = (|| {
        let text = fs::read_to_string(path).map_err(|e| experiments::invalid(format!("{}: {e}", path.display())))?;
        config = serde_json::from_str(&text).map_err(|e| experiments::invalid(format!("malformed config: {e}")))?;
        let Value::Object(map) = &config else {
            return Err(experiments::invalid("config must be a JSON object"));
        };
        if let Some(n) = map.get("name") {
            name = n.as_str().ok_or_else(|| experiments::invalid("name must be a string"))?.to_owned();
            if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                return Err(experiments::invalid("name must be a plain file name"));
            }
        }
        let exp_name = map
            .get("experiment")
            .and_then(Value::as_str)
            .ok_or_else(|| experiments::invalid("missing field `experiment`"))?;
        experiment = Some(exp_name.to_owned());
        let exp = experiments::find(exp_name).ok_or_else(|| experiments::invalid(format!("unknown experiment `{exp_name}`")))?;
        let (s, source) = resolve_seed(seed, map.get("seed"))?;
        seed_used = Some((s, source));
        let params: Map<String, Value> =
            map.iter().filter(|(k, _)| !COMMON_KEYS.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect();
        exp.run(params, s, &mut artifacts)
    })();

    let (status, exit_code, error, passed, report) = match result {
        Ok(o) if o.passed == Some(false) => ("check-failed", 3, Some("threshold check failed".to_owned()), o.passed, Some(o.report)),
        Ok(o) => ("ok", 0, None, o.passed, Some(o.report)),
        Err(f) => (
            if f.exit_code() == 2 { "validation-failure" } else { "numerical-failure" },
            f.exit_code(),
            Some(f.message().to_owned()),
            None,
            None,
        ),
    };
    let dir = if exit_code == 0 { out.join(&name) } else { out.join(&name).join("failed") };
    if let Some(r) = &report {
        artifacts.json("report.json", r);
    }
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut outputs = Vec::new();
    for (file, bytes) in &artifacts.files {
        fs::write(dir.join(file), bytes).with_context(|| format!("writing {file}"))?;
        outputs.push(file.clone());
    }
    let wall_time_s = started.elapsed().as_secs_f64();
    let manifest = Manifest {
        name: name.clone(),
        experiment,
        config_path: path.display().to_string(),
        config,
        seed: seed_used.map(|s| s.0),
        seed_source: seed_used.map(|s| s.1),
        versions: Versions { loewnerlab: loewnerlab::VERSION, cli: env!("CARGO_PKG_VERSION") },
        started_unix,
        wall_time_s,
        status,
        exit_code,
        error: error.clone(),
        passed,
        outputs,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    fs::write(dir.join("manifest.json"), bytes).context("writing manifest.json")?;
    Ok(RunSummary { name, dir, exit_code, status, error, wall_time_s })
}

/// Scenario files of a suite directory, in name order.
pub fn suite_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}
