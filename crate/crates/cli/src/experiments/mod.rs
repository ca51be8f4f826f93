// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment catalogue. Each experiment parses its own flat parameter
//! block, validates it, runs, and leaves its CSV/JSON payloads in an
//! [`Artifacts`] collector.

mod coupling;
mod driving;
mod field;

use std::collections::BTreeMap;
use std::io;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Why a scenario did not complete.
#[derive(Debug)]
pub enum Failure {
    /// Rejected before any compute (exit 2).
    Validation(String),
    /// Failed mid-computation, or a checked threshold was missed (exit 3).
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<loewnerlab::Error> for Failure {
    fn from(e: loewnerlab::Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

pub fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

/// Output files collected during a run, written once the outcome is known.
#[derive(Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) {
        let mut buf = Vec::new();
        write(&mut buf).expect("writing to memory");
        self.files.push((name.to_owned(), buf));
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) {
        let mut buf = serde_json::to_vec_pretty(value).expect("serialisable report");
        buf.push(b'\n');
        self.files.push((name.to_owned(), buf));
    }
}

/// Result of a completed experiment.
pub struct Outcome {
    pub report: Value,
    /// `Some` when the experiment carries a pass/fail check.
    pub passed: Option<bool>,
}

impl Outcome {
    fn new(report: impl Serialize, passed: Option<bool>) -> Self {
        Self { report: serde_json::to_value(report).expect("serialisable report"), passed }
    }
}

pub struct Experiment {
    pub name: &'static str,
    pub about: &'static str,
    run: fn(Map<String, Value>, u64, &mut Artifacts) -> Result<Outcome, Failure>,
}

pub const EXPERIMENTS: &[Experiment] = &[
    Experiment {
        name: "simulate",
        about: "driving particle paths; collision counts over replicas; optional g_T(f_T(w)) round trip",
        run: driving::simulate,
    },
    Experiment { name: "trace", about: "slit traces of a simulated driving path", run: driving::trace },
    Experiment { name: "capacity", about: "half-plane capacity of the hulls against 2NT", run: driving::capacity },
    Experiment {
        name: "drift-audit",
        about: "Ito drift of the coupled field at one state, or the random-state nullity protocol",
        run: coupling::drift_audit,
    },
    Experiment {
        name: "cross-variation",
        about: "integrated bracket against the Green-function decrement",
        run: coupling::cross_variation,
    },
    Experiment { name: "stationarity", about: "two-sample KS tests of field pairings", run: coupling::stationarity },
    Experiment {
        name: "cft-check",
        about: "annihilation residuals of the auxiliary functions and their drifts",
        run: coupling::cft_check,
    },
    Experiment {
        name: "flowline",
        about: "boundary jumps, decorated plateaus and an optional flow-line trace",
        run: field::flowline,
    },
    Experiment {
        name: "boundary-length",
        about: "renormalised boundary length at several regularisation scales",
        run: field::boundary_length,
    },
];

pub fn find(name: &str) -> Option<&'static Experiment> {
    EXPERIMENTS.iter().find(|e| e.name == name)
}

impl Experiment {
    pub fn run(&self, params: Map<String, Value>, seed: u64, out: &mut Artifacts) -> Result<Outcome, Failure> {
        (self.run)(params, seed, out)
    }
}

/// Deserialises a parameter block that carries a catch-all `unknown` map,
/// rejecting misspelt keys.
fn parse<P: DeserializeOwned + HasUnknown>(params: Map<String, Value>) -> Result<P, Failure> {
    let p: P = serde_json::from_value(Value::Object(params)).map_err(|e| invalid(e.to_string()))?;
    if let Some(key) = p.unknown().keys().next() {
        return Err(invalid(format!("unknown parameter `{key}`")));
    }
    Ok(p)
}

pub(crate) trait HasUnknown {
    fn unknown(&self) -> &BTreeMap<String, Value>;
}

macro_rules! has_unknown {
    ($($t:ty),*) => {
        $(impl super::HasUnknown for $t {
            fn unknown(&self) -> &BTreeMap<String, Value> {
                &self.unknown
            }
        })*
    };
}
use has_unknown;

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Deserialize)]
    struct Inner {
        a: f64,
    }

    #[derive(Deserialize)]
    struct Outer {
        #[serde(flatten)]
        inner: Inner,
        b: Option<f64>,
        #[serde(flatten)]
        unknown: BTreeMap<String, Value>,
    }
    has_unknown!(Outer);

    fn map(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn flattened_keys_are_not_unknown() {
        let p: Outer = parse(map(serde_json::json!({"a": 1.0, "b": 2.0}))).unwrap();
        assert_eq!((p.inner.a, p.b), (1.0, Some(2.0)));
    }

    #[test]
    fn misspelt_keys_are_rejected() {
        let e = parse::<Outer>(map(serde_json::json!({"a": 1.0, "kapa": 2.0}))).err().unwrap();
        assert!(matches!(e, Failure::Validation(m) if m.contains("kapa")));
    }

    #[test]
    fn missing_keys_are_validation_failures() {
        assert!(matches!(parse::<Outer>(Map::new()), Err(Failure::Validation(_))));
    }
}
