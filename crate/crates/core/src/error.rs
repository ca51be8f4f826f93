// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Failures reported by the library.
///
/// Variants split into validation failures (bad inputs, rejected before any
/// compute) and numerical failures (raised mid-computation).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point outside domain: {0}")]
    Domain(String),
    #[error("time {0} is not on the driving grid")]
    Grid(String),
    #[error("functional not admissible: {0}")]
    Admissibility(String),
    #[error("kernel evaluated on its diagonal")]
    Singularity,
    #[error("particle collision at step {step} (t = {t})")]
    Collision { step: usize, t: f64 },
    #[error("non-finite value at step {step}")]
    NumericalBlowup { step: usize },
    #[error("ODE step collapsed at t = {t}")]
    Stiffness { t: f64 },
    #[error("reverse trajectory left the domain at t = {t}")]
    Inversion { t: f64 },
    #[error("tracked point swallowed at t = {t_reached}")]
    EarlyStop { t_reached: f64 },
    #[error("functional support meets the slits: {0}")]
    Support(String),
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig})")]
    Factorization { min_eig: f64 },
    #[error("traces left the comparable region after arclength {0}")]
    TruncatedComparison(f64),
    #[error("field evaluation failed at arclength {s}: {msg}")]
    FieldEvaluation { s: f64, msg: String },
    #[error("need at least {need} replicas, got {got}")]
    InsufficientReplicas { need: usize, got: usize },
}

impl Error {
    /// True for failures detected before any numerical work.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::Domain(_)
                | Error::Grid(_)
                | Error::Admissibility(_)
                | Error::Singularity
                | Error::InsufficientReplicas { .. }
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
