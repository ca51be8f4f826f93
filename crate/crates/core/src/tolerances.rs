// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

//! Default numerical thresholds.

/// Smallest gap allowed between neighbouring particles.
pub const GAP_FLOOR: f64 = 1e-9;
/// Step halvings tried before a collision is reported.
pub const MAX_HALVINGS: u32 = 40;
/// Distance to a driving point at which a tracked point counts as swallowed.
pub const SWALLOW_TOLERANCE: f64 = 1e-6;
/// Vertical offset used to locate slit tips.
pub const TIP_OFFSET: f64 = 1e-4;
/// Largest RK4 substep of the Loewner flows.
pub const ODE_STEP: f64 = 1e-3;
/// Substep scale relative to the local time scale `d^2 / (2N)`.
pub const STEP_SAFETY: f64 = 0.02;
/// Substeps below this are treated as a collapse.
pub const MIN_STEP: f64 = 1e-16;
/// Accepted round-trip error for `g_T(f_T(w))`.
pub const COMPOSITION_TOL: f64 = 1e-6;
/// Radius used by the capacity fit.
pub const CAPACITY_RADIUS: f64 = 100.0;
/// Relative fit residual above which the capacity fit is flagged.
pub const CAPACITY_FIT_WARN: f64 = 1e-3;
/// Relative negative-eigenvalue slack of a Gram matrix.
pub const PSD_SLACK: f64 = 1e-10;
/// Absolute accuracy requested from adaptive quadrature.
pub const QUAD_TOL: f64 = 1e-11;
/// Magnitude below which both sides of a bracket identity count as zero.
pub const DISCREPANCY_FLOOR: f64 = 1e-9;
/// Significance level of the stationarity tests (before Bonferroni).
pub const KS_LEVEL: f64 = 0.01;
/// Maximal tolerated fraction of discarded stationarity replicas.
pub const MAX_DISCARD: f64 = 0.05;
/// Minimal number of replicas of a stationarity test.
pub const MIN_REPLICAS: usize = 100;
