// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

//! Drift audits, bracket checks, the cutting operation and the Monte Carlo
//! stationarity comparison for the welding and flow-line couplings.

mod audit;
mod crossvar;
mod cutting;
mod stationarity;

pub use audit::{drift_audit, CouplingMode, CouplingParams, CouplingState, DriftAuditReport};
pub use crossvar::{cross_variation_check, CrossMode, CrossVariationReport};
pub use cutting::{cutting_operation, energy_profile, CuttingRecipe, PulledFunctional};
pub use stationarity::{stationarity_test, FunctionalStat, StationarityConfig, StationarityMode, StationarityReport};
