//! Ensembles, experiments and their reports.

pub mod baselines;
pub mod common;
pub mod config;
pub mod ensemble;
pub mod good_lambda;
pub mod jump;
pub mod local;
pub mod report;
pub mod square;
pub mod units;
pub mod vector;

pub use config::{Exponents, Options, RunConfig, WeightSpec};
pub use ensemble::{make_ensemble, make_trial, trial_seed, EnsembleSpec, Generator};
pub use report::{Check, ExperimentReport, Fit, PlotData, SweepRow, TrialRecord, Violation, Witness};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Ratio-boundedness or decay statement over an ensemble.
    Verify,
    /// Oracle or invariant suite for one module.
    Unit,
}

/// A registered experiment.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentInfo {
    pub name: &'static str,
    pub anchor: &'static str,
    pub kind: ExperimentKind,
    pub required: &'static [&'static str],
    pub optional: &'static [&'static str],
    pub run: fn(&RunConfig) -> Result<ExperimentReport>,
}

const BASE: &[&str] = &["experiment", "grid"];

static REGISTRY: &[ExperimentInfo] = &[
    ExperimentInfo {
        name: "verify_square_strong",
        anchor: square::ANCHOR_STRONG,
        kind: ExperimentKind::Verify,
        required: BASE,
        optional: &["scales", "exponents.p", "weight", "ensemble", "seed", "options.oracle_trials", "options.baseline"],
        run: square::verify_square_strong,
    },
    ExperimentInfo {
        name: "verify_square_weak",
        anchor: square::ANCHOR_WEAK,
        kind: ExperimentKind::Verify,
        required: BASE,
        optional: &["scales", "weight", "ensemble", "seed", "options.oracle_trials", "options.baseline"],
        run: square::verify_square_weak,
    },
    ExperimentInfo {
        name: "verify_jump",
        anchor: jump::ANCHOR,
        kind: ExperimentKind::Verify,
        required: BASE,
        optional: &["scales", "exponents.p", "weight", "ensemble", "seed", "options.coupling_r", "options.oracle_trials", "options.baseline"],
        run: jump::verify_jump,
    },
    ExperimentInfo {
        name: "verify_variation",
        anchor: vector::ANCHOR_VARIATION,
        kind: ExperimentKind::Verify,
        required: BASE,
        optional: &["scales", "exponents.p", "exponents.q", "weight", "ensemble", "seed", "options.r_values", "options.oracle_trials", "options.baseline"],
        run: vector::verify_variation,
    },
    ExperimentInfo {
        name: "verify_weak11_vector",
        anchor: vector::ANCHOR_WEAK11,
        kind: ExperimentKind::Verify,
        required: BASE,
        optional: &["scales", "exponents.q", "exponents.r", "weight", "ensemble", "seed", "options.threshold", "options.mass", "options.enlarge", "options.baseline"],
        run: vector::verify_weak11_vector,
    },
    ExperimentInfo {
        name: "verify_reverse_holder",
        anchor: local::ANCHOR,
        kind: ExperimentKind::Verify,
        required: BASE,
        optional: &["scales", "exponents.r", "exponents.alpha", "ensemble", "seed", "options.level", "options.atoms", "options.x_samples", "options.c_dist", "options.baseline"],
        run: local::verify_reverse_holder,
    },
    ExperimentInfo {
        name: "verify_short_scale_decay",
        anchor: square::ANCHOR_DECAY,
        kind: ExperimentKind::Verify,
        required: BASE,
        optional: &["scales", "exponents.p", "weight", "ensemble", "seed", "options.level", "options.j_min", "options.j_max", "options.baseline"],
        run: square::verify_short_scale_decay,
    },
    ExperimentInfo {
        name: "verify_bmo",
        anchor: vector::ANCHOR_BMO,
        kind: ExperimentKind::Verify,
        required: BASE,
        optional: &["scales", "exponents.q", "exponents.r", "ensemble", "seed", "options.test_cubes", "options.local_factor", "options.baseline"],
        run: vector::verify_bmo,
    },
    ExperimentInfo {
        name: "verify_good_lambda",
        anchor: good_lambda::ANCHOR,
        kind: ExperimentKind::Verify,
        required: BASE,
        optional: &["scales", "exponents.p", "weight", "ensemble", "seed", "options.a_values", "options.quantiles", "options.gamma_points", "options.cube_family", "options.baseline"],
        run: good_lambda::verify_good_lambda,
    },
    ExperimentInfo {
        name: "oracle_variation",
        anchor: units::ANCHOR_ORACLE,
        kind: ExperimentKind::Unit,
        required: BASE,
        optional: &["ensemble.count", "seed", "options.max_path_len", "options.oracle_r"],
        run: units::oracle_variation,
    },
    ExperimentInfo {
        name: "sobolev_check",
        anchor: units::ANCHOR_SOBOLEV,
        kind: ExperimentKind::Unit,
        required: BASE,
        optional: &["options.sobolev_r", "options.sample_sizes"],
        run: units::sobolev_check,
    },
    ExperimentInfo {
        name: "martingale_algebra",
        anchor: units::ANCHOR_MARTINGALE,
        kind: ExperimentKind::Unit,
        required: BASE,
        optional: &["ensemble", "seed"],
        run: units::martingale_algebra,
    },
    ExperimentInfo {
        name: "cz_invariants",
        anchor: units::ANCHOR_CZ,
        kind: ExperimentKind::Unit,
        required: BASE,
        optional: &["exponents.q", "ensemble", "seed", "options.threshold", "options.mass"],
        run: units::cz_invariants,
    },
    ExperimentInfo {
        name: "geometry_calibration",
        anchor: units::ANCHOR_GEOMETRY,
        kind: ExperimentKind::Unit,
        required: BASE,
        optional: &["scales.refinement", "seed", "options.x_samples", "options.geometry_levels"],
        run: units::geometry_calibration,
    },
];

pub fn registry() -> &'static [ExperimentInfo] {
    REGISTRY
}

pub fn find_experiment(name: &str) -> Option<&'static ExperimentInfo> {
    REGISTRY.iter().find(|e| e.name == name)
}

/// Resolves defaults, validates, and runs the named experiment.
///
/// Precondition failures surface as [`Error::Config`]; invariant violations
/// are recorded in the report, not returned as errors.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport> {
    let info = find_experiment(&cfg.experiment).ok_or_else(|| {
        let names: Vec<&str> = REGISTRY.iter().map(|e| e.name).collect();
        Error::Config(format!("unknown experiment {:?}; known: {}", cfg.experiment, names.join(", ")))
    })?;
    let cfg = cfg.resolved()?;
    config::require(cfg.ensemble.count > 0, || "ensemble.count must be positive".into())?;
    config::require(cfg.ensemble.family_size > 0, || "ensemble.family_size must be positive".into())?;
    if let Some(b) = cfg.options.baseline {
        config::require(b >= 0.0 && b.is_finite(), || format!("baseline must be finite and nonnegative, got {b}"))?;
    }
    (info.run)(&cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn names_are_distinct() {
        let names: HashSet<&str> = registry().iter().map(|e| e.name).collect();
        assert_eq!(names.len(), registry().len());
        let verify = registry().iter().filter(|e| e.kind == ExperimentKind::Verify).count();
        assert_eq!(verify, 9);
        assert!(registry().iter().all(|e| e.name.starts_with("verify_") == (e.kind == ExperimentKind::Verify)));
    }

    #[test]
    fn unknown_experiment_is_a_config_error() {
        let cfg = RunConfig::new("nope", crate::lattice::GridSpec::new(1, 6).unwrap());
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    }
}
