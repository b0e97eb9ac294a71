use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::averages::{Kernel, ScaleSet};
use crate::error::{Error, Result};
use crate::lattice::GridSpec;
use crate::weights::CubeFamily;

use super::ensemble::EnsembleSpec;

/// Exponents shared by the experiments; each one reads only what it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exponents {
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "two")]
    pub q: f64,
    #[serde(default = "three")]
    pub r: f64,
    /// Decay exponent for the reverse Hölder runs; defaults to the midpoint
    /// of `((d-1)/r', d/r')`.
    #[serde(default)]
    pub alpha: Option<f64>,
}

fn two() -> f64 {
    2.0
}

fn three() -> f64 {
    3.0
}

impl Default for Exponents {
    fn default() -> Self {
        Exponents { p: 2.0, q: 2.0, r: 3.0, alpha: None }
    }
}

/// Weight selection: a single family member or the standard sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Flat,
    Power {
        alpha: f64,
    },
    TwoValue {
        low: f64,
        high: f64,
    },
    RandomAp {
        seed: u64,
    },
    #[default]
    Sweep,
}

/// Experiment-specific knobs. Every field has a default, and the resolved
/// values are written back into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Options {
    /// Cube family for maximal functions and weight constants.
    pub cube_family: Option<CubeFamily>,
    /// Dyadic level `k` for single-scale experiments.
    pub level: Option<u32>,
    pub j_min: i32,
    pub j_max: i32,
    pub r_values: Vec<f64>,
    /// Exponent of the coupling `lambda N_lambda^{1/r} <= hV^r`.
    pub coupling_r: f64,
    /// Enlargement of the exceptional cubes in the weak-type pipeline.
    pub enlarge: usize,
    /// Local part `f 1_{cQ}` in the BMO runs.
    pub local_factor: usize,
    pub threshold: f64,
    /// Target mean of `F` after normalisation in the weak-type pipeline.
    pub mass: f64,
    /// Only cubes within `c_dist 2^k` of `x` enter the cube sum.
    pub c_dist: Option<f64>,
    pub atoms: usize,
    pub x_samples: usize,
    pub test_cubes: usize,
    pub a_values: Vec<f64>,
    pub gamma_points: usize,
    pub quantiles: Vec<f64>,
    /// Trials recomputed by the direct-summation oracle.
    pub oracle_trials: usize,
    /// Frozen regression value; runs exceeding `1.05 x baseline` fail.
    pub baseline: Option<f64>,
    /// Longest path for the brute-force variation oracle.
    pub max_path_len: usize,
    /// Exponents for the path oracle runner.
    pub oracle_r: Vec<f64>,
    /// Exponents and sample counts for the embedding check.
    pub sobolev_r: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    /// Levels swept by the geometry calibration.
    pub geometry_levels: Vec<u32>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            cube_family: None,
            level: None,
            j_min: -6,
            j_max: -1,
            r_values: vec![2.1, 2.5, 3.0, 4.0],
            coupling_r: 2.0,
            enlarge: 5,
            local_factor: 3,
            threshold: 1.0,
            mass: 0.125,
            c_dist: None,
            atoms: 16,
            x_samples: 256,
            test_cubes: 4,
            a_values: vec![1.5, 2.0, 4.0],
            gamma_points: 12,
            quantiles: vec![0.5, 0.75, 0.9],
            oracle_trials: 1,
            baseline: None,
            max_path_len: 12,
            oracle_r: vec![1.0, 1.5, 2.0, 3.0],
            sobolev_r: vec![1.5, 2.0, 3.0, 5.0],
            sample_sizes: (8..=14).map(|e| 1 << e).collect(),
            geometry_levels: vec![3, 4, 5, 6],
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("varlab-out")
}

/// A complete run description, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    pub grid: GridSpec,
    /// Defaults to every level that fits the grid, `M = 8`, ball kernel.
    #[serde(default)]
    pub scales: Option<ScaleSet>,
    #[serde(default)]
    pub exponents: Exponents,
    #[serde(default)]
    pub weight: WeightSpec,
    #[serde(default)]
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub options: Options,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn new(experiment: &str, grid: GridSpec) -> Self {
        RunConfig {
            experiment: experiment.to_string(),
            grid,
            scales: None,
            exponents: Exponents::default(),
            weight: WeightSpec::default(),
            ensemble: EnsembleSpec::default(),
            seed: 0,
            output_dir: default_output(),
            options: Options::default(),
        }
    }

    /// Fills every optional field with its effective value.
    pub fn resolved(&self) -> Result<RunConfig> {
        let mut c = self.clone();
        let grid = c.grid;
        if c.scales.is_none() {
            c.scales = Some(ScaleSet::full(&grid, 8, Kernel::Ball).map_err(|e| Error::Config(e.to_string()))?);
        }
        c.options.cube_family.get_or_insert(CubeFamily::default_for(&grid));
        if c.ensemble.seed.is_none() {
            c.ensemble.seed = Some(c.seed);
        }
        Ok(c)
    }

    pub fn scales(&self) -> Result<ScaleSet> {
        match self.scales {
            Some(s) => Ok(s),
            None => ScaleSet::full(&self.grid, 8, Kernel::Ball),
        }
    }

    pub fn cube_family(&self) -> CubeFamily {
        self.options.cube_family.unwrap_or(CubeFamily::default_for(&self.grid))
    }

    pub fn ensemble_seed(&self) -> u64 {
        self.ensemble.seed.unwrap_or(self.seed)
    }
}

/// Precondition helpers producing configuration errors.
pub(crate) fn require(cond: bool, what: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(what()))
    }
}

pub(crate) fn require_open_p(name: &str, v: f64) -> Result<()> {
    require(v > 1.0 && v.is_finite(), || format!("precondition 1 < {name} < inf violated: {name} = {v}"))
}

pub(crate) fn require_scales(cfg: &RunConfig) -> Result<ScaleSet> {
    let s = cfg.scales()?;
    s.check(&cfg.grid).map_err(|e| Error::Config(e.to_string()))?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let ok = r#"{"experiment": "verify_jump", "grid": {"dim": 1, "log_side": 8}}"#;
        assert!(RunConfig::from_json(ok).is_ok());
        let bad = r#"{"experiment": "verify_jump", "grid": {"dim": 1, "log_side": 8}, "colour": 1}"#;
        assert!(matches!(RunConfig::from_json(bad), Err(Error::Config(_))));
        let nested = r#"{"experiment": "x", "grid": {"dim": 1, "log_side": 8}, "options": {"nope": 2}}"#;
        assert!(RunConfig::from_json(nested).is_err());
        let grid = r#"{"experiment": "x", "grid": {"dim": 3, "log_side": 8}}"#;
        assert!(RunConfig::from_json(grid).is_err());
    }

    #[test]
    fn resolved_round_trips() {
        let c = RunConfig::from_json(r#"{"experiment": "verify_jump", "grid": {"dim": 2, "log_side": 6}, "seed": 9}"#).unwrap();
        let r = c.resolved().unwrap();
        assert_eq!(r.scales.unwrap().k_max, 3);
        assert_eq!(r.ensemble.seed, Some(9));
        let text = serde_json::to_string(&r).unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.resolved().unwrap(), r);
    }
}
