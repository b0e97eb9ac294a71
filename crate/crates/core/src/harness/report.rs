use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::Result;

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Seed of the generated input, enough to rebuild it.
    pub seed: u64,
}

impl TrialRecord {
    /// Ratio `lhs / rhs`, or `None` for a degenerate `rhs = 0` trial.
    pub fn new(trial_id: String, lhs: f64, rhs: f64, seed: u64) -> Option<Self> {
        if rhs > 0.0 {
            Some(TrialRecord { trial_id, lhs, rhs, ratio: lhs / rhs, seed })
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub trial_id: String,
    pub seed: u64,
    pub generator: String,
    pub ratio: f64,
}

/// `max_ratio` of one parameter row (a weight of the sweep, an exponent, a level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    /// The controlling constant of the row, e.g. `[w]_{A_p}`.
    pub constant: f64,
    pub max_ratio: f64,
    pub trials: usize,
}

/// Least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub name: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl Fit {
    pub fn least_squares(name: &str, pts: &[(f64, f64)]) -> Option<Fit> {
        let n = pts.len();
        if n < 2 {
            return None;
        }
        let nf = n as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
        if sxx == 0.0 {
            return None;
        }
        let slope = sxy / sxx;
        let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
        Some(Fit { name: name.to_string(), slope, intercept: my - slope * mx, r_squared, points: n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub evaluated: u64,
    pub violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub invariant: String,
    pub trial_id: String,
    pub seed: u64,
    pub detail: String,
}

/// Accumulates invariant checks; merged in trial order after parallel runs.
#[derive(Debug, Clone, Default)]
pub struct Checker {
    checks: BTreeMap<String, (u64, u64)>,
    violations: Vec<Violation>,
}

const MAX_VIOLATIONS: usize = 64;

impl Checker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn check(&mut self, name: &str, ok: bool, trial_id: &str, seed: u64, detail: impl FnOnce() -> String) -> bool {
        let e = self.checks.entry(name.to_string()).or_default();
        e.0 += 1;
        if !ok {
            e.1 += 1;
            if self.violations.len() < MAX_VIOLATIONS {
                self.violations.push(Violation { invariant: name.to_string(), trial_id: trial_id.to_string(), seed, detail: detail() });
            }
        }
        ok
    }

    /// Registers a check that was evaluated `n` times without failures.
    pub fn pass_many(&mut self, name: &str, n: u64) {
        self.checks.entry(name.to_string()).or_default().0 += n;
    }

    pub fn merge(&mut self, other: Checker) {
        for (k, (e, v)) in other.checks {
            let s = self.checks.entry(k).or_default();
            s.0 += e;
            s.1 += v;
        }
        for v in other.violations {
            if self.violations.len() < MAX_VIOLATIONS {
                self.violations.push(v);
            }
        }
    }

    pub fn violation_count(&self, name: &str) -> u64 {
        self.checks.get(name).map_or(0, |c| c.1)
    }

    pub fn finish(self) -> (Vec<Check>, Vec<Violation>) {
        let checks = self.checks.into_iter().map(|(name, (evaluated, violations))| Check { name, evaluated, violations }).collect();
        (checks, self.violations)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

impl PlotData {
    pub fn new(x_label: &str, y_label: &str) -> Self {
        PlotData { x_label: x_label.into(), y_label: y_label.into(), points: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub anchor: String,
    /// The effective configuration, defaults filled in.
    pub config: RunConfig,
    pub trials: Vec<TrialRecord>,
    pub max_ratio: f64,
    pub witness: Option<Witness>,
    pub rows: Vec<SweepRow>,
    pub fits: Vec<Fit>,
    /// Named scalar results that are not per-trial ratios.
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub violations: Vec<Violation>,
    pub degenerate: usize,
    pub plot: PlotData,
    pub runtime_secs: f64,
    pub version: String,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.violations == 0)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn fit(&self, name: &str) -> Option<&Fit> {
        self.fits.iter().find(|f| f.name == name)
    }

    pub fn row(&self, label: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("trial_id,lhs,rhs,ratio\n");
        for t in &self.trials {
            let _ = writeln!(s, "{},{},{},{}", csv_field(&t.trial_id), fmt17(t.lhs), fmt17(t.rhs), fmt17(t.ratio));
        }
        s
    }

    pub fn plotdata_csv(&self) -> String {
        let mut s = String::from("x,y\n");
        for &(x, y) in &self.plot.points {
            let _ = writeln!(s, "{},{}", fmt17(x), fmt17(y));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Writes `report.json`, `summary.csv` and `plotdata.csv` into `dir`,
    /// each through a temporary file renamed into place.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_atomic(dir, "report.json", self.to_json().as_bytes())?;
        write_atomic(dir, "summary.csv", self.summary_csv().as_bytes())?;
        write_atomic(dir, "plotdata.csv", self.plotdata_csv().as_bytes())?;
        Ok(())
    }
}

/// Float with 17 significant digits, stable across runs and platforms.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt17(0.0), "0.0000000000000000e0");
        for v in [0.1, 1.0 / 3.0, 12345.678, 1e-300, -2.5] {
            assert_eq!(fmt17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn fit_recovers_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 - 0.5 * i as f64)).collect();
        let f = Fit::least_squares("l", &pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        assert!(Fit::least_squares("x", &[(1.0, 1.0)]).is_none());
    }

    #[test]
    fn checker_merges() {
        let mut a = Checker::new();
        a.check("c", true, "t0", 1, String::new);
        let mut b = Checker::new();
        b.check("c", false, "t1", 2, || "bad".into());
        a.merge(b);
        let (checks, v) = a.finish();
        assert_eq!(checks[0].evaluated, 2);
        assert_eq!(checks[0].violations, 1);
        assert_eq!(v[0].trial_id, "t1");
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
