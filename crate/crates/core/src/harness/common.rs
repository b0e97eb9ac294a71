use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::averages::{Kernel, ScaleSet};
use crate::error::{Error, Result};
use crate::lattice::{ball_points, concentric_3q, dyadic_cube_of, Field, GridSpec, Radius};
use crate::variation::{var_inhom, SampledPath};
use crate::weights::{a1_constant, ap_constant, CubeFamily, Weight};

use super::config::{RunConfig, WeightSpec};
use super::ensemble::trial_seed;
use super::report::{Checker, ExperimentReport, Fit, PlotData, SweepRow, TrialRecord, Witness};

/// Which Muckenhoupt constant labels a weight row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightClass {
    Ap(f64),
    A1,
}

pub struct WeightRow {
    pub label: String,
    pub weight: Weight,
    pub constant: f64,
}

fn fmt_alpha(a: f64) -> String {
    format!("power({})", (a * 1e6).round() / 1e6)
}

/// The weights a run iterates over: the configured one, or the standard sweep
/// `{flat, power(a1), power(a2), two-value, random-ap}`.
///
/// For `A_p` the powers are `0.2` and `0.45 d (p - 1)`; for `A_1`, which
/// excludes increasing powers, they are `-0.2` and `-0.45 d`.
pub fn weight_rows(cfg: &RunConfig, class: WeightClass) -> Result<Vec<WeightRow>> {
    let grid = cfg.grid;
    let d = grid.dim() as f64;
    let sweep_seed = trial_seed(cfg.seed, u64::MAX);
    let weights: Vec<(String, Weight)> = match &cfg.weight {
        WeightSpec::Flat => vec![("flat".into(), Weight::flat(grid))],
        WeightSpec::Power { alpha } => vec![(fmt_alpha(*alpha), Weight::power(grid, *alpha)?)],
        WeightSpec::TwoValue { low, high } => vec![("two-value".into(), Weight::two_value(grid, *low, *high)?)],
        WeightSpec::RandomAp { seed } => vec![("random-ap".into(), Weight::random_ap(grid, *seed)?)],
        WeightSpec::Sweep => {
            let (a1, a2) = match class {
                WeightClass::Ap(p) => (0.2, 0.45 * d * (p - 1.0)),
                WeightClass::A1 => (-0.2, -0.45 * d),
            };
            vec![
                ("flat".into(), Weight::flat(grid)),
                (fmt_alpha(a1), Weight::power(grid, a1)?),
                (fmt_alpha(a2), Weight::power(grid, a2)?),
                ("two-value".into(), Weight::two_value(grid, 1.0, 4.0)?),
                ("random-ap".into(), Weight::random_ap(grid, sweep_seed)?),
            ]
        }
    };
    let family = match class {
        // the exceptional-set bound needs every lattice cube in the family
        WeightClass::A1 => CubeFamily::AllAligned,
        WeightClass::Ap(_) => cfg.cube_family(),
    };
    weights
        .into_iter()
        .map(|(label, weight)| {
            let constant = match class {
                WeightClass::Ap(p) => ap_constant(&weight, p, family)?,
                WeightClass::A1 => a1_constant(&weight, family)?,
            };
            Ok(WeightRow { label, weight, constant })
        })
        .collect()
}

/// `(sum |v|^p w)^{1/p}`, summed in index order.
pub fn lp_w(values: &[f64], w: &[f64], p: f64) -> f64 {
    let mut s = 0.0;
    for (v, wt) in values.iter().zip(w) {
        s += v.abs().powf(p) * wt;
    }
    s.powf(1.0 / p)
}

/// `(sum |v|^p)^{1/p}`.
pub fn lp(values: &[f64], p: f64) -> f64 {
    let mut s = 0.0;
    for v in values {
        s += v.abs().powf(p);
    }
    s.powf(1.0 / p)
}

/// Nearest-rank percentile of the positive entries, `q` in `[0, 1]`.
pub fn positive_percentile(values: &[f64], q: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|&x| x > 0.0).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    Some(v[idx])
}

/// Dyadic grid `lo 2^j` up to `hi` (both ends included).
pub fn dyadic_grid(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut l = lo;
    while l < hi {
        out.push(l);
        l *= 2.0;
    }
    out.push(hi);
    out
}

/// Thresholds spaced by factors of two across `[P1, P99]` of the positive
/// entries, offset by half an octave so that no threshold coincides with an
/// attained value. Empty when every entry is zero.
pub fn lambda_grid(values: &[f64]) -> Vec<f64> {
    let (Some(lo), Some(hi)) = (positive_percentile(values, 0.01), positive_percentile(values, 0.99)) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut l = lo * std::f64::consts::FRAC_1_SQRT_2;
    while l <= hi * std::f64::consts::SQRT_2 {
        out.push(l);
        l *= 2.0;
    }
    out
}

/// Runs `op` on every trial in parallel, results in trial order.
pub fn par_trials<T, F>(ens: &[(u64, Field)], op: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64, &Field) -> Result<T> + Sync,
{
    ens.par_iter().enumerate().map(|(i, (seed, f))| op(i, *seed, f)).collect()
}

/// Grid used by the direct-summation oracle: the run's grid capped at
/// `2^9` points in one dimension and `32 x 32` in two, where enumeration
/// stays cheap.
pub fn oracle_setup(grid: &GridSpec, scales: &ScaleSet) -> Result<(GridSpec, ScaleSet)> {
    let k = grid.log_side().min(if grid.dim() == 1 { 9 } else { 5 });
    let g = GridSpec::new(grid.dim(), k)?;
    let s = ScaleSet::full(&g, scales.refinement, scales.kernel)?;
    Ok((g, s))
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()) || (a - b).abs() <= f64::MIN_POSITIVE
}

/// Direct-summation reference implementations: every average is an explicit
/// sum over enumerated lattice points and every variation goes through the
/// generic path DP.
pub mod direct {
    use super::*;

    pub fn kernel_points(grid: &GridSpec, x: usize, t: Radius, kernel: Kernel) -> Result<Vec<usize>> {
        match kernel {
            Kernel::Ball => ball_points(grid, grid.coords(x), t),
            Kernel::Cube => {
                let h = t.floor() as i64;
                let ys = if grid.dim() == 1 { 0..=0 } else { -h..=h };
                let mut out = Vec::new();
                for dy in ys {
                    for dx in -h..=h {
                        out.push(grid.shifted(x, [dx, dy]));
                    }
                }
                Ok(out)
            }
        }
    }

    /// `paths[x][m] = A_{t_m} f(x)` for one component.
    pub fn average_paths(f: &[f64], grid: &GridSpec, scales: &ScaleSet) -> Result<Vec<Vec<f64>>> {
        let radii = scales.radii();
        let mut paths = vec![Vec::with_capacity(radii.len()); grid.len()];
        for &t in &radii {
            for (x, path) in paths.iter_mut().enumerate() {
                let pts = kernel_points(grid, x, t, scales.kernel)?;
                path.push(pts.iter().map(|&p| f[p]).sum::<f64>() / pts.len() as f64);
            }
        }
        Ok(paths)
    }

    pub fn cube_mean(f: &[f64], grid: &GridSpec, x: usize, k: u32) -> Result<f64> {
        let pts = dyadic_cube_of(grid, grid.coords(x), k)?.points(grid);
        Ok(pts.iter().map(|&p| f[p]).sum::<f64>() / pts.len() as f64)
    }

    /// `S~ f` from enumerated averages.
    pub fn square_function(f: &[f64], grid: &GridSpec, scales: &ScaleSet) -> Result<Vec<f64>> {
        let paths = average_paths(f, grid, scales)?;
        let mut acc = vec![0.0; grid.len()];
        for k in scales.levels() {
            let range = scales.level_range(k)?;
            let mut sk = vec![0.0; grid.len()];
            for x in 0..grid.len() {
                let e = cube_mean(f, grid, x, k)?;
                let path: Vec<f64> = paths[x][range.clone()].iter().map(|a| a - e).collect();
                sk[x] = var_inhom(&SampledPath::from_values(path)?, 2.0)?;
            }
            for q in grid.cubes(k)? {
                let m = concentric_3q(grid, &q)?.iter().map(|&y| sk[y]).fold(f64::NEG_INFINITY, f64::max);
                for p in q.points(grid) {
                    acc[p] += m * m;
                }
            }
        }
        Ok(acc.into_iter().map(f64::sqrt).collect())
    }
}

/// Collects trial records and checks, then assembles the report.
pub struct ReportBuilder {
    name: String,
    anchor: String,
    config: RunConfig,
    pub trials: Vec<TrialRecord>,
    pub rows: Vec<SweepRow>,
    pub fits: Vec<Fit>,
    pub metrics: BTreeMap<String, f64>,
    pub checker: Checker,
    pub degenerate: usize,
    pub plot: PlotData,
    start: Instant,
}

impl ReportBuilder {
    pub fn new(name: &str, anchor: &str, config: &RunConfig) -> Self {
        ReportBuilder {
            name: name.into(),
            anchor: anchor.into(),
            config: config.clone(),
            trials: Vec::new(),
            rows: Vec::new(),
            fits: Vec::new(),
            metrics: BTreeMap::new(),
            checker: Checker::new(),
            degenerate: 0,
            plot: PlotData::new("x", "y"),
            start: Instant::now(),
        }
    }

    pub fn plot_labels(&mut self, x: &str, y: &str) {
        self.plot.x_label = x.into();
        self.plot.y_label = y.into();
    }

    /// Adds a trial, counting it as degenerate when `rhs = 0`.
    pub fn trial(&mut self, id: String, lhs: f64, rhs: f64, seed: u64) -> Option<f64> {
        match TrialRecord::new(id, lhs, rhs, seed) {
            Some(t) => {
                let r = t.ratio;
                self.trials.push(t);
                Some(r)
            }
            None => {
                self.degenerate += 1;
                None
            }
        }
    }

    /// Adds a trial whose ratio is zero by convention (nothing to measure).
    pub fn zero_trial(&mut self, id: String, seed: u64) {
        self.trials.push(TrialRecord { trial_id: id, lhs: 0.0, rhs: 0.0, ratio: 0.0, seed });
    }

    pub fn row(&mut self, label: &str, constant: f64, prefix: &str) {
        self.row_matching(label, constant, |id| id.starts_with(prefix));
    }

    pub fn row_matching(&mut self, label: &str, constant: f64, pred: impl Fn(&str) -> bool) {
        let (max_ratio, trials) = self
            .trials
            .iter()
            .filter(|t| pred(&t.trial_id))
            .fold((0.0f64, 0usize), |(m, n), t| (m.max(t.ratio), n + 1));
        self.rows.push(SweepRow { label: label.into(), constant, max_ratio, trials });
    }

    pub fn fit(&mut self, name: &str, pts: &[(f64, f64)]) -> Option<Fit> {
        let f = Fit::least_squares(name, pts)?;
        self.fits.push(f.clone());
        Some(f)
    }

    pub fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.into(), v);
    }

    pub fn finish(mut self) -> ExperimentReport {
        let mut max_ratio = 0.0f64;
        let mut witness = None;
        for t in &self.trials {
            if t.ratio > max_ratio || witness.is_none() {
                max_ratio = max_ratio.max(t.ratio);
                witness = Some(Witness {
                    trial_id: t.trial_id.clone(),
                    seed: t.seed,
                    generator: self.config.ensemble.generator.label().into(),
                    ratio: t.ratio,
                });
            }
        }
        if let Some(b) = self.config.options.baseline {
            let w = witness.as_ref().map_or((String::new(), 0), |w| (w.trial_id.clone(), w.seed));
            self.checker.check("frozen baseline", max_ratio <= 1.05 * b, &w.0, w.1, || {
                format!("max_ratio {max_ratio} exceeds 1.05 x baseline {b}")
            });
        }
        let (checks, violations) = self.checker.finish();
        ExperimentReport {
            name: self.name,
            anchor: self.anchor,
            config: self.config,
            trials: self.trials,
            max_ratio,
            witness,
            rows: self.rows,
            fits: self.fits,
            metrics: self.metrics,
            checks,
            violations,
            degenerate: self.degenerate,
            plot: self.plot,
            runtime_secs: self.start.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

/// Plot and trend of `max_ratio` against the row constants.
pub fn finish_sweep(mut b: ReportBuilder, x: &str, y: &str) -> Result<ExperimentReport> {
    b.plot_labels(x, y);
    let pts: Vec<(f64, f64)> = b.rows.iter().map(|r| (r.constant, r.max_ratio)).collect();
    b.plot.points = pts.clone();
    let logs: Vec<(f64, f64)> = pts.iter().filter(|p| p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    b.fit("log max_ratio vs log weight constant", &logs);
    for r in b.rows.clone() {
        b.checker.check("max_ratio finite on every row", r.max_ratio.is_finite(), &r.label, 0, || format!("{}", r.max_ratio));
    }
    Ok(b.finish())
}

pub fn trial_id(row: &str, i: usize) -> String {
    format!("{row}/t{i:04}")
}

pub fn scalar_input(f: &Field) -> Result<Field> {
    if f.family_size() != 1 {
        return Err(Error::Config("this experiment takes scalar ensembles (family_size = 1)".into()));
    }
    Ok(f.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averages::{avg_stack, square_function};
    use crate::harness::ensemble::{make_trial, Generator};

    #[test]
    fn percentile_and_grid() {
        let v = [0.0, 3.0, 1.0, 2.0, 4.0];
        assert_eq!(positive_percentile(&v, 0.0), Some(1.0));
        assert_eq!(positive_percentile(&v, 0.5), Some(2.0));
        assert_eq!(positive_percentile(&v, 1.0), Some(4.0));
        assert_eq!(positive_percentile(&[0.0], 0.5), None);
        assert_eq!(dyadic_grid(1.0, 5.0), vec![1.0, 2.0, 4.0, 5.0]);
    }

    #[test]
    fn direct_oracle_agrees_with_fast_path() {
        for dim in [1, 2] {
            let grid = GridSpec::new(dim, if dim == 1 { 7 } else { 5 }).unwrap();
            let scales = ScaleSet::full(&grid, 4, Kernel::Ball).unwrap();
            let f = make_trial(Generator::GaussianField, grid, 1, 5).unwrap();
            let fast = square_function(&f, &scales).unwrap();
            let slow = direct::square_function(f.values(), &grid, &scales).unwrap();
            for (a, b) in fast.values().iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-11 * (1.0 + b.abs()));
            }
            let cube = ScaleSet::full(&grid, 4, Kernel::Cube).unwrap();
            let stack = avg_stack(&f, &cube).unwrap();
            let paths = direct::average_paths(f.values(), &grid, &cube).unwrap();
            for x in [0, 7, grid.len() - 1] {
                for (m, s) in stack.slices.iter().enumerate() {
                    assert!((s.values()[x] - paths[x][m]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sweep_rows() {
        let cfg = RunConfig::new("x", GridSpec::new(1, 6).unwrap());
        let rows = weight_rows(&cfg, WeightClass::Ap(2.0)).unwrap();
        let labels: Vec<&str> = rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["flat", "power(0.2)", "power(0.45)", "two-value", "random-ap"]);
        assert_eq!(rows[0].constant, 1.0);
        assert!(rows.iter().all(|r| r.constant >= 1.0 && r.constant.is_finite()));
        let a1 = weight_rows(&cfg, WeightClass::A1).unwrap();
        assert_eq!(a1[1].label, "power(-0.2)");
    }
}
