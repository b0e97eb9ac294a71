//! Jump inequality for the averages `t -> A_t f(x)`.

use rayon::prelude::*;

use crate::averages::{avg_stack, ScaleSet};
use crate::error::Result;
use crate::lattice::Field;
use crate::variation::{hvar_scalar, jump_count, jump_count_scalar, SampledPath};

use super::common::*;
use super::config::{require, require_open_p, require_scales, RunConfig};
use super::ensemble::{make_ensemble, make_trial, Generator};
use super::report::{Checker, ExperimentReport};

pub const ANCHOR: &str = "weighted jump inequality for ergodic averages";

/// Per-point jump counts `counts[x][l]` for the thresholds `lambdas`.
struct JumpTable {
    lambdas: Vec<f64>,
    counts: Vec<Vec<u32>>,
}

impl JumpTable {
    /// `sup_l lambda_l (sum_x N^{p/2} w)^{1/p}`; also the maximizing index.
    fn lhs(&self, w: &[f64], p: f64) -> (f64, Option<usize>) {
        let mut best = (0.0, None);
        for (l, &lam) in self.lambdas.iter().enumerate() {
            let mut s = 0.0;
            for (c, wt) in self.counts.iter().zip(w) {
                s += (c[l] as f64).powf(p / 2.0) * wt;
            }
            let v = lam * s.powf(1.0 / p);
            if v > best.0 {
                best = (v, Some(l));
            }
        }
        best
    }
}

fn oscillation(path: &[f64]) -> f64 {
    let (lo, hi) = path.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    hi - lo
}

/// Fast jump table, with the pointwise coupling and above-oscillation checks.
fn jump_table(f: &Field, scales: &ScaleSet, coupling_r: f64, lambdas: Option<&[f64]>, checker: &mut Checker, id: &str, seed: u64) -> Result<JumpTable> {
    let stack = avg_stack(f, scales)?;
    let n = f.grid().len();
    let range = stack.full_range();
    let paths: Vec<Vec<f64>> = (0..n).into_par_iter().map(|x| stack.path_at(x, 0, range.clone())).collect();
    let osc: Vec<f64> = paths.iter().map(|p| oscillation(p)).collect();
    let lambdas = lambdas.map_or_else(|| lambda_grid(&osc), |l| l.to_vec());
    let rows: Vec<(Vec<u32>, bool, bool)> = paths
        .par_iter()
        .zip(&osc)
        .map_init(Vec::new, |scratch, (path, &o)| {
            let counts: Vec<u32> = lambdas.iter().map(|&l| jump_count_scalar(path, l) as u32).collect();
            let hv = hvar_scalar(path, coupling_r, scratch);
            let coupled = lambdas.iter().zip(&counts).all(|(&l, &c)| l * (c as f64).powf(1.0 / coupling_r) <= hv * (1.0 + 1e-12) + 1e-300);
            let quiet = o <= 0.0 || jump_count_scalar(path, o) == 0;
            (counts, coupled, quiet)
        })
        .collect();
    let mut counts = Vec::with_capacity(n);
    for (x, (c, coupled, quiet)) in rows.into_iter().enumerate() {
        checker.check("coupling lambda N^(1/r) <= hV^r", coupled, id, seed, || format!("point {x}"));
        checker.check("no jumps above the path oscillation", quiet, id, seed, || format!("point {x}"));
        counts.push(c);
    }
    Ok(JumpTable { lambdas, counts })
}

fn jump_oracle(cfg: &RunConfig, seed: u64, p: f64, checker: &mut Checker, id: &str) -> Result<()> {
    let (grid, scales) = oracle_setup(&cfg.grid, &cfg.scales()?)?;
    let f = make_trial(cfg.ensemble.generator, grid, 1, seed)?;
    let mut scratch = Checker::new();
    let fast = jump_table(&f, &scales, cfg.options.coupling_r, None, &mut scratch, id, seed)?;
    let paths = direct::average_paths(f.values(), &grid, &scales)?;
    let counts = paths
        .into_iter()
        .map(|path| {
            let sp = SampledPath::from_values(path)?;
            fast.lambdas.iter().map(|&l| Ok(jump_count(&sp, l)?.count as u32)).collect::<Result<Vec<u32>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let slow = JumpTable { lambdas: fast.lambdas.clone(), counts };
    let ones = vec![1.0; grid.len()];
    let norm = lp(f.values(), p);
    let (a, b) = (fast.lhs(&ones, p).0 / norm, slow.lhs(&ones, p).0 / norm);
    let ok = fast.counts == slow.counts && rel_close(a, b, 1e-10);
    checker.check("flat row matches direct-summation oracle", ok, id, seed, || format!("fast ratio {a} vs direct ratio {b}"));
    Ok(())
}

pub fn verify_jump(cfg: &RunConfig) -> Result<ExperimentReport> {
    let p = cfg.exponents.p;
    require_open_p("p", p)?;
    let cr = cfg.options.coupling_r;
    require(cr >= 1.0 && cr.is_finite(), || format!("coupling_r must be in [1, inf), got {cr}"))?;
    let scales = require_scales(cfg)?;
    let rows = weight_rows(cfg, WeightClass::Ap(p))?;
    let ens = make_ensemble(&cfg.ensemble, cfg.grid, cfg.ensemble_seed())?;
    let constant_input = cfg.ensemble.generator == Generator::Constant;

    let outs = par_trials(&ens, |i, seed, f| {
        let f = scalar_input(f)?;
        let id = trial_id("all", i);
        let mut checker = Checker::new();
        let table = jump_table(&f, &scales, cr, None, &mut checker, &id, seed)?;
        let pairs: Vec<(f64, f64, Option<usize>)> = rows
            .iter()
            .map(|r| {
                let (l, at) = table.lhs(r.weight.values(), p);
                (l, lp_w(f.values(), r.weight.values(), p), at)
            })
            .collect();
        if i < cfg.options.oracle_trials {
            jump_oracle(cfg, seed, p, &mut checker, &id)?;
        }
        if constant_input {
            let ok = pairs[0].1 == 0.0 || pairs[0].0 / pairs[0].1 <= 1e-10;
            checker.check("constant input gives vanishing ratio", ok, &id, seed, || format!("{:?}", pairs[0]));
        }
        Ok((pairs, table.lambdas, checker))
    })?;

    let mut b = ReportBuilder::new("verify_jump", ANCHOR, cfg);
    for (ri, row) in rows.iter().enumerate() {
        for (i, ((pairs, _, _), (seed, _))) in outs.iter().zip(&ens).enumerate() {
            let (lhs, rhs, _) = pairs[ri];
            b.trial(trial_id(&row.label, i), lhs, rhs, *seed);
        }
        b.row(&row.label, row.constant, &format!("{}/", row.label));
    }
    let mut hist = vec![0.0; outs.iter().map(|o| o.1.len()).max().unwrap_or(0)];
    for (pairs, _, _) in &outs {
        if let Some(l) = pairs[0].2 {
            hist[l] += 1.0;
        }
    }
    for (l, h) in hist.iter().enumerate() {
        b.metric(&format!("maximizing threshold index {l:02} (trials)"), *h);
    }
    for (_, _, c) in outs {
        b.checker.merge(c);
    }
    finish_sweep(b, "Ap constant", "max ratio")
}
