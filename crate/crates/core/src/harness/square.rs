//! Square-function experiments: strong type, weak type, and single-scale decay.

use crate::averages::{avg_stack, short_variation, smoothed_short_variation, square_function, ScaleSet};
use crate::error::Result;
use crate::martingale::{haar_atoms_from_diff, mart_decompose};

use super::common::*;
use super::config::{require, require_open_p, require_scales, RunConfig};
use super::ensemble::{make_ensemble, make_trial, Generator};
use super::report::{Checker, ExperimentReport};

fn unweighted_ratio(s: &[f64], f: &[f64], p: f64) -> f64 {
    let d = lp(f, p);
    if d > 0.0 {
        lp(s, p) / d
    } else {
        0.0
    }
}

/// Compares the fast square function with direct summation on the oracle grid.
fn square_oracle(cfg: &RunConfig, seed: u64, p: f64, checker: &mut Checker, id: &str) -> Result<()> {
    let (grid, scales) = oracle_setup(&cfg.grid, &cfg.scales()?)?;
    let f = make_trial(cfg.ensemble.generator, grid, 1, seed)?;
    let fast = square_function(&f, &scales)?;
    let slow = direct::square_function(f.values(), &grid, &scales)?;
    let a = unweighted_ratio(fast.values(), f.values(), p);
    let b = unweighted_ratio(&slow, f.values(), p);
    checker.check("flat row matches direct-summation oracle", rel_close(a, b, 1e-10), id, seed, || {
        format!("fast ratio {a} vs direct ratio {b}")
    });
    Ok(())
}

struct SquareTrial {
    pairs: Vec<(f64, f64)>,
    checker: Checker,
}

pub fn verify_square_strong(cfg: &RunConfig) -> Result<ExperimentReport> {
    let p = cfg.exponents.p;
    require_open_p("p", p)?;
    let scales = require_scales(cfg)?;
    let rows = weight_rows(cfg, WeightClass::Ap(p))?;
    let ens = make_ensemble(&cfg.ensemble, cfg.grid, cfg.ensemble_seed())?;
    let constant_input = cfg.ensemble.generator == Generator::Constant;

    let outs = par_trials(&ens, |i, seed, f| {
        let f = scalar_input(f)?;
        let id = trial_id("all", i);
        let s = square_function(&f, &scales)?;
        let mut checker = Checker::new();
        let pairs = rows.iter().map(|r| (lp_w(s.values(), r.weight.values(), p), lp_w(f.values(), r.weight.values(), p))).collect();
        let base = unweighted_ratio(s.values(), f.values(), p);
        if i == 0 {
            let f2 = f.scaled(2.0);
            let s2 = square_function(&f2, &scales)?;
            let r2 = unweighted_ratio(s2.values(), f2.values(), p);
            checker.check("homogeneity under f -> 2f", rel_close(base, r2, 1e-12), &id, seed, || format!("{base} vs {r2}"));
        }
        if i < cfg.options.oracle_trials {
            square_oracle(cfg, seed, p, &mut checker, &id)?;
        }
        if constant_input {
            checker.check("constant input gives vanishing ratio", base <= 1e-10, &id, seed, || format!("ratio {base}"));
        }
        Ok(SquareTrial { pairs, checker })
    })?;

    let mut b = ReportBuilder::new("verify_square_strong", ANCHOR_STRONG, cfg);
    for (ri, row) in rows.iter().enumerate() {
        for (i, (out, (seed, _))) in outs.iter().zip(&ens).enumerate() {
            let (lhs, rhs) = out.pairs[ri];
            b.trial(trial_id(&row.label, i), lhs, rhs, *seed);
        }
        b.row(&row.label, row.constant, &format!("{}/", row.label));
    }
    for out in outs {
        b.checker.merge(out.checker);
    }
    finish_sweep(b, "Ap constant", "max ratio")
}

pub const ANCHOR_STRONG: &str = "smoothed square function bounded on weighted L^p, A_p weights";
pub const ANCHOR_WEAK: &str = "smoothed square function weak type (1,1) for A_1 weights";
pub const ANCHOR_DECAY: &str = "single-scale Haar estimate with geometric decay in |j|";

/// `sup_lambda lambda w{s > lambda}` over the dyadic grid.
fn weak_lhs(s: &[f64], w: &[f64], lambdas: &[f64]) -> f64 {
    lambdas
        .iter()
        .map(|&l| {
            let mut m = 0.0;
            for (v, wt) in s.iter().zip(w) {
                if *v > l {
                    m += wt;
                }
            }
            l * m
        })
        .fold(0.0, f64::max)
}

pub fn verify_square_weak(cfg: &RunConfig) -> Result<ExperimentReport> {
    let scales = require_scales(cfg)?;
    let rows = weight_rows(cfg, WeightClass::A1)?;
    let ens = make_ensemble(&cfg.ensemble, cfg.grid, cfg.ensemble_seed())?;
    let constant_input = cfg.ensemble.generator == Generator::Constant;

    let outs = par_trials(&ens, |i, seed, f| {
        let f = scalar_input(f)?;
        let id = trial_id("all", i);
        let s = square_function(&f, &scales)?;
        let lambdas = lambda_grid(s.values());
        let mut checker = Checker::new();
        let pairs: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (weak_lhs(s.values(), r.weight.values(), &lambdas), lp_w(f.values(), r.weight.values(), 1.0)))
            .collect();
        let flat = |s: &[f64], f: &[f64]| {
            let l = lambda_grid(s);
            let ones = vec![1.0; s.len()];
            weak_lhs(s, &ones, &l) / lp(f, 1.0)
        };
        let base = flat(s.values(), f.values());
        if i == 0 {
            let f3 = f.scaled(3.0);
            let s3 = square_function(&f3, &scales)?;
            let r3 = flat(s3.values(), f3.values());
            checker.check("scaling f -> 3f leaves ratio invariant", rel_close(base, r3, 1e-9), &id, seed, || format!("{base} vs {r3}"));
        }
        if i < cfg.options.oracle_trials {
            let (g, sc) = oracle_setup(&cfg.grid, &scales)?;
            let fo = make_trial(cfg.ensemble.generator, g, 1, seed)?;
            let fast = square_function(&fo, &sc)?;
            let slow = direct::square_function(fo.values(), &g, &sc)?;
            let ok = fast.values().iter().zip(&slow).all(|(a, b)| rel_close(*a, *b, 1e-10) || (a - b).abs() <= 1e-14);
            let (a, b) = (flat(fast.values(), fo.values()), flat(&slow, fo.values()));
            checker.check("flat row matches direct-summation oracle", ok && rel_close(a, b, 1e-10), &id, seed, || {
                format!("fast ratio {a} vs direct ratio {b}")
            });
        }
        if constant_input {
            checker.check("constant input gives vanishing ratio", base <= 1e-10, &id, seed, || format!("ratio {base}"));
        }
        Ok(SquareTrial { pairs, checker })
    })?;

    let mut b = ReportBuilder::new("verify_square_weak", ANCHOR_WEAK, cfg);
    for (ri, row) in rows.iter().enumerate() {
        for (i, (out, (seed, _))) in outs.iter().zip(&ens).enumerate() {
            let (lhs, rhs) = out.pairs[ri];
            b.trial(trial_id(&row.label, i), lhs, rhs, *seed);
        }
        b.row(&row.label, row.constant, &format!("{}/", row.label));
    }
    for out in outs {
        b.checker.merge(out.checker);
    }
    finish_sweep(b, "A1 constant", "max ratio")
}

/// Level `k` and the scale set `{k}` for the decay runs.
pub(crate) fn decay_level(cfg: &RunConfig) -> Result<(u32, ScaleSet)> {
    let scales = require_scales(cfg)?;
    let k = cfg.options.level.unwrap_or(scales.k_max);
    let o = &cfg.options;
    require(o.j_min <= o.j_max && o.j_max < 0, || format!("need j_min <= j_max < 0, got {}..{}", o.j_min, o.j_max))?;
    require(k as i64 + o.j_min as i64 >= 0, || format!("level {k} too fine for j_min = {}", o.j_min))?;
    let single = ScaleSet::single(k, scales.refinement, scales.kernel)?;
    single.check(&cfg.grid).map_err(|e| crate::Error::Config(e.to_string()))?;
    Ok((k, single))
}

pub fn verify_short_scale_decay(cfg: &RunConfig) -> Result<ExperimentReport> {
    let p = cfg.exponents.p;
    require_open_p("p", p)?;
    let (k, single) = decay_level(cfg)?;
    let rows = weight_rows(cfg, WeightClass::Ap(p))?;
    let ens = make_ensemble(&cfg.ensemble, cfg.grid, cfg.ensemble_seed())?;
    let js: Vec<i32> = (cfg.options.j_min..=cfg.options.j_max).collect();

    // pairs[j][row] per trial
    let outs = par_trials(&ens, |_, _, f| {
        let f = scalar_input(f)?;
        let dec = mart_decompose(&f);
        js.iter()
            .map(|&j| {
                let atoms = haar_atoms_from_diff(&dec, k, j)?;
                let input = atoms.reconstruct();
                let stack = avg_stack(&input, &single)?;
                let s = smoothed_short_variation(&short_variation(&stack, k)?, k)?;
                Ok(rows
                    .iter()
                    .map(|r| (lp_w(s.values(), r.weight.values(), p), lp_w(atoms.carrier.values(), r.weight.values(), p)))
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut b = ReportBuilder::new("verify_short_scale_decay", ANCHOR_DECAY, cfg);
    b.metric("level", k as f64);
    b.plot_labels("j", "log2 max ratio");
    for (ri, row) in rows.iter().enumerate() {
        let mut pts = Vec::new();
        for (ji, &j) in js.iter().enumerate() {
            let prefix = format!("{}/j={j}/", row.label);
            for (i, (out, (seed, _))) in outs.iter().zip(&ens).enumerate() {
                let (lhs, rhs) = out[ji][ri];
                b.trial(format!("{prefix}t{i:04}"), lhs, rhs, *seed);
            }
            b.row(&format!("{} j={j}", row.label), row.constant, &prefix);
            let m = b.rows.last().map_or(0.0, |r| r.max_ratio);
            if m > 0.0 {
                pts.push((j as f64, m.log2()));
            }
        }
        if ri == 0 {
            b.plot.points = pts.clone();
        }
        let name = format!("decay slope {}", row.label);
        match b.fit(&name, &pts) {
            Some(fit) => {
                b.checker.check("fitted decay slope positive", fit.slope > 0.0, &row.label, 0, || format!("slope {}", fit.slope));
                if let (Some(first), Some(last)) = (pts.first(), pts.last()) {
                    b.checker.check("ratio at j = j_max dominates ratio at j = j_min", last.1 >= first.1, &row.label, 0, || {
                        format!("log2 ratios {} (j_min) vs {} (j_max)", first.1, last.1)
                    });
                }
            }
            None => {
                b.metric(&format!("degenerate {}", row.label), 1.0);
            }
        }
    }
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Field, GridSpec};

    #[test]
    fn weak_lhs_counts_strict_superlevel() {
        let s = [1.0, 2.0, 3.0];
        let w = [1.0, 1.0, 2.0];
        assert_eq!(weak_lhs(&s, &w, &[1.5]), 1.5 * 3.0);
        assert_eq!(weak_lhs(&s, &w, &[]), 0.0);
    }

    #[test]
    fn constant_field_has_no_square_function() {
        let grid = GridSpec::new(1, 8).unwrap();
        let scales = ScaleSet::full(&grid, 4, Default::default()).unwrap();
        let s = square_function(&Field::constant(grid, 1.5), &scales).unwrap();
        assert!(s.max_abs() < 1e-12);
    }
}
