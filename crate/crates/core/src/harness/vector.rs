//! Vector-valued experiments: strong variation bounds, the weak-type
//! decomposition pipeline, and the BMO estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::averages::{avg_stack, ball_symm_diff, frak_r_from_stack, full_variation, Kernel, PrefixSums};
use crate::error::Result;
use crate::lattice::{concentric_cube, BallShape, Field};
use crate::martingale::cz_decompose;
use crate::variation::{var_inhom, var_inhom_scalar, SampledPath};
use crate::weights::weighted_measure;

use super::baselines::SYMM_DIFF_C;
use super::common::*;
use super::config::{require, require_open_p, require_scales, RunConfig};
use super::ensemble::{make_ensemble, make_trial, trial_seed};
use super::report::{Checker, ExperimentReport};

pub const ANCHOR_VARIATION: &str = "vector-valued r-variation bound on weighted L^p, growth as r/(r-2)";
pub const ANCHOR_WEAK11: &str = "vector-valued weak type (1,1) via Calderon-Zygmund decomposition";
pub const ANCHOR_BMO: &str = "L^inf to BMO bound for the vector-valued variation";

/// `(sum_i g_i^q)^{1/q}` pointwise over a list of scalar fields.
fn lq_combine(parts: &[Vec<f64>], q: f64) -> Vec<f64> {
    let n = parts[0].len();
    (0..n).map(|x| parts.iter().map(|g| g[x].abs().powf(q)).sum::<f64>().powf(1.0 / q)).collect()
}

pub fn verify_variation(cfg: &RunConfig) -> Result<ExperimentReport> {
    let (p, q) = (cfg.exponents.p, cfg.exponents.q);
    require_open_p("p", p)?;
    require_open_p("q", q)?;
    let mut rs = cfg.options.r_values.clone();
    require(!rs.is_empty(), || "r_values must not be empty".into())?;
    require(rs.iter().all(|&r| r > 2.0 && r.is_finite()), || format!("precondition r > 2 violated: r_values = {rs:?}"))?;
    rs.sort_by(f64::total_cmp);
    rs.dedup();
    let scales = require_scales(cfg)?;
    let rows = weight_rows(cfg, WeightClass::Ap(p))?;
    let ens = make_ensemble(&cfg.ensemble, cfg.grid, cfg.ensemble_seed())?;

    // pairs[r][row]
    let outs = par_trials(&ens, |i, seed, f| {
        let id = trial_id("all", i);
        let stack = avg_stack(f, &scales)?;
        let big_f = f.lq_norm_pointwise(q);
        let mut checker = Checker::new();
        let mut prev: Option<Vec<f64>> = None;
        let mut pairs = Vec::new();
        let mut first_num = Vec::new();
        for (ri, &r) in rs.iter().enumerate() {
            let parts = (0..f.family_size()).map(|c| Ok(full_variation(&stack, r, c)?.into_values())).collect::<Result<Vec<_>>>()?;
            let num = lq_combine(&parts, q);
            if let Some(prev) = &prev {
                let bad = num.iter().zip(prev).position(|(a, b)| *a > b * (1.0 + 1e-12));
                checker.check("pointwise r-monotonicity of V^r", bad.is_none(), &id, seed, || format!("point {bad:?} at r = {r}"));
            }
            pairs.push(rows.iter().map(|w| (lp_w(&num, w.weight.values(), p), lp_w(big_f.values(), w.weight.values(), p))).collect::<Vec<_>>());
            if ri == 0 {
                first_num = num.clone();
            }
            prev = Some(num);
        }
        if f.family_size() == 1 {
            // one-element family against the scalar routine
            let range = stack.full_range();
            let mut scratch = Vec::new();
            let scalar: Vec<f64> = (0..f.grid().len()).map(|x| var_inhom_scalar(&stack.path_at(x, 0, range.clone()), rs[0], &mut scratch)).collect();
            let ok = scalar.iter().zip(&first_num).all(|(a, b)| rel_close(*a, *b, 1e-12));
            checker.check("family of one matches the scalar runner", ok, &id, seed, String::new);
        }
        if i < cfg.options.oracle_trials {
            variation_oracle(cfg, seed, rs[0], &mut checker, &id)?;
        }
        Ok((pairs, checker))
    })?;

    let mut b = ReportBuilder::new("verify_variation", ANCHOR_VARIATION, cfg);
    for (wi, row) in rows.iter().enumerate() {
        let mut prev_max: Option<f64> = None;
        for (ri, &r) in rs.iter().enumerate() {
            let prefix = format!("{}/r={r}/", row.label);
            for (i, ((pairs, _), (seed, _))) in outs.iter().zip(&ens).enumerate() {
                let (lhs, rhs) = pairs[ri][wi];
                b.trial(format!("{prefix}t{i:04}"), lhs, rhs, *seed);
            }
            b.row(&format!("{} r={r}", row.label), row.constant, &prefix);
            let m = b.rows.last().map_or(0.0, |x| x.max_ratio);
            b.checker.check("max_ratio finite on every row", m.is_finite(), &prefix, 0, || format!("{m}"));
            if let Some(pm) = prev_max {
                b.checker.check("max_ratio nonincreasing in r", m <= pm * (1.0 + 1e-12), &prefix, 0, || format!("{m} after {pm}"));
            }
            prev_max = Some(m);
        }
        let pts: Vec<(f64, f64)> = rs
            .iter()
            .zip(&b.rows[b.rows.len() - rs.len()..])
            .filter(|(_, x)| x.max_ratio > 0.0)
            .map(|(&r, x)| ((r / (r - 2.0)).ln(), x.max_ratio.ln()))
            .collect();
        if wi == 0 {
            b.plot_labels("r", "max ratio");
            b.plot.points = rs.iter().zip(&b.rows[b.rows.len() - rs.len()..]).map(|(&r, x)| (r, x.max_ratio)).collect();
        }
        b.fit(&format!("log max_ratio vs log r/(r-2) {}", row.label), &pts);
    }
    for (_, c) in outs {
        b.checker.merge(c);
    }
    Ok(b.finish())
}

fn variation_oracle(cfg: &RunConfig, seed: u64, r: f64, checker: &mut Checker, id: &str) -> Result<()> {
    let (grid, scales) = oracle_setup(&cfg.grid, &cfg.scales()?)?;
    let q = cfg.exponents.q;
    let f = make_trial(cfg.ensemble.generator, grid, cfg.ensemble.family_size, seed)?;
    let stack = avg_stack(&f, &scales)?;
    let mut fast = Vec::new();
    let mut slow = Vec::new();
    for c in 0..f.family_size() {
        fast.push(full_variation(&stack, r, c)?.into_values());
        let paths = direct::average_paths(f.component(c), &grid, &scales)?;
        slow.push(paths.into_iter().map(|p| var_inhom(&SampledPath::from_values(p)?, r)).collect::<Result<Vec<_>>>()?);
    }
    let p = cfg.exponents.p;
    let den = lp(f.lq_norm_pointwise(q).values(), p);
    let a = lp(&lq_combine(&fast, q), p) / den;
    let b = lp(&lq_combine(&slow, q), p) / den;
    checker.check("flat row matches direct-summation oracle", rel_close(a, b, 1e-10), id, seed, || format!("fast ratio {a} vs direct ratio {b}"));
    Ok(())
}

pub fn verify_weak11_vector(cfg: &RunConfig) -> Result<ExperimentReport> {
    let q = cfg.exponents.q;
    let r = cfg.exponents.r;
    let o = &cfg.options;
    require_open_p("q", q)?;
    require(r > 1.0 && r <= q, || format!("precondition 1 < r <= q violated: r = {r}, q = {q}"))?;
    require(o.threshold > 0.0 && o.threshold.is_finite(), || format!("threshold must be positive, got {}", o.threshold))?;
    require(o.mass > 0.0 && o.mass < 1.0, || format!("mass must lie in (0, 1), got {}", o.mass))?;
    require(o.enlarge % 2 == 1, || format!("enlarge must be odd, got {}", o.enlarge))?;
    let scales = require_scales(cfg)?;
    let rows = weight_rows(cfg, WeightClass::A1)?;
    let ens = make_ensemble(&cfg.ensemble, cfg.grid, cfg.ensemble_seed())?;
    let grid = cfg.grid;
    let d = grid.dim() as i32;
    let (thr, enlarge) = (o.threshold, o.enlarge);

    // per trial: Some(pairs per row) or None when no cube was selected
    let outs = par_trials(&ens, |i, seed, f| {
        let id = trial_id("all", i);
        let mut checker = Checker::new();
        let mean_f = f.lq_norm_pointwise(q).mean();
        if mean_f == 0.0 {
            return Ok((Vec::new(), Vec::new(), checker, true));
        }
        let f = f.scaled(o.mass * thr / mean_f);
        let cz = cz_decompose(&f, q, thr)?;
        let big_f = cz.magnitude.values();
        for (qi, cube) in cz.cubes.iter().enumerate() {
            let pts = cube.points(&grid);
            let lhs: f64 = (0..f.family_size()).map(|c| cz.bad_atom(qi, c).iter().map(|v| v.abs()).sum::<f64>().powf(q)).sum();
            let integral: f64 = pts
                .iter()
                .map(|&x| (0..f.family_size()).map(|c| cz.bad.component(c)[x].abs().powf(q)).sum::<f64>().powf(1.0 / q))
                .sum();
            let rhs = integral.powf(q);
            checker.check("Minkowski bound per cube", lhs <= rhs * (1.0 + 1e-12), &id, seed, || format!("{cube}: {lhs} > {rhs}"));
        }
        let g = cz.good.lq_norm_pointwise(q);
        let gmax = g.values().iter().fold(0.0f64, |a, &b| a.max(b));
        let gb = 2f64.powi(d) * thr;
        checker.check("good part bounded by 2^d threshold", gmax <= gb * (1.0 + 1e-12), &id, seed, || format!("{gmax} > {gb}"));
        if cz.cubes.is_empty() {
            let zero = cz.bad.max_abs() == 0.0;
            checker.check("no cubes means zero bad part", zero, &id, seed, String::new);
        }
        // exceptional set and the operator on the full input and on the bad part
        let mut excluded = vec![false; grid.len()];
        let enlarged: Vec<Vec<usize>> = cz.cubes.iter().map(|c| concentric_cube(&grid, c, enlarge)).collect::<Result<_>>()?;
        for e in &enlarged {
            for &x in e {
                excluded[x] = true;
            }
        }
        let operator = |h: &Field| -> Result<Vec<f64>> {
            let stack = avg_stack(h, &scales)?;
            let parts = (0..h.family_size()).map(|c| Ok(frak_r_from_stack(&stack, r, c)?.into_values())).collect::<Result<Vec<_>>>()?;
            Ok(lq_combine(&parts, q))
        };
        let t_full = operator(&f)?;
        let t_bad = if cz.cubes.is_empty() { vec![0.0; grid.len()] } else { operator(&cz.bad)? };
        let mut pairs = Vec::new();
        let mut off_set = Vec::new();
        for row in &rows {
            let w = row.weight.values();
            for (qi, e) in enlarged.iter().enumerate() {
                let we = weighted_measure(e, &row.weight);
                let integral: f64 = cz.cubes[qi].points(&grid).iter().map(|&x| big_f[x] * w[x]).sum();
                let bound = (enlarge as f64).powi(d) * row.constant * integral / thr;
                checker.check("enlarged cube weight bound", we <= bound * (1.0 + 1e-9), &id, seed, || {
                    format!("{} {}: w(cQ) = {we} > {bound}", row.label, cz.cubes[qi])
                });
            }
            let mut level = 0.0;
            let mut bad_off = 0.0;
            for x in 0..grid.len() {
                if t_full[x] > thr {
                    level += w[x];
                }
                if !excluded[x] && t_bad[x] > thr / 2.0 {
                    bad_off += w[x];
                }
            }
            let norm: f64 = big_f.iter().zip(w).map(|(a, b)| a * b).sum();
            pairs.push((thr * level, norm));
            off_set.push(thr * bad_off / norm);
        }
        Ok((pairs, off_set, checker, false))
    })?;

    let mut b = ReportBuilder::new("verify_weak11_vector", ANCHOR_WEAK11, cfg);
    for (wi, row) in rows.iter().enumerate() {
        let mut worst_off = 0.0f64;
        for (i, ((pairs, off, _, zero), (seed, _))) in outs.iter().zip(&ens).enumerate() {
            if *zero {
                b.degenerate += usize::from(wi == 0);
                continue;
            }
            b.trial(trial_id(&row.label, i), pairs[wi].0, pairs[wi].1, *seed);
            worst_off = worst_off.max(off[wi]);
        }
        b.row(&row.label, row.constant, &format!("{}/", row.label));
        b.metric(&format!("bad part mass off the enlarged cubes {}", row.label), worst_off);
    }
    for (_, _, c, _) in outs {
        b.checker.merge(c);
    }
    finish_sweep(b, "A1 constant (all aligned cubes)", "max ratio")
}

pub fn verify_bmo(cfg: &RunConfig) -> Result<ExperimentReport> {
    let (q, r) = (cfg.exponents.q, cfg.exponents.r);
    require_open_p("q", q)?;
    require(r > 2.0 && r.is_finite(), || format!("precondition r > 2 violated: r = {r}"))?;
    let o = &cfg.options;
    require(o.local_factor % 2 == 1 && o.local_factor >= 3, || format!("local_factor must be odd and >= 3, got {}", o.local_factor))?;
    require(o.test_cubes > 0, || "test_cubes must be positive".into())?;
    let scales = require_scales(cfg)?;
    let grid = cfg.grid;
    let ens = make_ensemble(&cfg.ensemble, grid, cfg.ensemble_seed())?;
    let radii = scales.radii();
    let max_level = (scales.k_max + 1).min(grid.log_side() - 2);
    let c_prime = SYMM_DIFF_C;

    // per trial: Vec<(cube label, value)>, or None for f = 0
    let outs = par_trials(&ens, |i, seed, f| {
        let id = trial_id("all", i);
        let mut checker = Checker::new();
        let sup = f.lq_norm_pointwise(q).max_abs();
        if sup == 0.0 {
            return Ok((None, checker));
        }
        let f = f.scaled(1.0 / sup);
        let stack = avg_stack(&f, &scales)?;
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, 0xB30));
        let mut values = Vec::new();
        for ci in 0..o.test_cubes {
            let level = rng.random_range(0..=max_level);
            let cubes = grid.cube_count(level);
            let corner_idx = rng.random_range(0..cubes);
            let cube = grid.cubes(level)?[corner_idx];
            let local = concentric_cube(&grid, &cube, o.local_factor)?;
            let mut is_local = vec![false; grid.len()];
            for &x in &local {
                is_local[x] = true;
            }
            let pts = cube.points(&grid);
            let ell = cube.side() as f64;
            let cid = format!("{id}/q{ci}");
            // A_t b for x in Q, every radius and component
            let fam = f.family_size();
            let mut ab = vec![vec![vec![0.0; radii.len()]; pts.len()]; fam];
            for (c, abc) in ab.iter_mut().enumerate() {
                let b: Vec<f64> = f.component(c).iter().enumerate().map(|(x, v)| if is_local[x] { 0.0 } else { *v }).collect();
                let ps = PrefixSums::new(grid, &b);
                for (m, &t) in radii.iter().enumerate() {
                    let shape = BallShape::new(grid.dim(), t);
                    let count = match scales.kernel {
                        Kernel::Ball => shape.count() as f64,
                        Kernel::Cube => (2.0 * t.floor() as f64 + 1.0).powi(grid.dim() as i32),
                    };
                    for (pi, &x) in pts.iter().enumerate() {
                        let s = match scales.kernel {
                            Kernel::Ball => ps.ball_sum(x, &shape),
                            Kernel::Cube => ps.cube_sum(x, t.floor() as usize),
                        };
                        abc[pi][m] = s / count;
                        if t.value() < ell {
                            // support separation, verified by enumeration
                            let direct: f64 = direct::kernel_points(&grid, x, t, scales.kernel)?.iter().map(|&y| b[y]).sum();
                            checker.check("A_t b vanishes on Q for t < l(Q)", direct == 0.0, &cid, seed, || format!("point {x}, t = {}", t.value()));
                        }
                    }
                }
            }
            let mut total = 0.0;
            let mut scratch = Vec::new();
            for &x in &pts {
                let mut acc = 0.0;
                for (c, abc) in ab.iter().enumerate() {
                    let path: Vec<f64> = (0..radii.len())
                        .map(|m| {
                            let cmean = abc.iter().map(|row| row[m]).sum::<f64>() / pts.len() as f64;
                            stack.slices[m].component(c)[x] - cmean
                        })
                        .collect();
                    acc += var_inhom_scalar(&path, r, &mut scratch).powf(q);
                }
                total += acc.powf(1.0 / q);
            }
            values.push((cid.clone(), total / pts.len() as f64));
            // smoothness of balls against the frozen constant
            if scales.kernel == Kernel::Ball {
                for _ in 0..4 {
                    let xa = pts[rng.random_range(0..pts.len())];
                    let ya = pts[rng.random_range(0..pts.len())];
                    if xa == ya {
                        continue;
                    }
                    let dxy = grid.displacement(grid.coords(xa), grid.coords(ya));
                    let dist = ((dxy[0] * dxy[0] + dxy[1] * dxy[1]) as f64).sqrt();
                    for &t in radii.iter().filter(|t| t.value() >= ell) {
                        let sd = ball_symm_diff(&grid, grid.coords(xa), grid.coords(ya), t)? as f64;
                        let bound = c_prime * dist * t.value().powi(grid.dim() as i32 - 1);
                        checker.check("ball symmetric difference bound", sd <= bound, &cid, seed, || format!("{sd} > {bound} at t = {}", t.value()));
                    }
                }
            }
        }
        Ok((Some(values), checker))
    })?;

    let mut b = ReportBuilder::new("verify_bmo", ANCHOR_BMO, cfg);
    for ((vals, _), (seed, _)) in outs.iter().zip(&ens) {
        match vals {
            Some(v) => {
                for (id, val) in v {
                    b.trial(id.clone(), *val, 1.0, *seed);
                }
            }
            None => b.zero_trial(format!("{}/zero", trial_id("all", b.trials.len())), *seed),
        }
    }
    b.row("all cubes", 1.0, "");
    b.plot_labels("trial", "max local mean oscillation");
    let mut per_trial = vec![0.0f64; ens.len()];
    for t in &b.trials {
        if let Some(i) = t.trial_id.strip_prefix("all/t").and_then(|s| s.get(..4)).and_then(|s| s.parse::<usize>().ok()) {
            if i < per_trial.len() {
                per_trial[i] = per_trial[i].max(t.ratio);
            }
        }
    }
    b.plot.points = per_trial.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect();
    b.metric("symmetric difference constant", c_prime);
    for (_, c) in outs {
        b.checker.merge(c);
    }
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lq_combine_matches_hand_values() {
        let v = lq_combine(&[vec![3.0, 0.0], vec![4.0, -2.0]], 2.0);
        assert_eq!(v, vec![5.0, 2.0]);
    }
}
