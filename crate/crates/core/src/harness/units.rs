//! Unit runners: oracle and invariant suites for the building blocks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::averages::{ball_symm_diff, boundary_cube_count, ScaleSet};
use crate::error::Result;
use crate::lattice::{Field, GridSpec};
use crate::martingale::{cond_expect, cz_decompose, haar_multiplier, mart_decompose, SignField};
use crate::variation::{catalog, hvar_bruteforce, hvar_exact, jump_bruteforce, jump_count, sobolev_bound_check, SampledPath, BRUTE_FORCE_LIMIT};

use super::baselines::{BOUNDARY_C, SYMM_DIFF_C};
use super::common::*;
use super::config::{require, RunConfig};
use super::ensemble::{make_ensemble, trial_seed};
use super::report::{Checker, ExperimentReport};

pub const ANCHOR_ORACLE: &str = "exact variation and jump counts against exhaustive search";
pub const ANCHOR_SOBOLEV: &str = "r-variation bounded by 8 ||a||^(1-1/r) ||a'||^(1/r)";
pub const ANCHOR_MARTINGALE: &str = "dyadic martingale algebra and Haar multipliers";
pub const ANCHOR_CZ: &str = "Calderon-Zygmund decomposition invariants";
pub const ANCHOR_GEOMETRY: &str = "boundary cube counts and ball symmetric differences";

/// A random test path: Gaussian, small-integer (ties and plateaus) or two-dimensional.
fn random_path(rng: &mut ChaCha8Rng, max_len: usize) -> Result<SampledPath> {
    let n = rng.random_range(2..=max_len);
    let kind = rng.random_range(0..10);
    let dim = if kind >= 8 { 2 } else { 1 };
    let values: Vec<f64> = (0..n * dim)
        .map(|_| if kind < 5 { rng.sample::<f64, _>(StandardNormal) } else { rng.random_range(-3i32..=3) as f64 })
        .collect();
    let mut t = 0.0;
    let times: Vec<f64> = (0..n)
        .map(|_| {
            t += rng.random_range(0.1..1.0);
            t
        })
        .collect();
    SampledPath::with_dim(times, values, dim)
}

pub fn oracle_variation(cfg: &RunConfig) -> Result<ExperimentReport> {
    let o = &cfg.options;
    require(o.max_path_len >= 2 && o.max_path_len <= BRUTE_FORCE_LIMIT, || format!("max_path_len must lie in [2, {BRUTE_FORCE_LIMIT}]"))?;
    require(!o.oracle_r.is_empty() && o.oracle_r.iter().all(|&r| r >= 1.0 && r.is_finite()), || format!("oracle_r must be >= 1: {:?}", o.oracle_r))?;
    let seed0 = cfg.ensemble_seed();
    let n = cfg.ensemble.count;
    let dummy: Vec<(u64, Field)> = (0..n as u64).map(|i| (trial_seed(seed0, i), Field::zeros(GridSpec::new(1, 1).expect("tiny grid")))).collect();
    let outs = par_trials(&dummy, |i, seed, _| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let path = random_path(&mut rng, o.max_path_len)?;
        let id = format!("path{i:05}");
        let mut c = Checker::new();
        let mut recs = Vec::new();
        // thresholds: fixed fractions of the range plus attained increments (ties)
        let range = path.sup_norm().max(1e-3);
        let mut lambdas: Vec<f64> = [0.1, 0.3, 0.7, 1.3].iter().map(|f| f * range).collect();
        for _ in 0..2 {
            let a = rng.random_range(0..path.len());
            let b = rng.random_range(0..path.len());
            let inc = path.increment(a, b);
            if inc > 0.0 {
                lambdas.push(inc);
            }
        }
        for &r in &o.oracle_r {
            let exact = hvar_exact(&path, r)?;
            let brute = hvar_bruteforce(&path, r)?;
            c.check("hvar exact equals brute force", rel_close(exact.value, brute, 1e-10), &id, seed, || format!("r = {r}: {} vs {brute}", exact.value));
            c.check("hvar witness attains the value", rel_close(exact.recompute(&path), exact.value, 1e-12), &id, seed, String::new);
            recs.push((format!("{id}/r={r}"), exact.value, brute));
            for &l in &lambdas {
                let jc = jump_count(&path, l)?.count;
                c.check("lambda N^(1/r) <= hV^r", l * (jc as f64).powf(1.0 / r) <= exact.value * (1.0 + 1e-12), &id, seed, || {
                    format!("lambda {l}, N {jc}, r {r}, hV {}", exact.value)
                });
            }
        }
        for &l in &lambdas {
            let jc = jump_count(&path, l)?.count;
            let jb = jump_bruteforce(&path, l)?;
            c.check("jump count equals brute force", jc == jb, &id, seed, || format!("lambda {l}: {jc} vs {jb}"));
        }
        Ok((recs, c, seed))
    })?;
    let mut b = ReportBuilder::new("oracle_variation", ANCHOR_ORACLE, cfg);
    for (recs, c, seed) in outs {
        for (id, l, r) in recs {
            b.trial(id, l, r, seed);
        }
        b.checker.merge(c);
    }
    for &r in &o.oracle_r {
        let tag = format!("/r={r}");
        b.row_matching(&format!("r={r}"), r, |id| id.ends_with(&tag));
    }
    b.plot_labels("trial", "exact / brute force");
    b.plot.points = b.trials.iter().take(200).enumerate().map(|(i, t)| (i as f64, t.ratio)).collect();
    Ok(b.finish())
}

pub fn sobolev_check(cfg: &RunConfig) -> Result<ExperimentReport> {
    let o = &cfg.options;
    require(o.sobolev_r.iter().all(|&r| r >= 1.0 && r.is_finite()), || format!("sobolev_r must be >= 1: {:?}", o.sobolev_r))?;
    require(o.sample_sizes.iter().all(|&n| n >= 2), || "sample sizes must be at least 2".into())?;
    let mut b = ReportBuilder::new("sobolev_check", ANCHOR_SOBOLEV, cfg);
    let cat = catalog();
    let jobs: Vec<(usize, f64, usize)> = (0..cat.len()).flat_map(|f| o.sobolev_r.iter().flat_map(move |&r| o.sample_sizes.iter().map(move |&n| (f, r, n)))).collect();
    let dummy: Vec<(u64, Field)> = jobs.iter().map(|_| (cfg.seed, Field::zeros(GridSpec::new(1, 1).expect("tiny grid")))).collect();
    let reps = par_trials(&dummy, |i, _, _| {
        let (f, r, n) = jobs[i];
        sobolev_bound_check(&cat[f].1, 1.0, r, n)
    })?;
    for ((f, r, n), rep) in jobs.iter().zip(reps) {
        let id = format!("{}/r={r}/n={n}", cat[*f].0);
        b.checker.check("variation within the Sobolev bound", rep.ratio <= 1.0, &id, cfg.seed, || format!("ratio {}", rep.ratio));
        b.checker.check("sampled variation bracket is consistent", rep.lhs_lower <= rep.lhs_upper, &id, cfg.seed, String::new);
        // constant catalogue entries have rhs = 0 and count as degenerate
        b.trial(id, rep.lhs_upper, rep.rhs, cfg.seed);
    }
    for &r in &o.sobolev_r {
        let tag = format!("/r={r}/");
        b.row_matching(&format!("r={r}"), r, |id| id.contains(&tag));
    }
    b.plot_labels("r", "max ratio over catalogue and sample sizes");
    b.plot.points = b.rows.iter().map(|r| (r.constant, r.max_ratio)).collect();
    Ok(b.finish())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_diff(a: &Field, b: &Field) -> f64 {
    a.values().iter().zip(b.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn martingale_algebra(cfg: &RunConfig) -> Result<ExperimentReport> {
    let grid = cfg.grid;
    let kk = grid.log_side();
    let ens = make_ensemble(&cfg.ensemble, grid, cfg.ensemble_seed())?;
    let outs = par_trials(&ens, |i, seed, f| {
        let id = trial_id("field", i);
        let mut c = Checker::new();
        let f = f.scalar_component(0);
        let scale = f.max_abs().max(f64::MIN_POSITIVE);
        let dec = mart_decompose(&f);
        let err = sup_diff(&dec.reconstruct(), &f);
        c.check("telescoping reconstruction", err <= 1e-10 * scale, &id, seed, || format!("sup error {err}"));
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, 7));
        for _ in 0..4 {
            let j = rng.random_range(0..=kk);
            let k = rng.random_range(0..=kk);
            let lhs = cond_expect(&cond_expect(&f, k)?, j)?;
            let rhs = cond_expect(&f, j.max(k))?;
            let e = sup_diff(&lhs, &rhs);
            c.check("tower property", e <= 1e-8 * scale, &id, seed, || format!("j = {j}, k = {k}: {e}"));
            let ek = cond_expect(&f, k)?;
            let e2 = sup_diff(&cond_expect(&ek, k)?, &ek);
            c.check("idempotence", e2 <= 1e-8 * scale, &id, seed, || format!("k = {k}: {e2}"));
        }
        let norms: Vec<f64> = dec.diffs.iter().map(|d| dot(d.values(), d.values()).sqrt()).collect();
        for a in 0..dec.diffs.len() {
            for bb in a + 1..dec.diffs.len() {
                let ip = dot(dec.diffs[a].values(), dec.diffs[bb].values());
                c.check("L2 orthogonality of differences", ip.abs() <= 1e-8 * norms[a] * norms[bb] + 1e-300, &id, seed, || format!("<d_{a}, d_{bb}> = {ip}"));
            }
        }
        let mean = f.mean();
        let f0 = f.map(|v| v - mean);
        let n0 = dot(f0.values(), f0.values()).sqrt();
        let cube_signs = SignField::random(grid, trial_seed(seed, 11));
        let level_signs: Vec<i8> = (0..kk).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        let level_signs = SignField::constant(grid, &level_signs)?;
        let mut out = (0.0, n0);
        for (name, s) in [("per-cube", &cube_signs), ("per-level", &level_signs)] {
            let t = haar_multiplier(&f0, s)?;
            let nt = dot(t.values(), t.values()).sqrt();
            c.check("Haar multiplier L2 isometry", (nt - n0).abs() <= 1e-10 * n0, &id, seed, || format!("{name}: {nt} vs {n0}"));
            if name == "per-level" {
                out.0 = nt;
            }
        }
        Ok((out, c))
    })?;
    let mut b = ReportBuilder::new("martingale_algebra", ANCHOR_MARTINGALE, cfg);
    for (i, ((l, r), c)) in outs.into_iter().enumerate() {
        b.trial(trial_id("field", i), l, r, ens[i].0);
        b.checker.merge(c);
    }
    b.row("isometry", 1.0, "");
    b.plot_labels("trial", "||T f|| / ||f||");
    b.plot.points = b.trials.iter().enumerate().map(|(i, t)| (i as f64, t.ratio)).collect();
    Ok(b.finish())
}

pub fn cz_invariants(cfg: &RunConfig) -> Result<ExperimentReport> {
    let q = cfg.exponents.q;
    let o = &cfg.options;
    require(q >= 1.0 && q.is_finite(), || format!("precondition 1 <= q < inf violated: q = {q}"))?;
    require(o.threshold > 0.0 && o.threshold.is_finite(), || format!("threshold must be positive, got {}", o.threshold))?;
    require(o.mass > 0.0 && o.mass <= 1.0, || format!("mass must lie in (0, 1], got {}", o.mass))?;
    let grid = cfg.grid;
    let d = grid.dim() as i32;
    let thr = o.threshold;
    let ens = make_ensemble(&cfg.ensemble, grid, cfg.ensemble_seed())?;
    let outs = par_trials(&ens, |i, seed, f| {
        let id = trial_id("field", i);
        let mut c = Checker::new();
        let m = f.lq_norm_pointwise(q).mean();
        if m == 0.0 {
            return Ok((None, c));
        }
        let f = f.scaled(o.mass * thr / m);
        let cz = cz_decompose(&f, q, thr)?;
        let mut cover = vec![0u32; grid.len()];
        let mut volume = 0usize;
        for (qi, cube) in cz.cubes.iter().enumerate() {
            let pts = cube.points(&grid);
            volume += pts.len();
            for &x in &pts {
                cover[x] += 1;
                c.check("owner map matches cubes", cz.owner[x] == Some(qi), &id, seed, || format!("point {x}"));
            }
            for comp in 0..f.family_size() {
                let sum: f64 = pts.iter().map(|&x| cz.bad.component(comp)[x]).sum();
                let mass: f64 = pts.iter().map(|&x| f.component(comp)[x].abs()).sum();
                c.check("per-cube mean zero of the bad part", sum.abs() <= 1e-12 * mass.max(f64::MIN_POSITIVE), &id, seed, || {
                    format!("{cube} component {comp}: sum {sum}")
                });
            }
        }
        c.check("cube disjointness", cover.iter().all(|&v| v <= 1), &id, seed, String::new);
        let l1: f64 = cz.magnitude.values().iter().sum();
        let bound = 2f64.powi(d) * l1 / thr;
        c.check("total cube measure", volume as f64 <= bound, &id, seed, || format!("{volume} > {bound}"));
        let g = cz.good.lq_norm_pointwise(q).max_abs();
        c.check("good part bounded by 2^d threshold", g <= 2f64.powi(d) * thr * (1.0 + 1e-12), &id, seed, || format!("{g}"));
        Ok((Some((volume as f64, l1 / thr)), c))
    })?;
    let mut b = ReportBuilder::new("cz_invariants", ANCHOR_CZ, cfg);
    for (i, (rec, c)) in outs.into_iter().enumerate() {
        match rec {
            Some((l, r)) => {
                b.trial(trial_id("field", i), l, r, ens[i].0);
            }
            None => b.degenerate += 1,
        }
        b.checker.merge(c);
    }
    b.row("cube measure", 1.0, "");
    b.plot_labels("trial", "sum |Q| / (||F||_1 / threshold)");
    b.plot.points = b.trials.iter().enumerate().map(|(i, t)| (i as f64, t.ratio)).collect();
    Ok(b.finish())
}

/// Displacements used for the symmetric-difference sweep.
pub fn symm_diff_offsets(dim: usize) -> Vec<[i64; 2]> {
    let mut out = Vec::new();
    for s in [1i64, 2, 4, 8] {
        out.push([s, 0]);
        if dim == 2 {
            out.push([0, s]);
            out.push([s, s]);
            out.push([s, -2 * s]);
        }
    }
    out
}

pub fn geometry_calibration(cfg: &RunConfig) -> Result<ExperimentReport> {
    let grid = cfg.grid;
    let o = &cfg.options;
    require(!o.geometry_levels.is_empty(), || "geometry_levels must not be empty".into())?;
    for &k in &o.geometry_levels {
        require(k + 3 <= grid.log_side(), || format!("level {k} needs log_side >= {}", k + 3))?;
    }
    require(o.x_samples > 0, || "x_samples must be positive".into())?;
    let m = cfg.scales()?.refinement;
    let d = grid.dim() as i32;
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, 0x6E0));
    let xs: Vec<usize> = (0..o.x_samples).map(|_| rng.random_range(0..grid.len())).collect();
    let dummy: Vec<(u64, Field)> = xs.iter().map(|_| (cfg.seed, Field::zeros(GridSpec::new(1, 1).expect("tiny grid")))).collect();
    let mut jobs = Vec::new();
    for &k in &o.geometry_levels {
        for i in (-6i32..=0).rev() {
            if k as i32 + i >= 0 {
                jobs.push((k, i));
            }
        }
    }
    // per x: max normalized count per job, max symmetric-difference ratio
    let per_x = par_trials(&dummy, |xi, _, _| {
        let x = grid.coords(xs[xi]);
        let mut counts = vec![0.0f64; jobs.len()];
        for (j, &(k, i)) in jobs.iter().enumerate() {
            let radii = ScaleSet::single(k, m, Default::default())?.radii();
            for t in radii {
                let c = boundary_cube_count(&grid, x, t, k, i)? as f64;
                counts[j] = counts[j].max(c * 2f64.powi(i * (d - 1)));
            }
        }
        let mut symm = 0.0f64;
        let full = ScaleSet::full(&grid, m, Default::default())?;
        for t in full.radii() {
            for off in symm_diff_offsets(grid.dim()) {
                let y = grid.coords(grid.shifted(xs[xi], off));
                let dist = ((off[0] * off[0] + off[1] * off[1]) as f64).sqrt();
                let sd = ball_symm_diff(&grid, x, y, t)? as f64;
                symm = symm.max(sd / (dist * t.value().powi(d - 1)));
            }
        }
        Ok((counts, symm))
    })?;
    let mut b = ReportBuilder::new("geometry_calibration", ANCHOR_GEOMETRY, cfg);
    let mut overall = 0.0f64;
    for (j, &(k, i)) in jobs.iter().enumerate() {
        let mx = per_x.iter().map(|p| p.0[j]).fold(0.0, f64::max);
        overall = overall.max(mx);
        let id = format!("boundary/k={k}/i={i}");
        b.trial(id.clone(), mx, 1.0, cfg.seed);
        b.checker.check("boundary count within frozen constant", mx <= BOUNDARY_C, &id, cfg.seed, || format!("{mx} > {BOUNDARY_C}"));
    }
    let symm = per_x.iter().map(|p| p.1).fold(0.0, f64::max);
    b.trial("symmetric-difference".into(), symm, 1.0, cfg.seed);
    b.checker.check("symmetric difference within frozen constant", symm <= SYMM_DIFF_C, "symmetric-difference", cfg.seed, || format!("{symm} > {SYMM_DIFF_C}"));
    b.metric("observed boundary constant", overall);
    b.metric("observed symmetric difference constant", symm);
    b.metric("frozen boundary constant", BOUNDARY_C);
    b.metric("frozen symmetric difference constant", SYMM_DIFF_C);
    for &k in &o.geometry_levels {
        b.row(&format!("k={k}"), k as f64, &format!("boundary/k={k}/"));
    }
    b.plot_labels("i", "max normalized boundary count over k");
    b.plot.points = (-6..=0)
        .map(|i| {
            let v = jobs.iter().enumerate().filter(|(_, jb)| jb.1 == i).map(|(j, _)| per_x.iter().map(|p| p.0[j]).fold(0.0, f64::max)).fold(0.0, f64::max);
            (i as f64, v)
        })
        .collect();
    Ok(b.finish())
}
