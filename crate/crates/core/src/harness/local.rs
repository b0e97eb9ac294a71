//! Reverse Hölder estimate for sums of mean-zero atoms at one scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::averages::{avg_stack, frak_r_k, Kernel, PrefixSums, ScaleSet};
use crate::error::{Error, Result};
use crate::lattice::{concentric_cube, BallShape, CubeRef, Field, GridSpec};
use crate::variation::var_inhom_scalar;

use super::common::*;
use super::config::{require, RunConfig};
use super::ensemble::trial_seed;
use super::report::{Checker, ExperimentReport};

pub const ANCHOR: &str = "reverse Hölder bound for single-scale variation of mean-zero atoms";

/// A Haar-type atom: mean-zero dyadic rationals, constant on the children of `cube`.
#[derive(Debug, Clone)]
pub struct Atom {
    pub cube: CubeRef,
    pub values: Field,
}

/// Up to `count` disjoint atoms of side `2^m`, `1 <= m <= k`, inside one
/// random level-`(k+2)` window. Returns the window too.
pub fn atom_ensemble(grid: &GridSpec, k: u32, count: usize, seed: u64) -> Result<(CubeRef, Vec<Atom>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wl = (k + 2).min(grid.log_side());
    let windows = grid.cubes(wl)?;
    let window = windows[rng.random_range(0..windows.len())];
    let mut taken = vec![false; grid.len()];
    let mut atoms = Vec::new();
    let d = grid.dim() as u32;
    for _ in 0..count * 50 {
        if atoms.len() == count {
            break;
        }
        let m = rng.random_range(1..=k.max(1));
        let per_axis = 1usize << (wl - m);
        let mut corner = window.corner;
        for c in corner.iter_mut().take(grid.dim()) {
            *c += rng.random_range(0..per_axis) << m;
        }
        let cube = CubeRef { level: m, corner };
        let pts = cube.points(grid);
        if pts.iter().any(|&p| taken[p]) {
            continue;
        }
        // small integers summing to zero, scaled by a power of two, so every
        // lattice sum of atom values is exact
        let kids = 1usize << d;
        let mut ints: Vec<i64> = (0..kids - 1).map(|_| rng.random_range(-4..=4)).collect();
        ints.push(-ints.iter().sum::<i64>());
        let top = ints.iter().map(|v| v.abs()).max().unwrap_or(0);
        if top == 0 {
            continue;
        }
        let scale = (top as f64).log2().ceil().exp2();
        let centred: Vec<f64> = ints.iter().map(|&v| v as f64).collect();
        let mut vals = vec![0.0; grid.len()];
        let half = 1usize << (m - 1);
        for &p in &pts {
            let c = grid.coords(p);
            let cx = (c[0] - cube.corner[0]) / half;
            let cy = if grid.dim() == 2 { (c[1] - cube.corner[1]) / half } else { 0 };
            vals[p] = centred[cx + 2 * cy] / scale;
            taken[p] = true;
        }
        atoms.push(Atom { cube, values: Field::new(*grid, vals)? });
    }
    Ok((window, atoms))
}

pub struct RhParams {
    pub k: u32,
    pub r: f64,
    pub alpha: f64,
    pub c_dist: f64,
}

pub fn rh_params(cfg: &RunConfig) -> Result<RhParams> {
    let grid = cfg.grid;
    let d = grid.dim() as f64;
    let r = cfg.exponents.r;
    require(r > 1.0 && r.is_finite(), || format!("precondition 1 < r < inf violated: r = {r}"))?;
    let rp = r / (r - 1.0);
    let (lo, hi) = ((d - 1.0) / rp, d / rp);
    let alpha = cfg.exponents.alpha.unwrap_or((lo + hi) / 2.0);
    require(alpha > lo && alpha < hi, || format!("precondition (d-1)/r' < alpha < d/r' violated: alpha = {alpha}, interval ({lo}, {hi})"))?;
    let k = cfg.options.level.unwrap_or(5.min(grid.log_side().saturating_sub(3)));
    require(k >= 1, || "level must be at least 1".into())?;
    let c_dist = cfg.options.c_dist.unwrap_or(2.0 + 2.0 * d.sqrt());
    require(c_dist > 0.0, || format!("c_dist must be positive, got {c_dist}"))?;
    require(cfg.options.atoms > 0 && cfg.options.x_samples > 0, || "atoms and x_samples must be positive".into())?;
    let s = ScaleSet::single(k, cfg.scales()?.refinement, cfg.scales()?.kernel).map_err(|e| Error::Config(e.to_string()))?;
    s.check(&grid).map_err(|e| Error::Config(e.to_string()))?;
    Ok(RhParams { k, r, alpha, c_dist })
}

/// Pointwise and cube-sum ratios `(lhs, rhs)` at the sampled points, one trial.
struct RhTrial {
    pointwise: Vec<(f64, f64)>,
    cube_sum: Vec<(f64, f64)>,
}

fn path(ps: &PrefixSums, x: usize, shapes: &[(BallShape, f64)], kernel: Kernel, h: &[usize]) -> Vec<f64> {
    shapes
        .iter()
        .zip(h)
        .map(|((shape, count), &hw)| match kernel {
            Kernel::Ball => ps.ball_sum(x, shape) / count,
            Kernel::Cube => ps.cube_sum(x, hw) / count,
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn rh_trial(grid: &GridSpec, prm: &RhParams, scales: &ScaleSet, atoms: &[Atom], xs: &[usize], checker: &mut Checker, id: &str, seed: u64) -> Result<RhTrial> {
    let (k, r, alpha) = (prm.k, prm.r, prm.alpha);
    let d = grid.dim() as i32;
    let radii = scales.radii();
    let shapes: Vec<(BallShape, f64)> = radii
        .iter()
        .map(|&t| {
            let s = BallShape::new(grid.dim(), t);
            let c = match scales.kernel {
                Kernel::Ball => s.count() as f64,
                Kernel::Cube => (2.0 * t.floor() as f64 + 1.0).powi(d),
            };
            (s, c)
        })
        .collect();
    let hw: Vec<usize> = radii.iter().map(|t| t.floor() as usize).collect();
    let mut total = vec![0.0; grid.len()];
    for a in atoms {
        for (t, v) in total.iter_mut().zip(a.values.values()) {
            *t += v;
        }
    }
    let b = Field::new(*grid, total)?;
    let ps_b = PrefixSums::new(*grid, b.values());
    let ps_atoms: Vec<PrefixSums> = atoms.iter().map(|a| PrefixSums::new(*grid, a.values.values())).collect();
    let frak = frak_r_k(&avg_stack(&b, scales)?, k, r, 0)?;
    let two_k = 2f64.powi(k as i32);
    let mut scratch = Vec::new();
    let mut out = RhTrial { pointwise: Vec::new(), cube_sum: Vec::new() };
    for &x in xs {
        let rb = var_inhom_scalar(&path(&ps_b, x, &shapes, scales.kernel, &hw), r, &mut scratch);
        let lhs = rb.powf(r);
        let mut rhs = 0.0;
        for (a, ps) in atoms.iter().zip(&ps_atoms) {
            let ra = var_inhom_scalar(&path(ps, x, &shapes, scales.kernel, &hw), r, &mut scratch);
            rhs += (a.cube.side() as f64).powf(-alpha * r) * ra.powf(r);
        }
        rhs *= two_k.powf(alpha * r);
        checker.check("pointwise left side vanishes with the right side", rhs > 0.0 || lhs == 0.0, id, seed, || format!("point {x}: lhs {lhs}"));
        out.pointwise.push((lhs, rhs));

        let clhs = frak.values()[x].powf(r);
        let mut crhs = 0.0;
        for a in atoms {
            if a.cube.distance_to(grid, grid.coords(x)) <= prm.c_dist * two_k {
                let l1: f64 = a.values.values().iter().map(|v| v.abs()).sum();
                crhs += (a.cube.side() as f64).powf(-alpha * r) * l1.powf(r);
            }
        }
        crhs *= two_k.powf(alpha * r - d as f64 * r);
        checker.check("cube-sum support: only nearby cubes contribute", crhs > 0.0 || clhs == 0.0, id, seed, || format!("point {x}: lhs {clhs}"));
        out.cube_sum.push((clhs, crhs));
    }
    Ok(out)
}

fn best(pairs: &[(f64, f64)]) -> Option<(f64, f64)> {
    pairs.iter().filter(|p| p.1 > 0.0).copied().max_by(|a, b| (a.0 / a.1).total_cmp(&(b.0 / b.1)))
}

pub fn verify_reverse_holder(cfg: &RunConfig) -> Result<ExperimentReport> {
    let prm = rh_params(cfg)?;
    let grid = cfg.grid;
    let base = cfg.scales()?;
    let ms = [base.refinement, 2 * base.refinement];
    let seed0 = cfg.ensemble_seed();
    let o = &cfg.options;
    let trials: Vec<(u64, u64)> = (0..cfg.ensemble.count as u64).map(|i| (i, trial_seed(seed0, i))).collect();

    let outs = trials
        .iter()
        .map(|&(i, seed)| {
            let (window, atoms) = atom_ensemble(&grid, prm.k, o.atoms, seed)?;
            let region = concentric_cube(&grid, &window, 3)?;
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, 1));
            let xs: Vec<usize> = (0..o.x_samples).map(|_| region[rng.random_range(0..region.len())]).collect();
            Ok((i, seed, window, atoms, xs))
        })
        .collect::<Result<Vec<_>>>()?;
    let ens: Vec<(u64, Field)> = outs.iter().map(|o| (o.1, Field::zeros(grid))).collect();

    let mut b = ReportBuilder::new("verify_reverse_holder", ANCHOR, cfg);
    b.metric("alpha", prm.alpha);
    b.metric("level", prm.k as f64);
    b.metric("c_dist", prm.c_dist);
    let mut maxima = Vec::new();
    for (mi, &m) in ms.iter().enumerate() {
        let scales = ScaleSet::single(prm.k, m, base.kernel)?;
        let res = par_trials(&ens, |i, seed, _| {
            let (_, _, _, atoms, xs) = &outs[i];
            let mut checker = Checker::new();
            let id = trial_id(&format!("M{m}"), i);
            let t = rh_trial(&grid, &prm, &scales, atoms, xs, &mut checker, &id, seed)?;
            Ok((t, checker, atoms.len()))
        })?;
        let mut row_max = [0.0f64; 2];
        for (i, (t, checker, n_atoms)) in res.into_iter().enumerate() {
            let seed = outs[i].1;
            if n_atoms == 0 {
                b.degenerate += 1;
            }
            for (kind, (name, pairs)) in [("pointwise", &t.pointwise), ("cube-sum", &t.cube_sum)].into_iter().enumerate() {
                match best(pairs) {
                    Some((l, r)) => {
                        let ratio = l / r;
                        row_max[kind] = row_max[kind].max(ratio);
                        if mi == 0 {
                            b.trial(trial_id(name, i), l, r, seed);
                        }
                    }
                    None => {
                        if mi == 0 {
                            b.degenerate += 1;
                        }
                    }
                }
            }
            b.checker.merge(checker);
        }
        b.rows.push(super::report::SweepRow { label: format!("pointwise M={m}"), constant: m as f64, max_ratio: row_max[0], trials: ens.len() });
        b.rows.push(super::report::SweepRow { label: format!("cube-sum M={m}"), constant: m as f64, max_ratio: row_max[1], trials: ens.len() });
        maxima.push(row_max);
    }
    for (kind, name) in ["pointwise", "cube-sum"].iter().enumerate() {
        let (a, c) = (maxima[0][kind], maxima[1][kind]);
        let change = if a > 0.0 { (c / a - 1.0).abs() } else { 0.0 };
        b.metric(&format!("{name} relative change when M doubles"), change);
        b.checker.check("stable within 10% when M doubles", change <= 0.10, name, seed0, || format!("{name}: {a} at M vs {c} at 2M"));
        b.checker.check("max ratio finite", a.is_finite() && c.is_finite(), name, seed0, String::new);
    }
    b.plot_labels("refinement M", "pointwise max ratio");
    b.plot.points = ms.iter().zip(&maxima).map(|(&m, v)| (m as f64, v[0])).collect();
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms_are_disjoint_mean_zero_and_normalised() {
        let grid = GridSpec::new(2, 8).unwrap();
        let (window, atoms) = atom_ensemble(&grid, 5, 16, 3).unwrap();
        assert!(!atoms.is_empty());
        let mut seen = vec![0usize; grid.len()];
        for a in &atoms {
            assert!(a.cube.level >= 1 && a.cube.level <= 5);
            let pts = a.cube.points(&grid);
            for &p in &pts {
                seen[p] += 1;
                assert!(window.contains(&grid, grid.coords(p)));
            }
            assert_eq!(a.values.sum(), 0.0);
            assert!(a.values.max_abs() > 0.5 && a.values.max_abs() <= 1.0);
        }
        assert!(seen.iter().all(|&c| c <= 1));
    }

    #[test]
    fn single_atom_ratio_is_at_most_one() {
        let grid = GridSpec::new(1, 10).unwrap();
        let mut cfg = RunConfig::new("verify_reverse_holder", grid);
        cfg.exponents.r = 2.0;
        let prm = rh_params(&cfg).unwrap();
        let (_, atoms) = atom_ensemble(&grid, prm.k, 1, 9).unwrap();
        let scales = ScaleSet::single(prm.k, 8, Kernel::Ball).unwrap();
        let xs: Vec<usize> = (0..grid.len()).step_by(7).collect();
        let mut c = Checker::new();
        let t = rh_trial(&grid, &prm, &scales, &atoms, &xs, &mut c, "t", 0).unwrap();
        for (l, r) in t.pointwise {
            if r > 0.0 {
                assert!(l / r <= 1.0 + 1e-12, "{l} {r}");
            }
        }
    }
}
