//! Good-lambda comparison of the square function with the sharp maximal function.

use crate::averages::square_function;
use crate::error::Result;
use crate::weights::{ainfty_fit, sharp_maximal, CubeFamily};

use super::common::*;
use super::config::{require, require_scales, RunConfig};
use super::ensemble::{make_ensemble, trial_seed};
use super::report::{Checker, ExperimentReport};

pub const ANCHOR: &str = "good-lambda inequality between smoothed square function and sharp maximal function";

/// `w{s > a, m <= g}` summed in index order.
fn level_mass(s: &[f64], m: &[f64], w: &[f64], a: f64, g: f64) -> f64 {
    let mut acc = 0.0;
    for ((sv, mv), wv) in s.iter().zip(m).zip(w) {
        if *sv > a && *mv <= g {
            acc += wv;
        }
    }
    acc
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 || hi <= lo {
        return vec![lo];
    }
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|j| lo * (step * j as f64).exp()).collect()
}

fn quantile(mut v: Vec<f64>, q: f64) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    Some(v[idx])
}

/// The cube family for `M^#`: all aligned cubes are too costly here and are
/// replaced by the dyadic family.
pub fn sharp_family(cfg: &RunConfig) -> CubeFamily {
    match cfg.cube_family() {
        CubeFamily::AllAligned => CubeFamily::Dyadic,
        f => f,
    }
}

pub fn verify_good_lambda(cfg: &RunConfig) -> Result<ExperimentReport> {
    let p = cfg.exponents.p;
    let o = &cfg.options;
    require(p >= 1.0 && p.is_finite(), || format!("precondition 1 <= p < inf violated: p = {p}"))?;
    require(!o.a_values.is_empty() && o.a_values.iter().all(|&a| a > 1.0 && a.is_finite()), || format!("precondition A > 1 violated: {:?}", o.a_values))?;
    require(!o.quantiles.is_empty() && o.quantiles.iter().all(|&q| q > 0.0 && q < 1.0), || format!("quantiles must lie in (0, 1): {:?}", o.quantiles))?;
    require(o.gamma_points >= 3, || format!("gamma_points must be at least 3, got {}", o.gamma_points))?;
    let scales = require_scales(cfg)?;
    let mut a_values = o.a_values.clone();
    a_values.sort_by(f64::total_cmp);
    a_values.dedup();
    let headline_a = a_values.iter().copied().min_by(|x, y| (x - 2.0).abs().total_cmp(&(y - 2.0).abs())).unwrap_or(2.0);
    let headline_q = o.quantiles.iter().copied().min_by(|x, y| (x - 0.5).abs().total_cmp(&(y - 0.5).abs())).unwrap_or(0.5);
    let rows = weight_rows(cfg, WeightClass::Ap(p.max(1.5)))?;
    let fits = rows.iter().map(|r| ainfty_fit(&r.weight, trial_seed(cfg.seed, 0xA1))).collect::<Result<Vec<_>>>()?;
    let family = sharp_family(cfg);
    let ens = make_ensemble(&cfg.ensemble, cfg.grid, cfg.ensemble_seed())?;

    // pass one: the two operators per trial
    let fields = par_trials(&ens, |_, _, f| {
        let f = scalar_input(f)?;
        let s = square_function(&f, &scales)?.into_values();
        let m = sharp_maximal(&f, p, family)?.into_values();
        let lambdas: Vec<Option<f64>> = o.quantiles.iter().map(|&q| positive_percentile(&s, q)).collect();
        Ok((s, m, lambdas))
    })?;

    // shared gamma grid for the headline curve, from pooled values of M^#/lambda
    let hq = o.quantiles.iter().position(|&q| q == headline_q).unwrap_or(0);
    let pooled: Vec<f64> = fields
        .iter()
        .filter_map(|(s, m, l)| l[hq].map(|lam| (s, m, lam)))
        .flat_map(|(s, m, lam)| s.iter().zip(m).filter(move |(sv, _)| **sv > headline_a * lam).map(move |(_, mv)| mv / lam))
        .filter(|u| *u > 0.0)
        .collect();
    let shared_gamma = match (quantile(pooled.clone(), 0.02), quantile(pooled, 1.0)) {
        (Some(lo), Some(hi)) => geometric(lo, hi, o.gamma_points),
        _ => Vec::new(),
    };

    let mut b = ReportBuilder::new("verify_good_lambda", ANCHOR, cfg);
    for (ri, row) in rows.iter().enumerate() {
        let w = row.weight.values();
        let pdelta = p * fits[ri].delta;
        b.metric(&format!("ainfty C {}", row.label), fits[ri].c);
        b.metric(&format!("ainfty delta {}", row.label), fits[ri].delta);
        let mut pooled_num = vec![0.0; shared_gamma.len()];
        let mut pooled_den = 0.0;
        let mut pooled_limit = 0.0;
        let per_trial: Vec<(Option<(f64, f64)>, Checker)> = fields
            .iter()
            .enumerate()
            .map(|(i, (s, m, lambdas))| {
                let seed = ens[i].0;
                let id = trial_id(&row.label, i);
                let mut c = Checker::new();
                let mut best: Option<(f64, f64)> = None;
                let mmin = m.iter().copied().fold(f64::INFINITY, f64::min);
                for lam in lambdas.iter().flatten().copied() {
                    let den = level_mass(s, m, w, lam, f64::INFINITY);
                    if den <= 0.0 {
                        continue;
                    }
                    let us: Vec<f64> = s.iter().zip(m).filter(|(sv, _)| **sv > lam).map(|(_, mv)| mv / lam).filter(|u| *u > 0.0).collect();
                    let (Some(lo), Some(hi)) = (quantile(us.clone(), 0.02), quantile(us, 1.0)) else { continue };
                    let gammas = geometric(lo, hi, o.gamma_points);
                    let mut prev_row: Option<Vec<f64>> = None;
                    for &a in &a_values {
                        let mut rhos = Vec::with_capacity(gammas.len() + 2);
                        if mmin > 0.0 {
                            let empty = level_mass(s, m, w, a * lam, 0.5 * mmin);
                            c.check("empty set gives rho = 0", empty == 0.0, &id, seed, || format!("mass {empty}"));
                            rhos.push(empty / den);
                        }
                        for &g in &gammas {
                            let num = level_mass(s, m, w, a * lam, g * lam);
                            rhos.push(num / den);
                            let implied = num / ((g / (a - 1.0)).powf(pdelta) * den);
                            if num > 0.0 && best.is_none_or(|bb| implied > bb.0 / bb.1) {
                                best = Some((num, (g / (a - 1.0)).powf(pdelta) * den));
                            }
                        }
                        let limit = level_mass(s, m, w, a * lam, f64::INFINITY) / den;
                        c.check("rho at gamma = inf is at most 1", limit <= 1.0, &id, seed, || format!("{limit}"));
                        rhos.push(limit);
                        let mono = rhos.windows(2).all(|x| x[0] <= x[1]);
                        c.check("rho nondecreasing in gamma", mono, &id, seed, || format!("a = {a}, lambda = {lam}"));
                        if let Some(prev) = &prev_row {
                            let ok = prev.len() == rhos.len() && prev.iter().zip(&rhos).all(|(x, y)| y <= x);
                            c.check("rho nonincreasing in A", ok, &id, seed, || format!("a = {a}, lambda = {lam}"));
                        }
                        prev_row = Some(rhos);
                    }
                }
                (best, c)
            })
            .collect();
        for (i, (best, c)) in per_trial.into_iter().enumerate() {
            match best {
                Some((l, r)) => {
                    b.trial(trial_id(&row.label, i), l, r, ens[i].0);
                }
                None => b.degenerate += 1,
            }
            b.checker.merge(c);
        }
        b.row(&row.label, row.constant, &format!("{}/", row.label));
        for (s, m, lambdas) in &fields {
            if let Some(lam) = lambdas[hq] {
                pooled_den += level_mass(s, m, w, lam, f64::INFINITY);
                pooled_limit += level_mass(s, m, w, headline_a * lam, f64::INFINITY);
                for (j, &g) in shared_gamma.iter().enumerate() {
                    pooled_num[j] += level_mass(s, m, w, headline_a * lam, g * lam);
                }
            }
        }
        if pooled_den > 0.0 {
            let curve: Vec<(f64, f64)> = shared_gamma.iter().zip(&pooled_num).map(|(&g, &n)| (g, n / pooled_den)).collect();
            // fit the power-law part only, below half of the gamma -> inf plateau
            let half = 0.5 * pooled_limit / pooled_den;
            let mut logs: Vec<(f64, f64)> = curve.iter().filter(|c| c.1 > 0.0 && c.1 <= half).map(|c| (c.0.ln(), c.1.ln())).collect();
            if logs.len() < 3 {
                logs = curve.iter().filter(|c| c.1 > 0.0).map(|c| (c.0.ln(), c.1.ln())).collect();
            }
            if let Some(fit) = b.fit(&format!("gamma exponent {}", row.label), &logs) {
                b.metric(&format!("gamma exponent {}", row.label), fit.slope);
                b.metric(&format!("p delta {}", row.label), pdelta);
            }
            if ri == 0 {
                b.plot_labels("gamma", "pooled rho at the headline A and lambda");
                b.plot.points = curve;
            }
        }
    }
    b.metric("headline A", headline_a);
    b.metric("headline quantile", headline_q);
    Ok(b.finish())
}
