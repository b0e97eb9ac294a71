//! Variation seminorms and jump counts of finite sampled paths.
//!
//! The exact `r`-variation is a longest-path problem on the complete DAG of
//! sample indices: `best[i] = max_{j<i} best[j] + |a_i - a_j|^r`. For scalar
//! paths the optimum is attained on the turning points (endpoints and strict
//! local extrema after removing plateaus), so the DP runs on that reduced
//! index set. Jump counts use the same DAG with unit edge weights, restricted
//! to edges whose increment exceeds the threshold.

mod sobolev;

pub use sobolev::{catalog, gauss_legendre_lr_norm, sobolev_bound_check, AnalyticFn, SobolevReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced paths longer than this use the blocked bracket in [`hvar_estimate`].
pub const EXACT_LIMIT: usize = 1 << 13;

/// Brute-force oracles refuse longer paths.
pub const BRUTE_FORCE_LIMIT: usize = 14;

/// A net `(a_t)` sampled at strictly increasing times, with values in `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPath {
    times: Vec<f64>,
    values: Vec<f64>,
    dim: usize,
}

impl SampledPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::with_dim(times, values, 1)
    }

    /// Scalar path sampled at times `0, 1, ..., n-1`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let times = (0..values.len()).map(|i| i as f64).collect();
        Self::new(times, values)
    }

    /// Vector-valued path; `values` holds `times.len()` rows of length `dim`.
    pub fn with_dim(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptyPath);
        }
        if dim == 0 || values.len() != times.len() * dim {
            return Err(Error::FieldLength { expected: times.len() * dim.max(1), got: values.len() });
        }
        if let Some(i) = times.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::UnorderedTimes(i + 1));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(SampledPath { times, values, dim })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Euclidean norm of `a_j - a_i`.
    pub fn increment(&self, i: usize, j: usize) -> f64 {
        if self.dim == 1 {
            (self.values[j] - self.values[i]).abs()
        } else {
            self.point(i).iter().zip(self.point(j)).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
        }
    }

    pub fn sup_norm(&self) -> f64 {
        (0..self.len())
            .map(|i| if self.dim == 1 { self.values[i].abs() } else { self.point(i).iter().map(|v| v * v).sum::<f64>().sqrt() })
            .fold(0.0, f64::max)
    }

    /// Keeps only the samples at `indices` (strictly increasing).
    pub fn subpath(&self, indices: &[usize]) -> Result<Self> {
        let times = indices.iter().map(|&i| self.times[i]).collect();
        let values = indices.iter().flat_map(|&i| self.point(i).iter().copied()).collect();
        Self::with_dim(times, values, self.dim)
    }

    pub fn scaled(&self, c: f64) -> Self {
        SampledPath { times: self.times.clone(), values: self.values.iter().map(|v| c * v).collect(), dim: self.dim }
    }
}

/// Value of a homogeneous variation together with a maximizing subsequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationResult {
    pub value: f64,
    pub witness: Vec<usize>,
    pub r: f64,
}

impl VariationResult {
    /// `(sum |a_{w_j} - a_{w_{j-1}}|^r)^{1/r}` over the witness.
    pub fn recompute(&self, path: &SampledPath) -> f64 {
        let s: f64 = self.witness.windows(2).map(|w| pow_r(path.increment(w[0], w[1]), self.r)).sum();
        s.powf(1.0 / self.r)
    }
}

/// Result of the jump counting function at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub lambda: f64,
    pub count: usize,
    pub witness: Vec<usize>,
}

/// Certified bracket for the homogeneous variation of a long path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationBounds {
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
    /// Subsequence realizing `lower`.
    pub witness: Vec<usize>,
}

#[inline]
fn pow_r(x: f64, r: f64) -> f64 {
    if r == 1.0 {
        x
    } else if r == 2.0 {
        x * x
    } else {
        x.powf(r)
    }
}

fn check_r(r: f64) -> Result<()> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::Exponent { constraint: "1 <= r < inf", value: r });
    }
    Ok(())
}

/// Indices of the turning points of a scalar sequence: first and last sample
/// plus every strict local extremum once plateaus are collapsed.
pub fn turning_points(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    if n <= 2 {
        return (0..n).collect();
    }
    // collapse plateaus, keeping the first index of each run
    let mut runs: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        if runs.last().is_none_or(|&j| values[j] != values[i]) {
            runs.push(i);
        }
    }
    if runs.len() <= 2 {
        return runs;
    }
    let mut out = Vec::with_capacity(runs.len());
    out.push(runs[0]);
    for w in runs.windows(3) {
        let (a, b, c) = (values[w[0]], values[w[1]], values[w[2]]);
        if (b - a) * (c - b) < 0.0 {
            out.push(w[1]);
        }
    }
    out.push(*runs.last().unwrap());
    out
}

/// O(m^2) DP over the candidate indices `idx`; returns (sum of r-th powers, witness).
fn dp_on(path: &SampledPath, idx: &[usize], r: f64) -> (f64, Vec<usize>) {
    let m = idx.len();
    let mut best = vec![0.0f64; m];
    let mut back = vec![usize::MAX; m];
    for i in 1..m {
        let mut bi = f64::NEG_INFINITY;
        let mut bj = usize::MAX;
        for j in 0..i {
            let cand = best[j] + pow_r(path.increment(idx[j], idx[i]), r);
            if cand > bi {
                bi = cand;
                bj = j;
            }
        }
        best[i] = bi;
        back[i] = bj;
    }
    let mut arg = 0;
    for i in 1..m {
        if best[i] > best[arg] {
            arg = i;
        }
    }
    let mut witness = vec![idx[arg]];
    let mut cur = arg;
    while back[cur] != usize::MAX {
        cur = back[cur];
        witness.push(idx[cur]);
    }
    witness.reverse();
    (best[arg], witness)
}

fn candidates(path: &SampledPath) -> Vec<usize> {
    if path.dim() == 1 {
        turning_points(path.values())
    } else {
        (0..path.len()).collect()
    }
}

/// Exact homogeneous `r`-variation with a maximizing subsequence.
///
/// Ties in the DP are resolved toward the smallest predecessor index.
pub fn hvar_exact(path: &SampledPath, r: f64) -> Result<VariationResult> {
    check_r(r)?;
    let idx = candidates(path);
    let (s, witness) = dp_on(path, &idx, r);
    Ok(VariationResult { value: s.powf(1.0 / r), witness, r })
}

/// Inhomogeneous variation `sup_t |a_t| + hV^r`.
pub fn var_inhom(path: &SampledPath, r: f64) -> Result<f64> {
    Ok(path.sup_norm() + hvar_exact(path, r)?.value)
}

/// Exhaustive maximum over all increasing subsequences (oracle, `n <= 14`).
pub fn hvar_bruteforce(path: &SampledPath, r: f64) -> Result<f64> {
    check_r(r)?;
    let n = path.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::PathTooLong { len: n, limit: BRUTE_FORCE_LIMIT });
    }
    let mut best = 0.0f64;
    for mask in 1u32..(1 << n) {
        if mask.count_ones() < 2 {
            continue;
        }
        let mut prev = None;
        let mut s = 0.0;
        for i in 0..n {
            if mask & (1 << i) != 0 {
                if let Some(p) = prev {
                    s += path.increment(p, i).powf(r);
                }
                prev = Some(i);
            }
        }
        best = best.max(s);
    }
    Ok(best.powf(1.0 / r))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Threshold(lambda));
    }
    Ok(())
}

/// Prefix-maximum Fenwick tree over `(count, index)`; ties prefer the smaller index.
struct MaxFenwick {
    tree: Vec<(i64, usize)>,
}

const NONE: (i64, usize) = (-1, usize::MAX);

fn better(a: (i64, usize), b: (i64, usize)) -> (i64, usize) {
    if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) {
        a
    } else {
        b
    }
}

impl MaxFenwick {
    fn new(n: usize) -> Self {
        MaxFenwick { tree: vec![NONE; n + 1] }
    }

    fn update(&mut self, pos: usize, v: (i64, usize)) {
        let mut i = pos + 1;
        while i < self.tree.len() {
            self.tree[i] = better(self.tree[i], v);
            i += i & i.wrapping_neg();
        }
    }

    /// Best over positions `0..end`.
    fn query(&self, end: usize) -> (i64, usize) {
        let mut i = end;
        let mut acc = NONE;
        while i > 0 {
            acc = better(acc, self.tree[i]);
            i -= i & i.wrapping_neg();
        }
        acc
    }
}

fn jump_chain_scalar(values: &[f64], lambda: f64) -> (usize, Vec<usize>) {
    let n = values.len();
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted.dedup();
    let m = sorted.len();
    let mut low = MaxFenwick::new(m);
    let mut high = MaxFenwick::new(m);
    let mut count = vec![0i64; n];
    let mut back = vec![usize::MAX; n];
    for i in 0..n {
        let a = values[i];
        // compare differences, not shifted thresholds, so ties round the same
        // way as `SampledPath::increment`
        let below = sorted.partition_point(|&v| a - v > lambda);
        let above = sorted.partition_point(|&v| v - a <= lambda);
        let cand = better(low.query(below), high.query(m - above));
        if cand.0 >= 0 {
            count[i] = cand.0 + 1;
            back[i] = cand.1;
        }
        let pos = sorted.partition_point(|&v| v < a);
        low.update(pos, (count[i], i));
        high.update(m - 1 - pos, (count[i], i));
    }
    finish_chain(&count, &back)
}

fn jump_chain_general(path: &SampledPath, lambda: f64) -> (usize, Vec<usize>) {
    let n = path.len();
    let mut count = vec![0i64; n];
    let mut back = vec![usize::MAX; n];
    for i in 1..n {
        for j in 0..i {
            if path.increment(j, i) > lambda && count[j] + 1 > count[i] {
                count[i] = count[j] + 1;
                back[i] = j;
            }
        }
    }
    finish_chain(&count, &back)
}

fn finish_chain(count: &[i64], back: &[usize]) -> (usize, Vec<usize>) {
    let mut arg = 0;
    for i in 1..count.len() {
        if count[i] > count[arg] {
            arg = i;
        }
    }
    if count[arg] == 0 {
        return (0, Vec::new());
    }
    let mut witness = vec![arg];
    let mut cur = arg;
    while back[cur] != usize::MAX {
        cur = back[cur];
        witness.push(cur);
    }
    witness.reverse();
    (count[arg] as usize, witness)
}

/// Jump counting function `N_lambda`: the longest chain of samples whose
/// consecutive increments all exceed `lambda`.
///
/// Scalar paths run in `O(n log n)` via range-maximum queries over the value
/// order; vector-valued paths use the quadratic DP.
pub fn jump_count(path: &SampledPath, lambda: f64) -> Result<JumpRecord> {
    check_lambda(lambda)?;
    let (count, witness) = if path.dim() == 1 { jump_chain_scalar(path.values(), lambda) } else { jump_chain_general(path, lambda) };
    Ok(JumpRecord { lambda, count, witness })
}

/// Exhaustive jump count over all subsequences (oracle, `n <= 14`).
pub fn jump_bruteforce(path: &SampledPath, lambda: f64) -> Result<usize> {
    check_lambda(lambda)?;
    let n = path.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::PathTooLong { len: n, limit: BRUTE_FORCE_LIMIT });
    }
    let mut best = 0usize;
    for mask in 1u32..(1 << n) {
        let k = mask.count_ones() as usize;
        if k < 2 || k - 1 <= best {
            continue;
        }
        let chosen: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if chosen.windows(2).all(|w| path.increment(w[0], w[1]) > lambda) {
            best = k - 1;
        }
    }
    Ok(best)
}

/// Blocked bracket for `hV^r`, valid for any path length.
///
/// With blocks `B_b` of consecutive samples, left endpoints `e_b` and
/// `o_b = max_{s in B_b} |a_s - a_{e_b}|`, every partition splits into
/// increments inside a block and increments crossing blocks, which gives
///
/// `hV <= hV(skeleton) + 2 (sum o_b^r)^{1/r} + (sum_b hV(B_b)^r)^{1/r}`.
///
/// The lower bound is the better of the skeleton chain and the concatenation
/// of per-block optimal chains, both genuine subsequences.
pub fn hvar_bounds(path: &SampledPath, r: f64, block: usize) -> Result<VariationBounds> {
    check_r(r)?;
    if block < 2 {
        return Err(Error::Invalid("block length must be at least 2".into()));
    }
    let idx = candidates(path);
    let m = idx.len();
    let mut skeleton = Vec::new();
    let mut osc_sum = 0.0;
    let mut inner_sum = 0.0;
    let mut concat: Vec<usize> = Vec::new();
    for chunk in idx.chunks(block) {
        skeleton.push(chunk[0]);
        let o = chunk.iter().map(|&s| path.increment(chunk[0], s)).fold(0.0, f64::max);
        osc_sum += pow_r(o, r);
        let (s, w) = dp_on(path, chunk, r);
        inner_sum += s;
        concat.extend(w);
    }
    let (skel_sum, skel_w) = dp_on(path, &skeleton, r);
    let skel = skel_sum.powf(1.0 / r);
    let concat_value = VariationResult { value: 0.0, witness: concat.clone(), r }.recompute(path);
    let (lower, witness) = if concat_value >= skel { (concat_value, concat) } else { (skel, skel_w) };
    let upper = skel + 2.0 * osc_sum.powf(1.0 / r) + inner_sum.powf(1.0 / r);
    let exact = m <= block;
    Ok(VariationBounds { lower, upper: if exact { lower } else { upper.max(lower) }, exact, witness })
}

/// Exact value when the reduced path has at most [`EXACT_LIMIT`] samples,
/// otherwise the blocked bracket with blocks of about `sqrt(n)` samples.
pub fn hvar_estimate(path: &SampledPath, r: f64) -> Result<VariationBounds> {
    check_r(r)?;
    let m = candidates(path).len();
    if m <= EXACT_LIMIT {
        let res = hvar_exact(path, r)?;
        return Ok(VariationBounds { lower: res.value, upper: res.value, exact: true, witness: res.witness });
    }
    let block = ((m as f64).sqrt().ceil() as usize).max(2);
    hvar_bounds(path, r, block)
}

/// Allocation-light `hV^r` of a scalar sequence, used in the pointwise operators.
pub fn hvar_scalar(values: &[f64], r: f64, scratch: &mut Vec<f64>) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    scratch.clear();
    scratch.resize(n, 0.0);
    let mut top = 0.0f64;
    for i in 1..n {
        let ai = values[i];
        let mut bi = 0.0f64;
        for j in 0..i {
            let c = scratch[j] + pow_r((ai - values[j]).abs(), r);
            if c > bi {
                bi = c;
            }
        }
        scratch[i] = bi;
        if bi > top {
            top = bi;
        }
    }
    top.powf(1.0 / r)
}

/// Inhomogeneous counterpart of [`hvar_scalar`].
pub fn var_inhom_scalar(values: &[f64], r: f64, scratch: &mut Vec<f64>) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs())) + hvar_scalar(values, r, scratch)
}

/// Jump count of a scalar sequence without witness.
pub fn jump_count_scalar(values: &[f64], lambda: f64) -> usize {
    if values.len() < 2 {
        return 0;
    }
    jump_chain_scalar(values, lambda).0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> SampledPath {
        SampledPath::from_values(v.to_vec()).unwrap()
    }

    #[test]
    fn hvar_examples() {
        assert_eq!(hvar_exact(&p(&[5.0, 5.0, 5.0]), 2.0).unwrap().value, 0.0);
        assert_eq!(hvar_exact(&p(&[0.0, 1.0, 3.0]), 1.0).unwrap().value, 3.0);
        let v = hvar_exact(&p(&[0.0, 1.0, 0.0, 1.0]), 2.0).unwrap();
        assert!((v.value - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(v.witness, vec![0, 1, 2, 3]);
        assert!((hvar_bruteforce(&p(&[0.0, 1.0, 0.0, 1.0]), 2.0).unwrap() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn inhom_examples() {
        assert_eq!(var_inhom(&p(&[5.0, 5.0, 5.0]), 2.0).unwrap(), 5.0);
        assert_eq!(var_inhom(&p(&[0.0]), 3.0).unwrap(), 0.0);
        let v = var_inhom(&p(&[0.0, 1.0, 0.0, 1.0]), 2.0).unwrap();
        assert!((v - (1.0 + 3f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn bruteforce_examples() {
        assert_eq!(hvar_bruteforce(&p(&[0.0, 1.0]), 3.0).unwrap(), 1.0);
        assert_eq!(hvar_bruteforce(&p(&[2.0, 2.0]), 2.0).unwrap(), 0.0);
        assert!(matches!(hvar_bruteforce(&p(&[0.0; 15]), 2.0), Err(Error::PathTooLong { .. })));
    }

    #[test]
    fn jump_examples() {
        assert_eq!(jump_count(&p(&[3.0; 6]), 0.1).unwrap().count, 0);
        let alt = p(&[0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(jump_count(&alt, 0.5).unwrap().count, 4);
        assert_eq!(jump_bruteforce(&alt, 0.5).unwrap(), 4);
        assert_eq!(jump_count(&alt, 1.0).unwrap().count, 0);
        assert_eq!(jump_bruteforce(&p(&[0.0, 1.0]), 0.5).unwrap(), 1);
        assert_eq!(jump_bruteforce(&p(&[0.0, 1.0]), 2.0).unwrap(), 0);
    }

    #[test]
    fn jump_count_beats_anchored_greedy() {
        // anchoring at the first sample finds nothing; the optimum skips it
        let path = p(&[0.0, 0.9, -0.9, 0.9, -0.9]);
        let rec = jump_count(&path, 1.0).unwrap();
        assert_eq!(rec.count, 3);
        assert_eq!(rec.witness, vec![1, 2, 3, 4]);
        assert_eq!(jump_bruteforce(&path, 1.0).unwrap(), 3);
    }

    #[test]
    fn errors() {
        assert!(matches!(hvar_exact(&p(&[0.0, 1.0]), 0.5), Err(Error::Exponent { .. })));
        assert!(matches!(jump_count(&p(&[0.0, 1.0]), 0.0), Err(Error::Threshold(_))));
        assert!(matches!(SampledPath::from_values(vec![]), Err(Error::EmptyPath)));
        assert!(matches!(SampledPath::new(vec![0.0, 0.0], vec![1.0, 2.0]), Err(Error::UnorderedTimes(1))));
    }

    #[test]
    fn turning_points_collapse_plateaus() {
        assert_eq!(turning_points(&[0.0, 1.0, 2.0, 2.0, 1.0, 1.0, 3.0]), vec![0, 2, 4, 6]);
        assert_eq!(turning_points(&[1.0, 1.0, 1.0]), vec![0]);
    }

    #[test]
    fn vector_paths_use_euclidean_increments() {
        let path = SampledPath::with_dim(vec![0.0, 1.0], vec![0.0, 0.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(hvar_exact(&path, 2.0).unwrap().value, 5.0);
        assert_eq!(jump_count(&path, 4.9).unwrap().count, 1);
    }

    #[test]
    fn bounds_bracket_exact_value() {
        let vals: Vec<f64> = (0..400).map(|i| ((i as f64) * 0.37).sin() + 0.3 * ((i as f64) * 1.7).cos()).collect();
        let path = p(&vals);
        for r in [1.0, 2.0, 3.0] {
            let exact = hvar_exact(&path, r).unwrap().value;
            let b = hvar_bounds(&path, r, 16).unwrap();
            assert!(b.lower <= exact * (1.0 + 1e-12) && exact <= b.upper * (1.0 + 1e-12), "{b:?} vs {exact}");
        }
    }

    #[test]
    fn scalar_kernels_agree() {
        let vals = [0.3, -1.2, 0.7, 0.7, 2.0, -0.4, 0.1];
        let mut scratch = Vec::new();
        for r in [1.0, 1.5, 2.0, 3.0] {
            let a = hvar_scalar(&vals, r, &mut scratch);
            let b = hvar_exact(&p(&vals), r).unwrap().value;
            assert!((a - b).abs() <= 1e-12 * (1.0 + b));
        }
        assert_eq!(jump_count_scalar(&vals, 0.5), jump_count(&p(&vals), 0.5).unwrap().count);
    }
}
