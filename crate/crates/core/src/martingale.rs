//! Dyadic conditional expectations, martingale differences, Haar multipliers,
//! Calderón–Zygmund decomposition and greedy stopping times.
//!
//! Level convention: `E_k` averages over cubes of side `2^k`, so larger `k`
//! is coarser, `E_0 f = f` and `E_K f` is the global mean. Differences are
//! `d_k = E_k f - E_{k+1} f` for `0 <= k < K`; `d_k` is constant on level-`k`
//! cubes and has mean zero on every level-`(k+1)` cube.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{CubeRef, Field, GridSpec};

fn check_level(grid: &GridSpec, k: u32) -> Result<()> {
    if k > grid.log_side() {
        return Err(Error::LevelOutOfRange { level: k as i64, max: grid.log_side() });
    }
    Ok(())
}

/// Per-cube sums of a scalar slice at level `k`, in [`GridSpec::cubes`] order.
pub(crate) fn cube_sums(grid: &GridSpec, values: &[f64], k: u32) -> Vec<f64> {
    let mut sums = vec![0.0; grid.cube_count(k)];
    for (idx, v) in values.iter().enumerate() {
        sums[grid.cube_index(idx, k)] += v;
    }
    sums
}

fn cond_expect_slice(grid: &GridSpec, values: &[f64], k: u32, out: &mut [f64]) {
    let vol = (1usize << (k as usize * grid.dim())) as f64;
    let sums = cube_sums(grid, values, k);
    for (idx, o) in out.iter_mut().enumerate() {
        *o = sums[grid.cube_index(idx, k)] / vol;
    }
}

/// `E_k f`: replaces `f` on each level-`k` cube by its mean there.
pub fn cond_expect(f: &Field, k: u32) -> Result<Field> {
    let grid = *f.grid();
    check_level(&grid, k)?;
    let mut out = f.clone();
    for i in 0..f.family_size() {
        cond_expect_slice(&grid, f.component(i), k, out.component_mut(i));
    }
    Ok(out)
}

/// `f = top + sum_k diffs[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleDecomposition {
    pub diffs: Vec<Field>,
    pub top: Field,
    pub source: Field,
}

impl MartingaleDecomposition {
    pub fn levels(&self) -> usize {
        self.diffs.len()
    }

    pub fn reconstruct(&self) -> Field {
        let mut out = self.top.clone();
        for d in &self.diffs {
            out = out.zip_with(d, |a, b| a + b).expect("compatible by construction");
        }
        out
    }
}

/// Martingale differences `d_k = E_k f - E_{k+1} f`, `0 <= k < K`, and `top = E_K f`.
pub fn mart_decompose(f: &Field) -> MartingaleDecomposition {
    let grid = *f.grid();
    let kmax = grid.log_side();
    let expectations: Vec<Field> = (0..=kmax).map(|k| cond_expect(f, k).expect("level in range")).collect();
    let diffs = expectations.windows(2).map(|w| w[0].zip_with(&w[1], |a, b| a - b).expect("same shape")).collect();
    MartingaleDecomposition { diffs, top: expectations[kmax as usize].clone(), source: f.clone() }
}

/// Dyadic martingale square function `(sum_k d_k^2)^{1/2}`, per component.
pub fn mart_square_function(f: &Field) -> Field {
    let dec = mart_decompose(f);
    let mut acc = f.map(|_| 0.0);
    for d in &dec.diffs {
        acc = acc.zip_with(d, |a, b| a + b * b).expect("same shape");
    }
    acc.map(f64::sqrt)
}

/// Signs `eps_k` for the Haar multiplier, one per level-`(k+1)` cube.
///
/// `eps_k` multiplies `d_k`; constancy on level-`(k+1)` cubes keeps
/// `eps_k d_k` mean-zero on those cubes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignField {
    grid: GridSpec,
    levels: Vec<Vec<i8>>,
}

impl SignField {
    /// `eps_k` constant over the whole grid.
    pub fn constant(grid: GridSpec, per_level: &[i8]) -> Result<Self> {
        let k = grid.log_side() as usize;
        if per_level.len() != k {
            return Err(Error::SignShape(format!("expected {k} levels, got {}", per_level.len())));
        }
        let levels = per_level.iter().enumerate().map(|(lvl, &s)| vec![s; grid.cube_count(lvl as u32 + 1)]).collect();
        Self::from_cube_signs(grid, levels)
    }

    /// Signs given per level-`(k+1)` cube, in [`GridSpec::cubes`] order.
    pub fn from_cube_signs(grid: GridSpec, levels: Vec<Vec<i8>>) -> Result<Self> {
        if levels.len() != grid.log_side() as usize {
            return Err(Error::SignShape(format!("expected {} levels, got {}", grid.log_side(), levels.len())));
        }
        for (k, lv) in levels.iter().enumerate() {
            if lv.len() != grid.cube_count(k as u32 + 1) {
                return Err(Error::SignShape(format!("level {k}: expected {} cubes", grid.cube_count(k as u32 + 1))));
            }
            if lv.iter().any(|&s| s != 1 && s != -1) {
                return Err(Error::SignShape(format!("level {k}: signs must be +1 or -1")));
            }
        }
        Ok(SignField { grid, levels })
    }

    /// Pointwise sign fields, rejected unless each `eps_k` is constant on level-`(k+1)` cubes.
    pub fn from_pointwise(grid: GridSpec, pointwise: &[Vec<i8>]) -> Result<Self> {
        if pointwise.len() != grid.log_side() as usize {
            return Err(Error::SignShape(format!("expected {} levels, got {}", grid.log_side(), pointwise.len())));
        }
        let mut levels = Vec::with_capacity(pointwise.len());
        for (k, pw) in pointwise.iter().enumerate() {
            let lvl = k as u32 + 1;
            if pw.len() != grid.len() {
                return Err(Error::SignShape(format!("level {k}: expected {} points", grid.len())));
            }
            let mut cube_sign = vec![0i8; grid.cube_count(lvl)];
            for (idx, &s) in pw.iter().enumerate() {
                let c = grid.cube_index(idx, lvl);
                if cube_sign[c] == 0 {
                    cube_sign[c] = s;
                } else if cube_sign[c] != s {
                    let q = crate::lattice::dyadic_cube_of(&grid, grid.coords(idx), lvl)?;
                    return Err(Error::SignNotCubeConstant { level: lvl, corner: q.corner });
                }
            }
            levels.push(cube_sign);
        }
        Self::from_cube_signs(grid, levels)
    }

    /// One seeded Rademacher draw per (level, cube).
    pub fn random(grid: GridSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let levels = (1..=grid.log_side())
            .map(|lvl| (0..grid.cube_count(lvl)).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
            .collect();
        SignField { grid, levels }
    }

    pub fn sign(&self, k: usize, idx: usize) -> i8 {
        self.levels[k][self.grid.cube_index(idx, k as u32 + 1)]
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
}

/// Haar multiplier `top + sum_k eps_k d_k`.
pub fn haar_multiplier(f: &Field, signs: &SignField) -> Result<Field> {
    if f.grid() != signs.grid() {
        return Err(Error::GridMismatch);
    }
    let dec = mart_decompose(f);
    let mut out = dec.top.clone();
    let n = f.grid().len();
    for (k, d) in dec.diffs.iter().enumerate() {
        for i in 0..f.family_size() {
            let dc = d.component(i);
            let oc = out.component_mut(i);
            for x in 0..n {
                oc[x] += signs.sign(k, x) as f64 * dc[x];
            }
        }
    }
    Ok(out)
}

/// An `L^inf`-normalised Haar function on one cube.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarAtom {
    pub cube: CubeRef,
    /// Values on the cube's points, row-major.
    pub values: Vec<f64>,
}

/// Normalised Haar atoms `h_Q = d_m 1_Q / ||d_m 1_Q||_inf` on the level-`(m+1)`
/// cubes and the carrier `sum_Q 1_Q ||d_m 1_Q||_inf`, where `m = k + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarAtoms {
    pub level: u32,
    /// `sum_Q h_Q` (the atoms have disjoint supports).
    pub normalized: Field,
    pub carrier: Field,
    pub cubes: Vec<CubeRef>,
}

impl HaarAtoms {
    pub fn atoms(&self) -> Vec<HaarAtom> {
        let grid = self.normalized.grid();
        self.cubes
            .iter()
            .map(|q| HaarAtom { cube: *q, values: q.points(grid).iter().map(|&p| self.normalized.values()[p]).collect() })
            .collect()
    }

    /// `sum_Q h_Q * carrier`, which returns `d_m` up to one rounding per point.
    pub fn reconstruct(&self) -> Field {
        self.normalized.zip_with(&self.carrier, |h, c| h * c).expect("same shape")
    }
}

pub fn haar_atoms_from_diff(dec: &MartingaleDecomposition, k: u32, j: i32) -> Result<HaarAtoms> {
    let grid = *dec.source.grid();
    let m = k as i64 + j as i64;
    if m < 0 || m + 1 > grid.log_side() as i64 {
        return Err(Error::LevelOutOfRange { level: m + 1, max: grid.log_side() });
    }
    let m = m as usize;
    let d = dec.diffs[m].scalar_component(0);
    let lvl = m as u32 + 1;
    let mut sup = vec![0.0f64; grid.cube_count(lvl)];
    for (idx, v) in d.values().iter().enumerate() {
        let c = grid.cube_index(idx, lvl);
        sup[c] = sup[c].max(v.abs());
    }
    let mut normalized = vec![0.0; grid.len()];
    let mut carrier = vec![0.0; grid.len()];
    for (idx, v) in d.values().iter().enumerate() {
        let s = sup[grid.cube_index(idx, lvl)];
        if s > 0.0 {
            normalized[idx] = v / s;
            carrier[idx] = s;
        }
    }
    Ok(HaarAtoms {
        level: lvl,
        normalized: Field::new(grid, normalized)?,
        carrier: Field::new(grid, carrier)?,
        cubes: grid.cubes(lvl)?,
    })
}

/// Output of [`cz_decompose`].
#[derive(Debug, Clone, PartialEq)]
pub struct CzResult {
    /// Maximal dyadic cubes where the mean of `F` exceeds the threshold.
    pub cubes: Vec<CubeRef>,
    /// `g_j`: cube means on selected cubes, `f_j` elsewhere.
    pub good: Field,
    /// `b_j = sum_Q b_j^Q`.
    pub bad: Field,
    /// `F = (sum_j |f_j|^q)^{1/q}`.
    pub magnitude: Field,
    pub threshold: f64,
    pub q: f64,
    /// Index into `cubes` for every grid point covered by a selected cube.
    pub owner: Vec<Option<usize>>,
}

impl CzResult {
    /// Values of `b_j^Q` on the points of cube `qi`, row-major.
    pub fn bad_atom(&self, qi: usize, component: usize) -> Vec<f64> {
        let grid = self.bad.grid();
        self.cubes[qi].points(grid).iter().map(|&p| self.bad.component(component)[p]).collect()
    }

    pub fn covered(&self, idx: usize) -> bool {
        self.owner[idx].is_some()
    }
}

/// Calderón–Zygmund decomposition of a vector field at height `threshold`.
///
/// Cubes are selected coarse to fine: a level-`k` cube is taken as soon as
/// the mean of `F` over it exceeds the threshold, and its descendants are
/// skipped. The whole torus cannot be selected, so the global mean of `F`
/// must not exceed the threshold.
pub fn cz_decompose(f: &Field, q: f64, threshold: f64) -> Result<CzResult> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::Threshold(threshold));
    }
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::Exponent { constraint: "1 <= q < inf", value: q });
    }
    let grid = *f.grid();
    let n = grid.len();
    let big_f = f.lq_norm_pointwise(q);
    let mean = big_f.mean();
    if mean > threshold {
        return Err(Error::MassTooLarge { mean, threshold });
    }
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut cubes = Vec::new();
    for lvl in (0..grid.log_side()).rev() {
        let vol = (1usize << (lvl as usize * grid.dim())) as f64;
        let sums = cube_sums(&grid, big_f.values(), lvl);
        for (ci, q) in grid.cubes(lvl)?.into_iter().enumerate() {
            let corner = grid.index(q.corner);
            if owner[corner].is_some() {
                continue;
            }
            if sums[ci] / vol > threshold {
                let id = cubes.len();
                for p in q.points(&grid) {
                    owner[p] = Some(id);
                }
                cubes.push(q);
            }
        }
    }
    let mut good = f.clone();
    let mut bad = f.map(|_| 0.0);
    for c in 0..f.family_size() {
        let fc = f.component(c);
        let mut means = Vec::with_capacity(cubes.len());
        for q in &cubes {
            let pts = q.points(&grid);
            means.push(pts.iter().map(|&p| fc[p]).sum::<f64>() / pts.len() as f64);
        }
        let gc = good.component_mut(c);
        for x in 0..n {
            if let Some(id) = owner[x] {
                gc[x] = means[id];
            }
        }
        let bc = bad.component_mut(c);
        for x in 0..n {
            if let Some(id) = owner[x] {
                bc[x] = fc[x] - means[id];
            }
        }
    }
    Ok(CzResult { cubes, good, bad, magnitude: big_f, threshold, q, owner })
}

/// Per-point greedy stopping levels, coarsest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingTimes {
    pub levels: Vec<Vec<u32>>,
    pub top_level: u32,
}

impl StoppingTimes {
    pub fn count(&self, idx: usize) -> usize {
        self.levels[idx].len()
    }

    /// Whether every stop `t_j(x)` is shared by all points of the level-`t_j(x)`
    /// cube around `x`, together with all earlier stops.
    pub fn is_adapted(&self, grid: &GridSpec) -> bool {
        for x in 0..grid.len() {
            for (j, &lvl) in self.levels[x].iter().enumerate() {
                let q = crate::lattice::dyadic_cube_of(grid, grid.coords(x), lvl).expect("valid level");
                for y in q.points(grid) {
                    if self.levels[y].len() <= j || self.levels[y][..=j] != self.levels[x][..=j] {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Signs `eps_k(x) = r_{seg(k,x)}` where `seg(k,x)` counts the stops above
    /// level `k`; `rademacher` is indexed by segment and shared by all points.
    pub fn segment_signs(&self, grid: GridSpec, rademacher: &[i8]) -> Result<SignField> {
        let kmax = grid.log_side() as usize;
        let mut pointwise = vec![vec![0i8; grid.len()]; kmax];
        for x in 0..grid.len() {
            for (k, row) in pointwise.iter_mut().enumerate() {
                let seg = self.levels[x].iter().filter(|&&s| s as usize > k).count();
                row[x] = *rademacher.get(seg).ok_or_else(|| Error::SignShape(format!("need {} segment signs", seg + 1)))?;
            }
        }
        SignField::from_pointwise(grid, &pointwise)
    }
}

/// Adapted greedy selection on the chain `k -> E_k f(x)`, scanned from the
/// global mean (`k = K`) down to `f` itself (`k = 0`): a stop is recorded at
/// level `k` when `|E_k f(x) - anchor| > lambda`, and the anchor moves there.
///
/// Each decision uses only averages at levels `>= k`, so each stop is a
/// stopping time. The count sits between `N_{2 lambda}` and `N_lambda` of the
/// chain.
pub fn greedy_stopping_times(f: &Field, lambda: f64) -> Result<StoppingTimes> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Threshold(lambda));
    }
    let grid = *f.grid();
    let kmax = grid.log_side();
    let chains: Vec<Field> = (0..=kmax).map(|k| cond_expect(&f.scalar_component(0), k)).collect::<Result<_>>()?;
    let levels = (0..grid.len())
        .map(|x| {
            let mut anchor = chains[kmax as usize].values()[x];
            let mut stops = Vec::new();
            for k in (0..kmax).rev() {
                let v = chains[k as usize].values()[x];
                if (v - anchor).abs() > lambda {
                    stops.push(k);
                    anchor = v;
                }
            }
            stops
        })
        .collect();
    Ok(StoppingTimes { levels, top_level: kmax })
}

/// The chain `(E_K f(x), E_{K-1} f(x), ..., E_0 f(x))`, coarse to fine.
pub fn average_chain(f: &Field, x: usize) -> Result<Vec<f64>> {
    let kmax = f.grid().log_side();
    (0..=kmax).rev().map(|k| Ok(cond_expect(f, k)?.values()[x])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variation::{jump_count, SampledPath};

    fn g1(k: u32) -> GridSpec {
        GridSpec::new(1, k).unwrap()
    }

    fn small() -> Field {
        Field::new(g1(2), vec![1.0, 3.0, 2.0, 6.0]).unwrap()
    }

    #[test]
    fn cond_expect_examples() {
        let c = Field::constant(g1(4), 2.5);
        assert_eq!(cond_expect(&c, 3).unwrap(), c);
        assert_eq!(cond_expect(&small(), 1).unwrap().values(), &[2.0, 2.0, 4.0, 4.0]);
        assert!(cond_expect(&small(), 3).is_err());
    }

    #[test]
    fn decomposition_example() {
        let dec = mart_decompose(&small());
        assert_eq!(dec.diffs[0].values(), &[-1.0, 1.0, -2.0, 2.0]);
        assert_eq!(dec.diffs[1].values(), &[-1.0, -1.0, 1.0, 1.0]);
        assert_eq!(dec.top.values(), &[3.0; 4]);
        assert_eq!(dec.reconstruct(), small());
        let c = mart_decompose(&Field::constant(g1(4), 1.25));
        assert!(c.diffs.iter().all(|d| d.values().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn square_function_example() {
        let s = mart_square_function(&small());
        let want = [2f64.sqrt(), 2f64.sqrt(), 5f64.sqrt(), 5f64.sqrt()];
        for (a, b) in s.values().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let s2 = mart_square_function(&small().scaled(2.0));
        for (a, b) in s2.values().iter().zip(s.values()) {
            assert!((a - 2.0 * b).abs() < 1e-14);
        }
    }

    #[test]
    fn multiplier_examples() {
        let f = small();
        let plus = SignField::constant(*f.grid(), &[1, 1]).unwrap();
        assert_eq!(haar_multiplier(&f, &plus).unwrap(), f);
        let mixed = SignField::constant(*f.grid(), &[-1, 1]).unwrap();
        assert_eq!(haar_multiplier(&f, &mixed).unwrap().values(), &[3.0, 1.0, 6.0, 2.0]);
        let c = Field::constant(g1(4), 7.0);
        let minus = SignField::constant(g1(4), &[-1; 4]).unwrap();
        assert_eq!(haar_multiplier(&c, &minus).unwrap(), c);
    }

    #[test]
    fn multiplier_rejects_non_constant_signs() {
        let g = g1(2);
        // level-0 signs must be constant on level-1 cubes {0,1} and {2,3}
        let bad = vec![vec![1, -1, 1, 1], vec![1, 1, 1, 1]];
        assert!(matches!(SignField::from_pointwise(g, &bad), Err(Error::SignNotCubeConstant { level: 1, .. })));
        let ok = vec![vec![1, 1, -1, -1], vec![1, 1, 1, 1]];
        assert!(SignField::from_pointwise(g, &ok).is_ok());
    }

    #[test]
    fn haar_atom_examples() {
        let f = Field::new(g1(2), vec![-1.0, 1.0, 0.0, 0.0]).unwrap();
        let dec = mart_decompose(&f);
        assert_eq!(dec.diffs[0].values(), &[-1.0, 1.0, 0.0, 0.0]);
        let atoms = haar_atoms_from_diff(&dec, 1, -1).unwrap();
        assert_eq!(atoms.level, 1);
        assert_eq!(atoms.normalized.values(), &[-1.0, 1.0, 0.0, 0.0]);
        assert_eq!(atoms.carrier.values(), &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(atoms.atoms()[0].values, vec![-1.0, 1.0]);
        let zero = mart_decompose(&Field::zeros(g1(3)));
        let z = haar_atoms_from_diff(&zero, 2, -1).unwrap();
        assert!(z.normalized.values().iter().chain(z.carrier.values()).all(|&v| v == 0.0));
        assert!(haar_atoms_from_diff(&dec, 0, -1).is_err());
        assert!(haar_atoms_from_diff(&dec, 2, 0).is_err());
    }

    #[test]
    fn cz_below_threshold_selects_nothing() {
        let f = Field::from_components(g1(4), vec![vec![0.5; 16], vec![0.25; 16]]).unwrap();
        let cz = cz_decompose(&f, 2.0, 1.0).unwrap();
        assert!(cz.cubes.is_empty());
        assert_eq!(cz.good, f);
        assert!(cz.bad.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cz_single_spike_stopping_level() {
        // mass m at one cell: the level-k cube has mean m / 2^k, so the
        // maximal selected cube has side 2^k with 2^k < m <= 2^{k+1}
        for (m, side) in [(5.0, 4usize), (8.0, 4), (9.0, 8), (1.5, 1), (2.0, 1)] {
            let mut v = vec![0.0; 64];
            v[21] = m;
            let f = Field::new(g1(6), v).unwrap();
            let cz = cz_decompose(&f, 2.0, 1.0).unwrap();
            assert_eq!(cz.cubes.len(), 1, "mass {m}");
            assert_eq!(cz.cubes[0].side(), side, "mass {m}");
            assert!(cz.bad_atom(0, 0).iter().sum::<f64>().abs() < 1e-15);
        }
        let f = Field::new(g1(4), vec![2.0; 16]).unwrap();
        assert!(matches!(cz_decompose(&f, 2.0, 1.0), Err(Error::MassTooLarge { .. })));
        assert!(matches!(cz_decompose(&f, 2.0, 0.0), Err(Error::Threshold(_))));
    }

    #[test]
    fn stopping_time_example() {
        let f = Field::new(g1(2), vec![0.0, 0.0, 0.0, 8.0]).unwrap();
        let st = greedy_stopping_times(&f, 1.0).unwrap();
        assert_eq!(st.levels[3], vec![1, 0]);
        assert_eq!(average_chain(&f, 3).unwrap(), vec![2.0, 4.0, 8.0]);
        let chain = SampledPath::from_values(average_chain(&f, 3).unwrap()).unwrap();
        assert_eq!(jump_count(&chain, 1.0).unwrap().count, 2);
        assert!(st.is_adapted(f.grid()));
        let c = greedy_stopping_times(&Field::constant(g1(4), 3.0), 0.1).unwrap();
        assert!(c.levels.iter().all(|l| l.is_empty()));
    }
}
