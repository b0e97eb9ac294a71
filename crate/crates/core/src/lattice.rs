//! Periodic lattice boxes, dyadic cubes, closed lattice balls and sampled fields.
//!
//! Points are addressed either by a flat index (`x0 + side * x1`) or by a
//! coordinate pair `[x0, x1]`; in dimension one the second coordinate is
//! always zero. All coordinate arithmetic wraps modulo the side length.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lattice coordinates, reduced modulo the side length.
pub type Coord = [usize; 2];

/// A periodic box with `2^log_side` unit-spaced points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct GridSpec {
    dim: usize,
    log_side: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridRepr {
    dim: usize,
    log_side: u32,
}

impl TryFrom<GridRepr> for GridSpec {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        GridSpec::new(r.dim, r.log_side)
    }
}

impl From<GridSpec> for GridRepr {
    fn from(g: GridSpec) -> Self {
        GridRepr { dim: g.dim, log_side: g.log_side }
    }
}

impl GridSpec {
    pub const MAX_LOG_SIDE_1D: u32 = 22;
    pub const MAX_LOG_SIDE_2D: u32 = 11;

    pub fn new(dim: usize, log_side: u32) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Dimension(dim));
        }
        let max = if dim == 1 { Self::MAX_LOG_SIDE_1D } else { Self::MAX_LOG_SIDE_2D };
        if log_side < 1 || log_side > max {
            return Err(Error::GridSize { dim, log_side });
        }
        Ok(GridSpec { dim, log_side })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `K`: the finest-to-coarsest number of dyadic levels.
    pub fn log_side(&self) -> u32 {
        self.log_side
    }

    pub fn side(&self) -> usize {
        1 << self.log_side
    }

    /// Number of lattice points.
    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coords(&self, idx: usize) -> Coord {
        let side = self.side();
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx & (side - 1), idx >> self.log_side]
        }
    }

    pub fn index(&self, c: Coord) -> usize {
        c[0] + (c[1] << self.log_side)
    }

    /// Reduces signed coordinates onto the torus.
    pub fn wrap(&self, c: [i64; 2]) -> Coord {
        let side = self.side() as i64;
        let w0 = c[0].rem_euclid(side) as usize;
        let w1 = if self.dim == 1 { 0 } else { c[1].rem_euclid(side) as usize };
        [w0, w1]
    }

    pub fn shifted(&self, idx: usize, delta: [i64; 2]) -> usize {
        let c = self.coords(idx);
        self.index(self.wrap([c[0] as i64 + delta[0], c[1] as i64 + delta[1]]))
    }

    /// Minimal-image displacement `b - a` on the torus.
    pub fn displacement(&self, a: Coord, b: Coord) -> [i64; 2] {
        let side = self.side() as i64;
        let half = side / 2;
        let mut out = [0i64; 2];
        for (axis, o) in out.iter_mut().enumerate().take(self.dim) {
            let mut v = (b[axis] as i64 - a[axis] as i64).rem_euclid(side);
            if v >= half {
                v -= side;
            }
            *o = v;
        }
        out
    }

    /// Largest admissible radius for lattice balls, `2^{K-2}`.
    pub fn max_radius(&self) -> u64 {
        if self.log_side >= 2 {
            1 << (self.log_side - 2)
        } else {
            0
        }
    }

    fn check_level(&self, level: u32) -> Result<()> {
        if level > self.log_side {
            return Err(Error::LevelOutOfRange { level: level as i64, max: self.log_side });
        }
        Ok(())
    }

    /// All level-`k` cubes in row-major corner order.
    pub fn cubes(&self, level: u32) -> Result<Vec<CubeRef>> {
        self.check_level(level)?;
        let step = 1usize << level;
        let per_axis = self.side() >> level;
        let mut out = Vec::with_capacity(per_axis.pow(self.dim as u32));
        let rows = if self.dim == 1 { 1 } else { per_axis };
        for j in 0..rows {
            for i in 0..per_axis {
                out.push(CubeRef { level, corner: [i * step, j * step] });
            }
        }
        Ok(out)
    }

    /// Index of the level-`k` cube containing `idx`, in the order of [`GridSpec::cubes`].
    pub fn cube_index(&self, idx: usize, level: u32) -> usize {
        let c = self.coords(idx);
        let per_axis = self.side() >> level;
        (c[0] >> level) + per_axis * (c[1] >> level)
    }

    pub fn cube_count(&self, level: u32) -> usize {
        (self.side() >> level).pow(self.dim as u32)
    }
}

/// A dyadic cube of side `2^level` with a grid-aligned corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CubeRef {
    pub level: u32,
    pub corner: Coord,
}

impl CubeRef {
    pub fn side(&self) -> usize {
        1 << self.level
    }

    pub fn volume(&self, dim: usize) -> usize {
        self.side().pow(dim as u32)
    }

    pub fn contains(&self, grid: &GridSpec, x: Coord) -> bool {
        (0..grid.dim()).all(|a| x[a] >= self.corner[a] && x[a] < self.corner[a] + self.side())
    }

    /// Flat indices of the points of the cube, row-major.
    pub fn points(&self, grid: &GridSpec) -> Vec<usize> {
        let s = self.side();
        let rows = if grid.dim() == 1 { 1 } else { s };
        let mut out = Vec::with_capacity(s * rows);
        for j in 0..rows {
            for i in 0..s {
                out.push(grid.index([self.corner[0] + i, self.corner[1] + j]));
            }
        }
        out
    }

    pub fn parent(&self, grid: &GridSpec) -> Option<CubeRef> {
        if self.level >= grid.log_side() {
            return None;
        }
        let mask = !((1usize << (self.level + 1)) - 1);
        Some(CubeRef { level: self.level + 1, corner: [self.corner[0] & mask, self.corner[1] & mask] })
    }

    /// Euclidean distance from `x` to the nearest point of the cube, minimal image.
    pub fn distance_to(&self, grid: &GridSpec, x: Coord) -> f64 {
        let side = grid.side() as i64;
        let s = self.side() as i64;
        let mut sq = 0.0;
        for (&c, &xa) in self.corner.iter().zip(&x).take(grid.dim()) {
            let lo = c as i64;
            let hi = lo + s - 1;
            let xa = xa as i64;
            // try the periodic images of x along this axis
            let mut best = i64::MAX;
            for shift in [-side, 0, side] {
                let y = xa + shift;
                let d = if y < lo { lo - y } else if y > hi { y - hi } else { 0 };
                best = best.min(d);
            }
            sq += (best * best) as f64;
        }
        sq.sqrt()
    }
}

impl fmt::Display for CubeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}@({},{})", self.level, self.corner[0], self.corner[1])
    }
}

/// The level-`k` dyadic cube containing `x`.
pub fn dyadic_cube_of(grid: &GridSpec, x: Coord, level: u32) -> Result<CubeRef> {
    grid.check_level(level)?;
    let mask = !((1usize << level) - 1);
    let corner = [x[0] & mask, if grid.dim() == 1 { 0 } else { x[1] & mask }];
    Ok(CubeRef { level, corner })
}

/// Points of the concentric cube with `factor` times the side (odd factor), wrapped.
///
/// When the enlarged cube is longer than the torus along an axis, the whole
/// axis is returned once; the result is sorted and duplicate-free.
pub fn concentric_cube(grid: &GridSpec, q: &CubeRef, factor: usize) -> Result<Vec<usize>> {
    if factor % 2 == 0 {
        return Err(Error::Invalid(format!("enlargement factor must be odd, got {factor}")));
    }
    let s = q.side() as i64;
    let reach = (factor as i64 - 1) / 2 * s;
    let span = factor as i64 * s;
    let side = grid.side() as i64;
    let axis_points = |a: usize| -> Vec<usize> {
        if span >= side {
            (0..grid.side()).collect()
        } else {
            let start = q.corner[a] as i64 - reach;
            (0..span).map(|o| (start + o).rem_euclid(side) as usize).collect()
        }
    };
    let xs = axis_points(0);
    let mut out = if grid.dim() == 1 {
        xs.iter().map(|&x| grid.index([x, 0])).collect::<Vec<_>>()
    } else {
        let ys = axis_points(1);
        let mut v = Vec::with_capacity(xs.len() * ys.len());
        for &y in &ys {
            for &x in &xs {
                v.push(grid.index([x, y]));
            }
        }
        v
    };
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// `3Q`: the concentric cube with three times the side length.
pub fn concentric_3q(grid: &GridSpec, q: &CubeRef) -> Result<Vec<usize>> {
    concentric_cube(grid, q, 3)
}

/// A positive rational radius `num / den`.
///
/// Ball membership compares squared integer distances against `t^2` in exact
/// integer arithmetic.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Radius {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Radius {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::RadiusOutOfRange { radius: num as f64 / den.max(1) as f64, max: f64::INFINITY });
        }
        let g = gcd(num, den);
        Ok(Radius { num: num / g, den: den / g })
    }

    pub fn integer(t: u64) -> Result<Self> {
        Self::new(t, 1)
    }

    /// Converts a float radius, rounding to a multiple of `2^-20`.
    pub fn from_f64(t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::RadiusOutOfRange { radius: t, max: f64::INFINITY });
        }
        let den = 1u64 << 20;
        Self::new((t * den as f64).round() as u64, den)
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn numer(&self) -> u64 {
        self.num
    }

    pub fn denom(&self) -> u64 {
        self.den
    }

    pub fn floor(&self) -> u64 {
        self.num / self.den
    }

    /// Whether a point at squared distance `dist_sq` lies in the closed ball.
    pub fn contains_sq(&self, dist_sq: u64) -> bool {
        (dist_sq as u128) * (self.den as u128).pow(2) <= (self.num as u128).pow(2)
    }

    /// Largest `w` with `w^2 + dy^2 <= t^2`, or `None` if row `dy` misses the ball.
    pub fn half_width(&self, dy: u64) -> Option<u64> {
        let t2 = (self.num as u128).pow(2);
        let d2 = (dy as u128 * self.den as u128).pow(2);
        if d2 > t2 {
            return None;
        }
        let rem = (t2 - d2) / (self.den as u128).pow(2);
        Some(rem.isqrt() as u64)
    }
}

impl PartialEq for Radius {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Radius {}

impl PartialOrd for Radius {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Radius {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl fmt::Display for Radius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Row decomposition of a closed lattice ball centred at the origin.
///
/// `half_widths[|dy|]` is the half-width of the ball's intersection with
/// the row at vertical offset `dy`; in dimension one only row 0 exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BallShape {
    pub radius: Radius,
    pub dim: usize,
    pub half_widths: Vec<u64>,
}

impl BallShape {
    pub fn new(dim: usize, radius: Radius) -> Self {
        let reach = radius.floor();
        let half_widths = if dim == 1 {
            vec![reach]
        } else {
            (0..=reach).map(|dy| radius.half_width(dy).expect("row within reach")).collect()
        };
        BallShape { radius, dim, half_widths }
    }

    /// Number of rows above (and below) the centre row.
    pub fn reach(&self) -> u64 {
        (self.half_widths.len() - 1) as u64
    }

    pub fn count(&self) -> usize {
        if self.dim == 1 {
            2 * self.half_widths[0] as usize + 1
        } else {
            let centre = 2 * self.half_widths[0] as usize + 1;
            centre + 2 * self.half_widths[1..].iter().map(|&w| 2 * w as usize + 1).sum::<usize>()
        }
    }

    pub fn contains(&self, delta: [i64; 2]) -> bool {
        let dy = delta[1].unsigned_abs();
        if self.dim == 1 && dy != 0 {
            return false;
        }
        match self.half_widths.get(dy as usize) {
            Some(&w) => delta[0].unsigned_abs() <= w,
            None => false,
        }
    }

    /// Explicit offset list, rows bottom to top.
    pub fn offsets(&self) -> Vec<[i64; 2]> {
        let mut out = Vec::with_capacity(self.count());
        if self.dim == 1 {
            let w = self.half_widths[0] as i64;
            out.extend((-w..=w).map(|dx| [dx, 0]));
        } else {
            let r = self.reach() as i64;
            for dy in -r..=r {
                let w = self.half_widths[dy.unsigned_abs() as usize] as i64;
                out.extend((-w..=w).map(|dx| [dx, dy]));
            }
        }
        out
    }
}

/// Validates a ball radius against the torus size.
pub fn check_radius(grid: &GridSpec, t: Radius) -> Result<()> {
    let max = grid.max_radius();
    if max == 0 || t > Radius::integer(max)? {
        return Err(Error::RadiusOutOfRange { radius: t.value(), max: max as f64 });
    }
    Ok(())
}

/// All lattice points within closed Euclidean distance `t` of `x`, wrapped.
pub fn ball_points(grid: &GridSpec, x: Coord, t: Radius) -> Result<Vec<usize>> {
    check_radius(grid, t)?;
    let shape = BallShape::new(grid.dim(), t);
    let centre = grid.index(x);
    let mut pts: Vec<usize> = shape.offsets().into_iter().map(|o| grid.shifted(centre, o)).collect();
    pts.sort_unstable();
    Ok(pts)
}

/// A real-valued (optionally vector-valued) sample on a periodic grid.
///
/// Values are stored component-major: component `i` occupies
/// `values[i * n .. (i + 1) * n]` with `n = grid.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: GridSpec,
    family_size: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        Self::with_family(grid, 1, values)
    }

    pub fn with_family(grid: GridSpec, family_size: usize, values: Vec<f64>) -> Result<Self> {
        if family_size == 0 {
            return Err(Error::Invalid("family size must be at least 1".into()));
        }
        let expected = grid.len() * family_size;
        if values.len() != expected {
            return Err(Error::FieldLength { expected, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Field { grid, family_size, values })
    }

    pub fn from_components(grid: GridSpec, comps: Vec<Vec<f64>>) -> Result<Self> {
        let m = comps.len();
        Self::with_family(grid, m, comps.into_iter().flatten().collect())
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Field { grid, family_size: 1, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(Coord) -> f64) -> Result<Self> {
        Self::new(grid, (0..grid.len()).map(|i| f(grid.coords(i))).collect())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn family_size(&self) -> usize {
        self.family_size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, i: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.values[i * n..(i + 1) * n]
    }

    pub fn components(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.grid.len())
    }

    /// Component `i` as a scalar field.
    pub fn scalar_component(&self, i: usize) -> Field {
        Field { grid: self.grid, family_size: 1, values: self.component(i).to_vec() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid, family_size: self.family_size, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field { grid: self.grid, family_size: self.family_size, values })
    }

    pub fn check_compatible(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.family_size != other.family_size {
            return Err(Error::FamilyMismatch(self.family_size, other.family_size));
        }
        Ok(())
    }

    /// Pointwise `l^q` norm over the family index.
    pub fn lq_norm_pointwise(&self, q: f64) -> Field {
        let n = self.grid.len();
        let values = (0..n)
            .map(|x| {
                if self.family_size == 1 {
                    self.values[x].abs()
                } else {
                    (0..self.family_size).map(|i| self.values[i * n + x].abs().powf(q)).sum::<f64>().powf(1.0 / q)
                }
            })
            .collect();
        Field { grid: self.grid, family_size: 1, values }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(dim: usize, k: u32) -> GridSpec {
        GridSpec::new(dim, k).unwrap()
    }

    #[test]
    fn cube_corner_clears_low_bits() {
        let g1 = g(1, 4);
        assert_eq!(dyadic_cube_of(&g1, [5, 0], 1).unwrap().corner, [4, 0]);
        for k in 0..=4 {
            assert_eq!(dyadic_cube_of(&g1, [0, 0], k).unwrap().corner, [0, 0]);
        }
        assert!(dyadic_cube_of(&g1, [0, 0], 5).is_err());
    }

    #[test]
    fn cube_of_2d_matches_enumeration() {
        let g2 = g(2, 4);
        let x = [7, 2];
        let containing: Vec<_> = g2.cubes(2).unwrap().into_iter().filter(|q| q.contains(&g2, x)).collect();
        assert_eq!(containing.len(), 1);
        assert_eq!(containing[0].corner, [4, 0]);
        assert_eq!(dyadic_cube_of(&g2, x, 2).unwrap(), containing[0]);
    }

    #[test]
    fn concentric_examples() {
        let g1 = g(1, 4);
        let q = CubeRef { level: 0, corner: [4, 0] };
        assert_eq!(concentric_3q(&g1, &q).unwrap(), vec![3, 4, 5]);
        let q = CubeRef { level: 1, corner: [4, 0] };
        assert_eq!(concentric_3q(&g1, &q).unwrap(), vec![2, 3, 4, 5, 6, 7]);
        let g2 = g(2, 4);
        let q = CubeRef { level: 0, corner: [0, 0] };
        let pts = concentric_3q(&g2, &q).unwrap();
        assert_eq!(pts.len(), 9);
        assert!(pts.contains(&g2.index([15, 15])));
        let big = CubeRef { level: 3, corner: [8, 0] };
        assert_eq!(concentric_3q(&g1, &big).unwrap().len(), 16);
    }

    #[test]
    fn ball_examples() {
        let g1 = g(1, 5);
        assert_eq!(ball_points(&g1, [0, 0], Radius::integer(1).unwrap()).unwrap(), vec![0, 1, 31]);
        let g2 = g(2, 5);
        assert_eq!(ball_points(&g2, [0, 0], Radius::integer(1).unwrap()).unwrap().len(), 5);
        let t = Radius::new(5, 2).unwrap();
        // brute-force scan of the square [-3,3]^2 against 4|y|^2 <= 25
        let brute = (-3i64..=3).flat_map(|a| (-3i64..=3).map(move |b| (a, b))).filter(|(a, b)| 4 * (a * a + b * b) <= 25).count();
        assert_eq!(brute, 21);
        assert_eq!(ball_points(&g2, [0, 0], t).unwrap().len(), 21);
        assert_eq!(BallShape::new(2, t).count(), 21);
        assert!(ball_points(&g2, [0, 0], Radius::integer(9).unwrap()).is_err());
    }

    #[test]
    fn levels_tile_the_grid() {
        for dim in [1, 2] {
            let gr = g(dim, 4);
            for k in 0..=4 {
                let mut hits = vec![0u32; gr.len()];
                for q in gr.cubes(k).unwrap() {
                    for p in q.points(&gr) {
                        hits[p] += 1;
                    }
                }
                assert!(hits.iter().all(|&h| h == 1));
            }
        }
    }

    #[test]
    fn radius_is_exact() {
        let t = Radius::new(5, 1).unwrap();
        assert!(t.contains_sq(25));
        assert!(!t.contains_sq(26));
        assert_eq!(t.half_width(3), Some(4));
        assert_eq!(t.half_width(6), None);
        assert_eq!(Radius::new(10, 4).unwrap(), Radius::from_f64(2.5).unwrap());
        assert!(Radius::new(9, 4).unwrap() < Radius::new(5, 2).unwrap());
    }

    #[test]
    fn field_validation() {
        let gr = g(1, 4);
        assert!(Field::new(gr, vec![0.0; 15]).is_err());
        let mut v = vec![0.0; 16];
        v[3] = f64::NAN;
        assert_eq!(Field::new(gr, v), Err(Error::NonFinite(3)));
    }

    #[test]
    fn distance_to_cube_uses_minimal_image() {
        let gr = g(1, 4);
        let q = CubeRef { level: 1, corner: [0, 0] };
        assert_eq!(q.distance_to(&gr, [15, 0]), 1.0);
        assert_eq!(q.distance_to(&gr, [1, 0]), 0.0);
        assert_eq!(q.distance_to(&gr, [5, 0]), 4.0);
    }
}
