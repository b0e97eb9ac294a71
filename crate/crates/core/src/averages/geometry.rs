use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{check_radius, BallShape, Coord, Field, GridSpec, Radius};

/// Per-axis `(min, max)` of `|displacement|^2` from `x_axis` over each cube of side `s`.
fn axis_extents(grid: &GridSpec, x_axis: usize, s: usize) -> Vec<(u64, u64)> {
    let side = grid.side();
    let half = (side / 2) as i64;
    (0..side / s)
        .map(|c| {
            let mut lo = u64::MAX;
            let mut hi = 0u64;
            for p in c * s..(c + 1) * s {
                let mut v = (p as i64 - x_axis as i64).rem_euclid(side as i64);
                if v >= half {
                    v -= side as i64;
                }
                let sq = (v * v) as u64;
                lo = lo.min(sq);
                hi = hi.max(sq);
            }
            (lo, hi)
        })
        .collect()
}

/// Number of level-`(k+i)` dyadic cubes holding lattice points both inside and
/// outside the closed ball `B(x, t)`.
pub fn boundary_cube_count(grid: &GridSpec, x: Coord, t: Radius, k: u32, i: i32) -> Result<usize> {
    check_radius(grid, t)?;
    let level = k as i64 + i as i64;
    if i > 0 || level < 0 || level > grid.log_side() as i64 {
        return Err(Error::LevelOutOfRange { level, max: grid.log_side() });
    }
    let s = 1usize << level;
    let ax = axis_extents(grid, x[0], s);
    let ay = if grid.dim() == 2 { axis_extents(grid, x[1], s) } else { vec![(0, 0)] };
    let mut count = 0;
    for &(ylo, yhi) in &ay {
        if !t.contains_sq(ylo) {
            continue;
        }
        for &(xlo, xhi) in &ax {
            if t.contains_sq(xlo + ylo) && !t.contains_sq(xhi + yhi) {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// `|[a0, a1] ∩ [b0, b1]|` for integer intervals.
fn overlap(a: (i64, i64), b: (i64, i64)) -> usize {
    (a.1.min(b.1) - a.0.max(b.0) + 1).max(0) as usize
}

/// `|B(x, t) Δ B(y, t)|` computed row by row.
pub fn ball_symm_diff(grid: &GridSpec, x: Coord, y: Coord, t: Radius) -> Result<usize> {
    check_radius(grid, t)?;
    let shape = BallShape::new(grid.dim(), t);
    let side = grid.side() as i64;
    let d = grid.displacement(x, y);
    let rows = if grid.dim() == 1 { 1 } else { grid.side() };
    let width = |c: usize, row: usize| -> Option<i64> {
        if grid.dim() == 1 {
            return Some(shape.half_widths[0] as i64);
        }
        let dy = grid.displacement([0, c], [0, row])[1].unsigned_abs() as usize;
        shape.half_widths.get(dy).map(|&w| w as i64)
    };
    let mut common = 0;
    for row in 0..rows {
        let (Some(wa), Some(wb)) = (width(x[1], row), width(y[1], row)) else { continue };
        let b = (d[0] - wb, d[0] + wb);
        for shift in [-side, 0, side] {
            common += overlap((shift - wa, shift + wa), b);
        }
    }
    Ok(2 * (shape.count() - common))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellReport {
    /// `sum_{B(x, t')} b`
    pub outer: f64,
    /// `sum_{B(x, t)} b`
    pub inner: f64,
    /// `sum_{B(x, t') \ B(x, t)} b`
    pub shell: f64,
    pub shell_count: usize,
    /// `outer - inner - shell`
    pub residual: f64,
    /// Floating-point tolerance for the residual: a few ulps of `sum |b|` over the outer ball.
    pub tolerance: f64,
}

impl ShellReport {
    pub fn holds(&self) -> bool {
        self.residual.abs() <= self.tolerance
    }
}

/// Discrete derivative identity for nested balls: the difference of the two
/// ball sums equals the sum over the shell between them.
pub fn shell_derivative_check(b: &Field, x: Coord, t: Radius, t_outer: Radius) -> Result<ShellReport> {
    let grid = *b.grid();
    check_radius(&grid, t_outer)?;
    if t >= t_outer {
        return Err(Error::Invalid(format!("shell needs t < t', got {t} and {t_outer}")));
    }
    let vals = b.component(0);
    let centre = grid.index(x);
    let inner_shape = BallShape::new(grid.dim(), t);
    let (mut outer, mut inner, mut shell, mut abs_sum, mut shell_count) = (0.0, 0.0, 0.0, 0.0, 0);
    for o in BallShape::new(grid.dim(), t_outer).offsets() {
        let v = vals[grid.shifted(centre, o)];
        outer += v;
        abs_sum += v.abs();
        if inner_shape.contains(o) {
            inner += v;
        } else {
            shell += v;
            shell_count += 1;
        }
    }
    let residual = outer - inner - shell;
    Ok(ShellReport { outer, inner, shell, shell_count, residual, tolerance: 4.0 * f64::EPSILON * abs_sum })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ball_points;
    use std::collections::BTreeSet;

    fn brute_boundary(grid: &GridSpec, x: Coord, t: Radius, level: u32) -> usize {
        let inside: BTreeSet<usize> = ball_points(grid, x, t).unwrap().into_iter().collect();
        grid.cubes(level)
            .unwrap()
            .iter()
            .filter(|q| {
                let pts = q.points(grid);
                pts.iter().any(|p| inside.contains(p)) && pts.iter().any(|p| !inside.contains(p))
            })
            .count()
    }

    #[test]
    fn boundary_count_matches_enumeration() {
        for dim in [1, 2] {
            let grid = GridSpec::new(dim, 6).unwrap();
            for (x, t, k) in [([3, 7], Radius::integer(5).unwrap(), 2u32), ([0, 0], Radius::new(23, 2).unwrap(), 3), ([63, 40], Radius::new(9, 4).unwrap(), 1)] {
                let x = if dim == 1 { [x[0], 0] } else { x };
                for i in -(k as i32)..=0 {
                    let got = boundary_cube_count(&grid, x, t, k, i).unwrap();
                    assert_eq!(got, brute_boundary(&grid, x, t, (k as i32 + i) as u32), "dim {dim} x {x:?} t {t} k {k} i {i}");
                    if dim == 1 {
                        assert!(got <= 2);
                    }
                }
            }
        }
        let grid = GridSpec::new(2, 6).unwrap();
        assert!(boundary_cube_count(&grid, [0, 0], Radius::integer(4).unwrap(), 2, -3).is_err());
        assert!(boundary_cube_count(&grid, [0, 0], Radius::integer(4).unwrap(), 2, 1).is_err());
    }

    #[test]
    fn symmetric_difference_matches_sets() {
        for dim in [1, 2] {
            let grid = GridSpec::new(dim, 5).unwrap();
            for t in [Radius::integer(1).unwrap(), Radius::new(7, 2).unwrap(), Radius::integer(8).unwrap()] {
                for (x, y) in [([0, 0], [0, 0]), ([0, 0], [1, 0]), ([2, 30], [31, 3]), ([5, 5], [21, 21]), ([0, 0], [16, 16])] {
                    let (x, y) = if dim == 1 { ([x[0], 0], [y[0], 0]) } else { (x, y) };
                    let a: BTreeSet<usize> = ball_points(&grid, x, t).unwrap().into_iter().collect();
                    let b: BTreeSet<usize> = ball_points(&grid, y, t).unwrap().into_iter().collect();
                    let want = a.symmetric_difference(&b).count();
                    assert_eq!(ball_symm_diff(&grid, x, y, t).unwrap(), want, "dim {dim} t {t} x {x:?} y {y:?}");
                }
            }
        }
        let g1 = GridSpec::new(1, 8).unwrap();
        for t in 1..=64u64 {
            assert_eq!(ball_symm_diff(&g1, [10, 0], [11, 0], Radius::integer(t).unwrap()).unwrap(), 2);
        }
    }

    #[test]
    fn shell_identity() {
        let grid = GridSpec::new(2, 5).unwrap();
        let b = Field::from_fn(grid, |c| ((c[0] * 31 + c[1] * 17) % 11) as f64 - 5.0).unwrap();
        let t = Radius::integer(3).unwrap();
        let t2 = Radius::new(27, 8).unwrap();
        let rep = shell_derivative_check(&b, [4, 9], t, t2).unwrap();
        assert_eq!(rep.residual, 0.0);
        assert!(rep.holds());

        let ones = Field::constant(grid, 1.0);
        let rep = shell_derivative_check(&ones, [4, 9], t, t2).unwrap();
        let diff = BallShape::new(2, t2).count() - BallShape::new(2, t).count();
        assert_eq!(rep.shell, diff as f64);
        assert_eq!(rep.shell_count, diff);

        // a delta sitting on the shell moves the difference by exactly one
        let shell_pt = [4 + 3, 9 + 1];
        assert!(!BallShape::new(2, t).contains([3, 1]) && BallShape::new(2, t2).contains([3, 1]));
        let delta = Field::from_fn(grid, |c| if c == shell_pt { 1.0 } else { 0.0 }).unwrap();
        let rep = shell_derivative_check(&delta, [4, 9], t, t2).unwrap();
        assert_eq!(rep.outer - rep.inner, 1.0);
        assert!(shell_derivative_check(&b, [0, 0], t2, t).is_err());
    }
}
