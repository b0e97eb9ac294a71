use serde::{Deserialize, Serialize};

use crate::lattice::{BallShape, GridSpec};

/// Averaging kernel: closed Euclidean ball or axis-parallel cube `[-t, t]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Ball,
    Cube,
}

/// Periodic prefix sums of one scalar slice.
///
/// In dimension two each row carries its own prefix array, so a ball sum
/// costs one lookup pair per row; cube sums use a summed-area table.
pub struct PrefixSums {
    grid: GridSpec,
    rows: Vec<f64>,
    table: Vec<f64>,
}

impl PrefixSums {
    pub fn new(grid: GridSpec, values: &[f64]) -> Self {
        let side = grid.side();
        let nrows = if grid.dim() == 1 { 1 } else { side };
        let stride = side + 1;
        let mut rows = vec![0.0; nrows * stride];
        for y in 0..nrows {
            let base = y * stride;
            for x in 0..side {
                rows[base + x + 1] = rows[base + x] + values[x + y * side];
            }
        }
        let table = if grid.dim() == 2 {
            let mut t = vec![0.0; stride * stride];
            for y in 0..side {
                for x in 0..=side {
                    t[(y + 1) * stride + x] = t[y * stride + x] + rows[y * stride + x];
                }
            }
            t
        } else {
            Vec::new()
        };
        PrefixSums { grid, rows, table }
    }

    /// Sum over `x - w ..= x + w` in row `y`, wrapping; requires `2w + 1 <= side`.
    #[inline]
    pub fn row_segment(&self, y: usize, x: usize, w: usize) -> f64 {
        let side = self.grid.side();
        let base = y * (side + 1);
        let lo = (x + side - w % side) % side;
        let hi = lo + 2 * w + 1;
        if hi <= side {
            self.rows[base + hi] - self.rows[base + lo]
        } else {
            (self.rows[base + side] - self.rows[base + lo]) + self.rows[base + hi - side]
        }
    }

    pub fn ball_sum(&self, idx: usize, shape: &BallShape) -> f64 {
        let c = self.grid.coords(idx);
        if self.grid.dim() == 1 {
            return self.row_segment(0, c[0], shape.half_widths[0] as usize);
        }
        let side = self.grid.side();
        let mut s = self.row_segment(c[1], c[0], shape.half_widths[0] as usize);
        for (dy, &w) in shape.half_widths.iter().enumerate().skip(1) {
            let up = (c[1] + dy) % side;
            let down = (c[1] + side - dy % side) % side;
            s += self.row_segment(up, c[0], w as usize) + self.row_segment(down, c[0], w as usize);
        }
        s
    }

    /// Sum over the axis-parallel cube of half-width `h` centred at `idx`.
    pub fn cube_sum(&self, idx: usize, h: usize) -> f64 {
        let c = self.grid.coords(idx);
        if self.grid.dim() == 1 {
            return self.row_segment(0, c[0], h);
        }
        let side = self.grid.side();
        let lo = |v: usize| (v + side - h % side) % side;
        self.box_sum([lo(c[0]), lo(c[1])], 2 * h + 1)
    }

    /// Sum over the cube with lower corner `corner` and side `len <= side`, wrapping.
    pub fn box_sum(&self, corner: [usize; 2], len: usize) -> f64 {
        let side = self.grid.side();
        let xs = split_interval(corner[0], len, side);
        if self.grid.dim() == 1 {
            return xs.iter().flatten().map(|&(x0, x1)| self.rows[x1] - self.rows[x0]).sum();
        }
        let ys = split_interval(corner[1], len, side);
        let stride = side + 1;
        let rect = |x0: usize, x1: usize, y0: usize, y1: usize| {
            self.table[y1 * stride + x1] - self.table[y0 * stride + x1] - self.table[y1 * stride + x0] + self.table[y0 * stride + x0]
        };
        let mut s = 0.0;
        for &(y0, y1) in ys.iter().flatten() {
            for &(x0, x1) in xs.iter().flatten() {
                s += rect(x0, x1, y0, y1);
            }
        }
        s
    }
}

/// `[lo, lo + len)` on the circle as at most two half-open pieces.
fn split_interval(lo: usize, len: usize, side: usize) -> [Option<(usize, usize)>; 2] {
    let hi = lo + len;
    if hi <= side {
        [Some((lo, hi)), None]
    } else {
        [Some((lo, side)), Some((0, hi - side))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Radius;

    #[test]
    fn sums_match_direct_enumeration() {
        for dim in [1, 2] {
            let grid = GridSpec::new(dim, 4).unwrap();
            let vals: Vec<f64> = (0..grid.len()).map(|i| ((i * 7919) % 23) as f64 - 11.0).collect();
            let ps = PrefixSums::new(grid, &vals);
            for t in [Radius::integer(1).unwrap(), Radius::new(5, 2).unwrap(), Radius::integer(4).unwrap()] {
                let shape = BallShape::new(dim, t);
                for idx in [0, 5, grid.len() - 1] {
                    let direct: f64 = shape.offsets().iter().map(|&o| vals[grid.shifted(idx, o)]).sum();
                    assert_eq!(ps.ball_sum(idx, &shape), direct);
                }
            }
            for h in [0usize, 1, 3, 7] {
                for idx in [0, 9, grid.len() - 2] {
                    let mut direct = 0.0;
                    let span = h as i64;
                    for dy in if dim == 1 { 0..=0 } else { -span..=span } {
                        for dx in -span..=span {
                            direct += vals[grid.shifted(idx, [dx, dy])];
                        }
                    }
                    assert_eq!(ps.cube_sum(idx, h), direct, "dim {dim} h {h} idx {idx}");
                    let corner = grid.coords(grid.shifted(idx, [-span, if dim == 1 { 0 } else { -span }]));
                    assert_eq!(ps.box_sum(corner, 2 * h + 1), direct);
                }
            }
        }
    }
}
