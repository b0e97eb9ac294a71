//! Ergodic averages `A_t f(x)` over balls or cubes, short variations and
//! their smoothed square function, and the single-scale variation operators
//! `R_k` with their smoothed `l^r` aggregate.

mod geometry;
mod kernel;

pub use geometry::{ball_symm_diff, boundary_cube_count, shell_derivative_check, ShellReport};
pub use kernel::{Kernel, PrefixSums};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{check_radius, BallShape, Field, GridSpec, Radius};
use crate::martingale::cond_expect;
use crate::variation::var_inhom_scalar;

/// Radii `t = 2^k (1 + m/M)`, `m = 0..M`, for `k_min <= k <= k_max`, closed by `2^{k_max+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSet {
    pub k_min: u32,
    pub k_max: u32,
    #[serde(default = "default_refinement")]
    pub refinement: u32,
    #[serde(default)]
    pub kernel: Kernel,
}

fn default_refinement() -> u32 {
    8
}

impl ScaleSet {
    pub fn new(k_min: u32, k_max: u32, refinement: u32, kernel: Kernel) -> Result<Self> {
        let s = ScaleSet { k_min, k_max, refinement, kernel };
        s.check_shape()?;
        Ok(s)
    }

    /// Every level that fits the grid: `k_min = 0`, `2^{k_max+1} = 2^{K-2}`.
    pub fn full(grid: &GridSpec, refinement: u32, kernel: Kernel) -> Result<Self> {
        if grid.log_side() < 3 {
            return Err(Error::Scales("grid too small for any dyadic scale".into()));
        }
        Self::new(0, grid.log_side() - 3, refinement, kernel)
    }

    pub fn single(k: u32, refinement: u32, kernel: Kernel) -> Result<Self> {
        Self::new(k, k, refinement, kernel)
    }

    fn check_shape(&self) -> Result<()> {
        if self.k_min > self.k_max {
            return Err(Error::Scales(format!("k_min {} > k_max {}", self.k_min, self.k_max)));
        }
        if self.refinement < 4 {
            return Err(Error::Scales(format!("refinement must be at least 4, got {}", self.refinement)));
        }
        Ok(())
    }

    /// Checks `2^{k_max+1} <= 2^{K-2}`.
    pub fn check(&self, grid: &GridSpec) -> Result<()> {
        self.check_shape()?;
        if self.k_max + 3 > grid.log_side() {
            return Err(Error::Scales(format!(
                "k_max {} too large for grid with K = {} (need k_max + 3 <= K)",
                self.k_max,
                grid.log_side()
            )));
        }
        Ok(())
    }

    pub fn levels(&self) -> impl Iterator<Item = u32> {
        self.k_min..=self.k_max
    }

    pub fn radii(&self) -> Vec<Radius> {
        let m = self.refinement as u64;
        let mut out = Vec::new();
        for k in self.levels() {
            for j in 0..m {
                out.push(Radius::new((1u64 << k) * (m + j), m).expect("positive"));
            }
        }
        out.push(Radius::integer(1u64 << (self.k_max + 1)).expect("positive"));
        out
    }

    /// Indices into [`ScaleSet::radii`] of level `k`, both endpoints included.
    pub fn level_range(&self, k: u32) -> Result<std::ops::RangeInclusive<usize>> {
        if k < self.k_min || k > self.k_max {
            return Err(Error::LevelNotInScales(k));
        }
        let start = ((k - self.k_min) * self.refinement) as usize;
        Ok(start..=start + self.refinement as usize)
    }
}

fn kernel_size(grid: &GridSpec, t: Radius, kernel: Kernel) -> usize {
    match kernel {
        Kernel::Ball => BallShape::new(grid.dim(), t).count(),
        Kernel::Cube => (2 * t.floor() as usize + 1).pow(grid.dim() as u32),
    }
}

fn average_slice(grid: &GridSpec, ps: &PrefixSums, t: Radius, kernel: Kernel) -> Vec<f64> {
    let size = kernel_size(grid, t, kernel) as f64;
    match kernel {
        Kernel::Ball => {
            let shape = BallShape::new(grid.dim(), t);
            (0..grid.len()).map(|x| ps.ball_sum(x, &shape) / size).collect()
        }
        Kernel::Cube => {
            let h = t.floor() as usize;
            (0..grid.len()).map(|x| ps.cube_sum(x, h) / size).collect()
        }
    }
}

/// `A_t f`: pointwise mean over the kernel of radius `t`, per component.
pub fn ergodic_avg(f: &Field, t: Radius, kernel: Kernel) -> Result<Field> {
    let grid = *f.grid();
    check_radius(&grid, t)?;
    let mut values = Vec::with_capacity(f.values().len());
    for c in f.components() {
        let ps = PrefixSums::new(grid, c);
        values.extend(average_slice(&grid, &ps, t, kernel));
    }
    Field::with_family(grid, f.family_size(), values)
}

/// `A_t f` for every radius of a [`ScaleSet`].
#[derive(Debug, Clone)]
pub struct AvgStack {
    pub scales: ScaleSet,
    pub radii: Vec<Radius>,
    pub slices: Vec<Field>,
    pub source: Field,
}

impl AvgStack {
    /// The path `t -> A_t f_comp(x)` over the radius indices in `range`.
    pub fn path_at(&self, x: usize, comp: usize, range: std::ops::RangeInclusive<usize>) -> Vec<f64> {
        range.map(|m| self.slices[m].component(comp)[x]).collect()
    }

    pub fn grid(&self) -> &GridSpec {
        self.source.grid()
    }

    pub fn full_range(&self) -> std::ops::RangeInclusive<usize> {
        0..=self.radii.len() - 1
    }
}

pub fn avg_stack(f: &Field, scales: &ScaleSet) -> Result<AvgStack> {
    let grid = *f.grid();
    scales.check(&grid)?;
    let radii = scales.radii();
    let prefix: Vec<PrefixSums> = f.components().map(|c| PrefixSums::new(grid, c)).collect();
    let slices = radii
        .par_iter()
        .map(|&t| {
            let values: Vec<f64> = prefix.iter().flat_map(|ps| average_slice(&grid, ps, t, scales.kernel)).collect();
            Field::with_family(grid, f.family_size(), values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AvgStack { scales: *scales, radii, slices, source: f.clone() })
}

fn pointwise<F>(grid: GridSpec, f: F) -> Field
where
    F: Fn(usize, &mut Vec<f64>, &mut Vec<f64>) -> f64 + Sync,
{
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map_init(|| (Vec::new(), Vec::new()), |(path, scratch), x| f(x, path, scratch))
        .collect();
    Field::new(grid, values).expect("finite pointwise values")
}

/// `S_k f(x) = V^2(A_t f(x) - E_k f(x) : 2^k <= t <= 2^{k+1})` for component 0.
pub fn short_variation(stack: &AvgStack, k: u32) -> Result<Field> {
    let range = stack.scales.level_range(k)?;
    let grid = *stack.grid();
    let ek = cond_expect(&stack.source.scalar_component(0), k)?;
    let ekv = ek.values();
    Ok(pointwise(grid, |x, path, scratch| {
        path.clear();
        path.extend(range.clone().map(|m| stack.slices[m].component(0)[x] - ekv[x]));
        var_inhom_scalar(path, 2.0, scratch)
    }))
}

/// `sup_{y in 3Q_k(x)} g(y)`: per-cube maxima spread to the `3^d` neighbouring cubes.
pub fn smooth_3q(g: &Field, k: u32) -> Result<Field> {
    let grid = *g.grid();
    if k > grid.log_side() {
        return Err(Error::LevelOutOfRange { level: k as i64, max: grid.log_side() });
    }
    let per_axis = grid.side() >> k;
    let mut block = vec![f64::NEG_INFINITY; grid.cube_count(k)];
    for (x, &v) in g.component(0).iter().enumerate() {
        let c = grid.cube_index(x, k);
        block[c] = block[c].max(v);
    }
    let rows = if grid.dim() == 1 { 1 } else { per_axis };
    let mut spread = vec![f64::NEG_INFINITY; block.len()];
    for cy in 0..rows {
        for cx in 0..per_axis {
            let mut m = f64::NEG_INFINITY;
            let dys: &[i64] = if grid.dim() == 1 { &[0] } else { &[-1, 0, 1] };
            for &dy in dys {
                for dx in [-1i64, 0, 1] {
                    let nx = (cx as i64 + dx).rem_euclid(per_axis as i64) as usize;
                    let ny = (cy as i64 + dy).rem_euclid(rows as i64) as usize;
                    m = m.max(block[nx + per_axis * ny]);
                }
            }
            spread[cx + per_axis * cy] = m;
        }
    }
    Field::new(grid, (0..grid.len()).map(|x| spread[grid.cube_index(x, k)]).collect())
}

/// `S~_k f = sup_{3Q_k(x)} S_k f`.
pub fn smoothed_short_variation(sv: &Field, k: u32) -> Result<Field> {
    smooth_3q(sv, k)
}

/// `S~f = (sum_k (S~_k f)^2)^{1/2}` over the levels of an existing stack.
pub fn square_function_from_stack(stack: &AvgStack) -> Result<Field> {
    let grid = *stack.grid();
    let mut acc = vec![0.0; grid.len()];
    for k in stack.scales.levels() {
        let s = smoothed_short_variation(&short_variation(stack, k)?, k)?;
        for (a, v) in acc.iter_mut().zip(s.values()) {
            *a += v * v;
        }
    }
    Field::new(grid, acc.into_iter().map(f64::sqrt).collect())
}

pub fn square_function(f: &Field, scales: &ScaleSet) -> Result<Field> {
    square_function_from_stack(&avg_stack(&f.scalar_component(0), scales)?)
}

fn check_open_r(r: f64) -> Result<()> {
    if !(r > 1.0 && r.is_finite()) {
        return Err(Error::Exponent { constraint: "1 < r < inf", value: r });
    }
    Ok(())
}

/// `R_k b(x) = V^r(A_t b(x) : t in [2^k, 2^{k+1}])` (inhomogeneous), component `comp`.
pub fn rk_operator(stack: &AvgStack, k: u32, r: f64, comp: usize) -> Result<Field> {
    check_open_r(r)?;
    let range = stack.scales.level_range(k)?;
    let grid = *stack.grid();
    Ok(pointwise(grid, |x, path, scratch| {
        path.clear();
        path.extend(range.clone().map(|m| stack.slices[m].component(comp)[x]));
        var_inhom_scalar(path, r, scratch)
    }))
}

/// `frak_r_k b = sup_{3Q_k(x)} R_k b`.
pub fn frak_r_k(stack: &AvgStack, k: u32, r: f64, comp: usize) -> Result<Field> {
    smooth_3q(&rk_operator(stack, k, r, comp)?, k)
}

/// `frak_r b = (sum_k (frak_r_k b)^r)^{1/r}` over the stack's levels.
pub fn frak_r_from_stack(stack: &AvgStack, r: f64, comp: usize) -> Result<Field> {
    check_open_r(r)?;
    let grid = *stack.grid();
    let mut acc = vec![0.0; grid.len()];
    for k in stack.scales.levels() {
        let s = frak_r_k(stack, k, r, comp)?;
        for (a, v) in acc.iter_mut().zip(s.values()) {
            *a += v.powf(r);
        }
    }
    Field::new(grid, acc.into_iter().map(|v| v.powf(1.0 / r)).collect())
}

pub fn frak_r(b: &Field, r: f64, scales: &ScaleSet) -> Result<Field> {
    frak_r_from_stack(&avg_stack(&b.scalar_component(0), scales)?, r, 0)
}

/// Inhomogeneous `V^r(A_t f_comp(x) : t in scales)` over the whole stack.
pub fn full_variation(stack: &AvgStack, r: f64, comp: usize) -> Result<Field> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::Exponent { constraint: "1 <= r < inf", value: r });
    }
    let range = stack.full_range();
    let grid = *stack.grid();
    Ok(pointwise(grid, |x, path, scratch| {
        path.clear();
        path.extend(range.clone().map(|m| stack.slices[m].component(comp)[x]));
        var_inhom_scalar(path, r, scratch)
    }))
}
