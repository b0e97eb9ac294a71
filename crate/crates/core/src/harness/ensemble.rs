use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Field, GridSpec};
use crate::martingale::mart_decompose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    /// Independent standard normal values.
    #[default]
    GaussianField,
    /// About one nonzero value in 64, amplitudes `±[1, 10)`.
    SparseSpikes,
    /// `sum_m ±2^{-m/2} 1_{Q_m}` with one random dyadic block per level.
    Lacunary,
    /// Martingale differences of white noise with Gaussian per-cube gains.
    HaarNoise,
    /// Three Gaussian bumps of random width.
    SmoothBump,
    /// A random nonzero constant.
    Constant,
}

impl Generator {
    pub const ALL: [Generator; 6] = [
        Generator::GaussianField,
        Generator::SparseSpikes,
        Generator::Lacunary,
        Generator::HaarNoise,
        Generator::SmoothBump,
        Generator::Constant,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Generator::GaussianField => "gaussian-field",
            Generator::SparseSpikes => "sparse-spikes",
            Generator::Lacunary => "lacunary",
            Generator::HaarNoise => "haar-noise",
            Generator::SmoothBump => "smooth-bump",
            Generator::Constant => "constant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    #[serde(default)]
    pub generator: Generator,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "one")]
    pub family_size: usize,
    /// Defaults to the run seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_count() -> usize {
    16
}

fn one() -> usize {
    1
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec { generator: Generator::default(), count: 16, family_size: 1, seed: None }
    }
}

/// A seed for trial `index` derived from the ensemble seed (SplitMix64 finaliser).
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn component(gen: Generator, grid: &GridSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = grid.len();
    match gen {
        Generator::GaussianField => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        Generator::SparseSpikes => {
            let mut v = vec![0.0; n];
            for _ in 0..(n / 64).max(1) {
                let at = rng.random_range(0..n);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                v[at] = sign * rng.random_range(1.0..10.0);
            }
            v
        }
        Generator::Lacunary => {
            let mut v = vec![0.0; n];
            for m in 0..grid.log_side() {
                let q = rng.random_range(0..grid.cube_count(m));
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let amp = sign * 2f64.powf(-(m as f64) / 2.0);
                for (x, val) in v.iter_mut().enumerate() {
                    if grid.cube_index(x, m) == q {
                        *val += amp;
                    }
                }
            }
            v
        }
        Generator::HaarNoise => {
            let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let dec = mart_decompose(&Field::new(*grid, noise).expect("finite noise"));
            let mut v = vec![0.0; n];
            for (k, d) in dec.diffs.iter().enumerate() {
                let lvl = k as u32 + 1;
                let gains: Vec<f64> = (0..grid.cube_count(lvl)).map(|_| rng.sample(StandardNormal)).collect();
                for (x, val) in v.iter_mut().enumerate() {
                    *val += gains[grid.cube_index(x, lvl)] * d.values()[x];
                }
            }
            v
        }
        Generator::SmoothBump => {
            let mut v = vec![0.0; n];
            let side = grid.side() as f64;
            for _ in 0..3 {
                let centre = [rng.random_range(0..grid.side()), if grid.dim() == 2 { rng.random_range(0..grid.side()) } else { 0 }];
                let sigma = rng.random_range(2.0..(side / 8.0).max(2.5));
                let amp = if rng.random_bool(0.5) { 1.0 } else { -1.0 } * rng.random_range(0.5..1.5);
                for (x, val) in v.iter_mut().enumerate() {
                    let d = grid.displacement(centre, grid.coords(x));
                    let r2 = (d[0] * d[0] + d[1] * d[1]) as f64;
                    *val += amp * (-r2 / (2.0 * sigma * sigma)).exp();
                }
            }
            v
        }
        Generator::Constant => {
            let c = rng.random_range(0.5..2.0);
            vec![c; n]
        }
    }
}

/// The field of one trial; depends only on `(generator, grid, family_size, seed)`.
pub fn make_trial(gen: Generator, grid: GridSpec, family_size: usize, seed: u64) -> Result<Field> {
    if family_size == 0 {
        return Err(Error::Invalid("family size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = (0..family_size).map(|_| component(gen, &grid, &mut rng)).collect();
    Field::from_components(grid, comps)
}

/// `(trial seed, field)` for every member of the ensemble.
pub fn make_ensemble(spec: &EnsembleSpec, grid: GridSpec, default_seed: u64) -> Result<Vec<(u64, Field)>> {
    let seed = spec.seed.unwrap_or(default_seed);
    (0..spec.count as u64)
        .map(|i| {
            let s = trial_seed(seed, i);
            Ok((s, make_trial(spec.generator, grid, spec.family_size, s)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_counted() {
        let grid = GridSpec::new(2, 5).unwrap();
        for gen in Generator::ALL {
            let spec = EnsembleSpec { generator: gen, count: 3, family_size: 2, seed: Some(7) };
            let a = make_ensemble(&spec, grid, 0).unwrap();
            let b = make_ensemble(&spec, grid, 0).unwrap();
            assert_eq!(a.len(), 3);
            for ((sa, fa), (sb, fb)) in a.iter().zip(&b) {
                assert_eq!(sa, sb);
                assert_eq!(fa.family_size(), 2);
                let bits_a: Vec<u64> = fa.values().iter().map(|v| v.to_bits()).collect();
                let bits_b: Vec<u64> = fb.values().iter().map(|v| v.to_bits()).collect();
                assert_eq!(bits_a, bits_b);
            }
            assert_ne!(a[0].1, a[1].1, "{}", gen.label());
        }
    }

    #[test]
    fn gaussian_mean_is_centred() {
        let grid = GridSpec::new(1, 14).unwrap();
        let f = make_trial(Generator::GaussianField, grid, 1, 3).unwrap();
        let n = grid.len() as f64;
        assert!(f.mean().abs() <= 5.0 / n.sqrt());
    }

    #[test]
    fn labels_round_trip() {
        for gen in Generator::ALL {
            let s = serde_json::to_string(&gen).unwrap();
            assert_eq!(s, format!("\"{}\"", gen.label()));
        }
    }
}
