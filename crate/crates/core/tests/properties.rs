//! Randomised invariants of the public operators.

use proptest::prelude::*;
use varlab::averages::{square_function, Kernel, ScaleSet};
use varlab::lattice::{BallShape, Field, GridSpec, Radius};
use varlab::martingale::{cond_expect, mart_decompose};
use varlab::variation::{hvar_bruteforce, hvar_exact, jump_bruteforce, jump_count, SampledPath};

fn path(v: Vec<f64>) -> SampledPath {
    SampledPath::from_values(v).unwrap()
}

/// Small integers make ties between increments common.
fn tied_values(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-4i32..=4).prop_map(f64::from), 1..=max_len)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn hvar_matches_brute_force(v in prop::collection::vec(-10.0f64..10.0, 1..=10), r in 1.0f64..6.0) {
        let p = path(v);
        prop_assert!(close(hvar_exact(&p, r).unwrap().value, hvar_bruteforce(&p, r).unwrap(), 1e-10));
    }

    #[test]
    fn jump_count_matches_brute_force_with_ties(v in tied_values(11), lam in prop::sample::select(vec![0.5, 1.0, 2.0, 3.0, 4.5])) {
        let p = path(v);
        prop_assert_eq!(jump_count(&p, lam).unwrap().count, jump_bruteforce(&p, lam).unwrap());
    }

    #[test]
    fn jumps_are_controlled_by_variation(v in prop::collection::vec(-10.0f64..10.0, 2..=40), lam in 0.01f64..5.0, r in 1.0f64..4.0) {
        let p = path(v);
        let n = jump_count(&p, lam).unwrap().count as f64;
        let hv = hvar_exact(&p, r).unwrap().value;
        prop_assert!(lam * n.powf(1.0 / r) <= hv * (1.0 + 1e-12));
    }

    #[test]
    fn hvar_nonincreasing_in_r(v in prop::collection::vec(-10.0f64..10.0, 2..=40), r in 1.0f64..4.0, dr in 0.0f64..3.0) {
        let p = path(v);
        prop_assert!(hvar_exact(&p, r + dr).unwrap().value <= hvar_exact(&p, r).unwrap().value * (1.0 + 1e-12));
    }

    #[test]
    fn hvar_is_positively_homogeneous(v in prop::collection::vec(-10.0f64..10.0, 2..=30), c in -8.0f64..8.0) {
        let scaled = path(v.iter().map(|x| c * x).collect());
        let base = hvar_exact(&path(v), 2.5).unwrap().value;
        prop_assert!(close(hvar_exact(&scaled, 2.5).unwrap().value, c.abs() * base, 1e-12));
    }

    #[test]
    fn martingale_tower_and_reconstruction(v in prop::collection::vec(-5.0f64..5.0, 64), j in 0u32..=6, k in 0u32..=6) {
        let f = Field::new(GridSpec::new(1, 6).unwrap(), v).unwrap();
        let (lo, hi) = (j.min(k), j.max(k));
        let tower = cond_expect(&cond_expect(&f, lo).unwrap(), hi).unwrap();
        let direct = cond_expect(&f, hi).unwrap();
        for (a, b) in tower.values().iter().zip(direct.values()) {
            prop_assert!(close(*a, *b, 1e-12));
        }
        let back = mart_decompose(&f).reconstruct();
        for (a, b) in back.values().iter().zip(f.values()) {
            prop_assert!(close(*a, *b, 1e-12));
        }
    }

    #[test]
    fn ball_counts_grow_with_radius(num in 1u64..200, den in 1u64..8, extra in 0u64..50) {
        let t = Radius::new(num, den).unwrap();
        let u = Radius::new(num + extra, den).unwrap();
        for dim in [1, 2] {
            prop_assert!(BallShape::new(dim, t).count() <= BallShape::new(dim, u).count());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn square_function_scales_linearly(v in prop::collection::vec(-5.0f64..5.0, 256), c in -4.0f64..4.0) {
        let grid = GridSpec::new(1, 8).unwrap();
        let scales = ScaleSet::full(&grid, 4, Kernel::Ball).unwrap();
        let f = Field::new(grid, v.clone()).unwrap();
        let g = Field::new(grid, v.iter().map(|x| c * x).collect()).unwrap();
        let sf = square_function(&f, &scales).unwrap();
        let sg = square_function(&g, &scales).unwrap();
        for (a, b) in sg.values().iter().zip(sf.values()) {
            prop_assert!(close(*a, c.abs() * b, 1e-10));
        }
    }
}
