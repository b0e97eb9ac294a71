//! The `r`-variation Sobolev bound `hV^r(a) <= 8 ||a||_r^{1-1/r} ||a'||_r^{1/r}`
//! checked on a catalogue of analytic test functions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{hvar_estimate, SampledPath};
use crate::error::{Error, Result};

/// Closed-form test functions with their derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticFn {
    /// `sum_k c_k t^k`
    Polynomial { coeffs: Vec<f64> },
    /// `amp * sin(2 pi freq t + phase)`
    Sinusoid { amp: f64, freq: f64, phase: f64 },
    /// `amp * exp(-decay t) * sin(omega t + phase)`
    Damped { amp: f64, decay: f64, omega: f64, phase: f64 },
    /// `amp * sin(rate t^2)`
    Chirp { amp: f64, rate: f64 },
    /// Sum of the above.
    Sum { terms: Vec<AnalyticFn> },
}

impl AnalyticFn {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            AnalyticFn::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
            AnalyticFn::Sinusoid { amp, freq, phase } => amp * (2.0 * PI * freq * t + phase).sin(),
            AnalyticFn::Damped { amp, decay, omega, phase } => amp * (-decay * t).exp() * (omega * t + phase).sin(),
            AnalyticFn::Chirp { amp, rate } => amp * (rate * t * t).sin(),
            AnalyticFn::Sum { terms } => terms.iter().map(|f| f.value(t)).sum(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            AnalyticFn::Polynomial { coeffs } => {
                coeffs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, c)| acc * t + k as f64 * c)
            }
            AnalyticFn::Sinusoid { amp, freq, phase } => {
                let w = 2.0 * PI * freq;
                amp * w * (w * t + phase).cos()
            }
            AnalyticFn::Damped { amp, decay, omega, phase } => {
                let e = (-decay * t).exp();
                amp * e * (omega * (omega * t + phase).cos() - decay * (omega * t + phase).sin())
            }
            AnalyticFn::Chirp { amp, rate } => amp * 2.0 * rate * t * (rate * t * t).cos(),
            AnalyticFn::Sum { terms } => terms.iter().map(|f| f.derivative(t)).sum(),
        }
    }
}

/// The fixed test catalogue: polynomials, sinusoids and damped oscillations.
pub fn catalog() -> Vec<(&'static str, AnalyticFn)> {
    vec![
        ("constant", AnalyticFn::Polynomial { coeffs: vec![1.5] }),
        ("linear", AnalyticFn::Polynomial { coeffs: vec![0.0, 1.0] }),
        ("quadratic", AnalyticFn::Polynomial { coeffs: vec![0.0, -1.0, 1.0] }),
        ("cubic", AnalyticFn::Polynomial { coeffs: vec![0.2, 2.0, -6.0, 4.0] }),
        ("sin_8pi", AnalyticFn::Sinusoid { amp: 1.0, freq: 4.0, phase: 0.0 }),
        ("sin_2pi", AnalyticFn::Sinusoid { amp: 2.0, freq: 1.0, phase: 0.3 }),
        (
            "two_tone",
            AnalyticFn::Sum {
                terms: vec![
                    AnalyticFn::Sinusoid { amp: 1.0, freq: 1.0, phase: 0.0 },
                    AnalyticFn::Sinusoid { amp: 0.5, freq: 3.0, phase: 1.0 },
                ],
            },
        ),
        ("damped_slow", AnalyticFn::Damped { amp: 1.0, decay: 3.0, omega: 20.0, phase: 0.0 }),
        ("damped_fast", AnalyticFn::Damped { amp: 0.7, decay: 1.0, omega: 50.0, phase: 0.5 }),
        ("chirp", AnalyticFn::Chirp { amp: 1.0, rate: 60.0 }),
        (
            "bump_plus_wiggle",
            AnalyticFn::Sum {
                terms: vec![
                    AnalyticFn::Polynomial { coeffs: vec![0.0, 4.0, -4.0] },
                    AnalyticFn::Damped { amp: 0.1, decay: 0.0, omega: 200.0, phase: 0.0 },
                ],
            },
        ),
    ]
}

// 8-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// `(int_0^T |g|^r)^{1/r}` by composite 8-point Gauss-Legendre on `panels` panels.
pub fn gauss_legendre_lr_norm(g: impl Fn(f64) -> f64, horizon: f64, r: f64, panels: usize) -> f64 {
    let h = horizon / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        let s: f64 = GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, w)| w * g(mid + 0.5 * h * x).abs().powf(r)).sum();
        total += 0.5 * h * s;
    }
    total.powf(1.0 / r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevReport {
    /// Sampled variation; a lower/upper pair when the path is too long for the exact DP.
    pub lhs_lower: f64,
    pub lhs_upper: f64,
    pub exact: bool,
    pub rhs: f64,
    /// `lhs_upper / rhs` (zero when both sides vanish).
    pub ratio: f64,
    pub norm_a: f64,
    pub norm_da: f64,
}

const QUAD_PANELS: usize = 4096;

/// Samples `a` at `n_samples` uniform points of `[0, T]` and compares its
/// `r`-variation with `8 ||a||_r^{1-1/r} ||a'||_r^{1/r}`.
pub fn sobolev_bound_check(a: &AnalyticFn, horizon: f64, r: f64, n_samples: usize) -> Result<SobolevReport> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::Exponent { constraint: "1 <= r < inf", value: r });
    }
    if !(horizon > 0.0) || n_samples < 2 {
        return Err(Error::Invalid("need T > 0 and at least two samples".into()));
    }
    let times: Vec<f64> = (0..n_samples).map(|i| horizon * i as f64 / (n_samples - 1) as f64).collect();
    let values = times.iter().map(|&t| a.value(t)).collect();
    let path = SampledPath::new(times, values)?;
    let b = hvar_estimate(&path, r)?;
    let norm_a = gauss_legendre_lr_norm(|t| a.value(t), horizon, r, QUAD_PANELS);
    let norm_da = gauss_legendre_lr_norm(|t| a.derivative(t), horizon, r, QUAD_PANELS);
    let rhs = 8.0 * norm_a.powf(1.0 - 1.0 / r) * norm_da.powf(1.0 / r);
    let ratio = if b.upper == 0.0 {
        0.0
    } else if rhs == 0.0 {
        return Err(Error::Invalid("nonzero variation with vanishing Sobolev bound".into()));
    } else {
        b.upper / rhs
    };
    Ok(SobolevReport { lhs_lower: b.lower, lhs_upper: b.upper, exact: b.exact, rhs, ratio, norm_a, norm_da })
}
