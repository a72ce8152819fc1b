//! Moment-matching fits of (asymmetric) generalized Gaussian distributions.
//!
//! The shape parameter is read off a tabulated grid of the generalized
//! Gaussian ratio `rho(a) = G(2/a)^2 / (G(1/a) G(3/a))`, which is strictly
//! increasing in `a`, so the nearest grid entry is found by bisection.

use std::sync::OnceLock;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Shape grid: `ALPHA_MIN + k * ALPHA_STEP` for `k = 0..ALPHA_STEPS`.
pub const ALPHA_MIN: f64 = 0.2;
pub const ALPHA_MAX: f64 = 10.0;
pub const ALPHA_STEP: f64 = 0.001;
const ALPHA_STEPS: usize = 9801;

/// Smallest sample count accepted by the fits.
pub const MIN_SAMPLES: usize = 16;

/// Shape of grid point `k`, computed from integer thousandths so grid values
/// are reproducible.
pub fn grid_alpha(k: usize) -> f64 {
    (200 + k) as f64 / 1000.0
}

pub fn gg_ratio(alpha: f64) -> f64 {
    let g2 = gamma(2.0 / alpha);
    g2 * g2 / (gamma(1.0 / alpha) * gamma(3.0 / alpha))
}

fn ratio_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| (0..ALPHA_STEPS).map(|k| gg_ratio(grid_alpha(k))).collect())
}

/// Grid shape whose ratio is closest to `target`; ties go to the smaller shape.
pub fn solve_alpha(target: f64) -> f64 {
    let table = ratio_table();
    let upper = table.partition_point(|&r| r < target);
    let best = match upper {
        0 => 0,
        i if i == table.len() => table.len() - 1,
        i => {
            if (table[i - 1] - target).abs() <= (table[i] - target).abs() {
                i - 1
            } else {
                i
            }
        }
    };
    grid_alpha(best)
}

/// Asymmetric generalized Gaussian parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggdFit {
    pub alpha: f64,
    pub sigma_left: f64,
    pub sigma_right: f64,
    /// Mean term `(sigma_r - sigma_l) G(2/a) / G(1/a)`.
    pub eta: f64,
}

/// Symmetric generalized Gaussian parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgdFit {
    pub alpha: f64,
    /// Second moment of the samples.
    pub variance: f64,
}

fn check_len(samples: &[f64]) -> Result<()> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::DegenerateInput(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    Ok(())
}

fn mean_abs_and_square(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let abs = samples.iter().map(|x| x.abs()).sum::<f64>() / n;
    let sq = samples.iter().map(|x| x * x).sum::<f64>() / n;
    (abs, sq)
}

pub fn fit_aggd(samples: &[f64]) -> Result<AggdFit> {
    check_len(samples)?;
    let (mut left_sq, mut left_n, mut right_sq, mut right_n) = (0.0, 0usize, 0.0, 0usize);
    for &x in samples {
        if x < 0.0 {
            left_sq += x * x;
            left_n += 1;
        } else if x > 0.0 {
            right_sq += x * x;
            right_n += 1;
        }
    }
    if left_n == 0 || right_n == 0 {
        return Err(Error::DegenerateInput(
            "samples must take both signs to fit an asymmetric generalized Gaussian".into(),
        ));
    }
    let sigma_left = (left_sq / left_n as f64).sqrt();
    let sigma_right = (right_sq / right_n as f64).sqrt();
    let g = sigma_left / sigma_right;
    let (abs, sq) = mean_abs_and_square(samples);
    let r_hat = abs * abs / sq;
    let big_r = r_hat * (g * g * g + 1.0) * (g + 1.0) / ((g * g + 1.0) * (g * g + 1.0));
    let alpha = solve_alpha(big_r);
    let eta = (sigma_right - sigma_left) * gamma(2.0 / alpha) / gamma(1.0 / alpha);
    Ok(AggdFit {
        alpha,
        sigma_left,
        sigma_right,
        eta,
    })
}

pub fn fit_ggd(samples: &[f64]) -> Result<GgdFit> {
    check_len(samples)?;
    let (abs, sq) = mean_abs_and_square(samples);
    if sq == 0.0 {
        return Err(Error::DegenerateInput("all samples are zero".into()));
    }
    Ok(GgdFit {
        alpha: solve_alpha(abs * abs / sq),
        variance: sq,
    })
}
