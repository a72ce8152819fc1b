//! Structural similarity on luma with an 11x11 Gaussian window.

use crate::error::{Error, Result};
use crate::filter::{convolve_valid, gaussian_kernel};
use crate::image::Image;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
/// `(0.01 * L)^2` and `(0.03 * L)^2` with dynamic range `L = 1`.
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Mean local SSIM over every window position fully inside the image.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    let (a, b) = (a.to_luma(), b.to_luma());
    a.ensure_same_shape(&b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Dimension(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let kernel = gaussian_kernel(SSIM_SIGMA, SSIM_WINDOW / 2);
    let (x, y) = (a.data(), b.data());
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();

    let blur = |p: &[f64]| convolve_valid(p, w, h, &kernel).0;
    let (mu_x, mu_y) = (blur(x), blur(y));
    let (e_xx, e_yy, e_xy) = (blur(&xx), blur(&yy), blur(&xy));

    let n = mu_x.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2))
        })
        .sum();
    Ok(total / n as f64)
}
