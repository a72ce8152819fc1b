//! Fast noise standard-deviation estimate from a Laplacian-difference mask.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::image::Image;

/// Estimated noise standard deviation (intensity units) of the luma plane:
/// `sqrt(pi/2) / (6 (W-2)(H-2)) * sum |I * N|` over the valid region, with
/// `N = [[1,-2,1],[-2,4,-2],[1,-2,1]]`. The mask annihilates affine signals.
pub fn noise_sigma(image: &Image) -> Result<f64> {
    let luma = image.to_luma();
    let (w, h) = (luma.width(), luma.height());
    if w < 3 || h < 3 {
        return Err(Error::Dimension(format!(
            "noise estimate needs at least 3x3, got {w}x{h}"
        )));
    }
    let p = luma.data();
    let mut total = 0.0;
    for y in 1..h - 1 {
        let (up, mid, down) = (
            &p[(y - 1) * w..y * w],
            &p[y * w..(y + 1) * w],
            &p[(y + 1) * w..(y + 2) * w],
        );
        for x in 1..w - 1 {
            let r = (up[x - 1] + up[x + 1] + down[x - 1] + down[x + 1])
                - 2.0 * (up[x] + down[x] + mid[x - 1] + mid[x + 1])
                + 4.0 * mid[x];
            total += r.abs();
        }
    }
    Ok((PI / 2.0).sqrt() * total / (6.0 * (w - 2) as f64 * (h - 2) as f64))
}
