//! Plane-level filtering primitives shared by transforms and metrics.
//!
//! Planes are row-major `&[f64]` slices with explicit width/height. Borders
//! use half-sample symmetric reflection (`d c b a | a b c d | d c b a`),
//! extended periodically so any offset is valid, even for kernels wider than
//! the image.

/// Maps an out-of-range index into `0..n` by symmetric reflection.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

/// Normalized 1-D Gaussian taps over `[-radius, radius]`.
pub(crate) fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Radius `ceil(3 sigma)` used by every Gaussian smoothing step.
pub(crate) fn gaussian_radius(sigma: f64) -> usize {
    (3.0 * sigma).ceil() as usize
}

/// Separable same-size convolution with reflected borders.
pub(crate) fn convolve_separable(plane: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = kernel.len() / 2;
    let ri = r as isize;

    let mut tmp = vec![0.0; w * h];
    let mut padded = vec![0.0; w + 2 * r];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for (i, p) in padded.iter_mut().enumerate() {
            *p = row[reflect(i as isize - ri, w)];
        }
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .zip(&padded[x..x + 2 * r + 1])
                .map(|(k, v)| k * v)
                .sum();
        }
    }

    let mut out = vec![0.0; w * h];
    let rows: Vec<usize> = (0..h + 2 * r)
        .map(|i| reflect(i as isize - ri, h))
        .collect();
    for y in 0..h {
        let out_row = &mut out[y * w..(y + 1) * w];
        for (k, &src_y) in kernel.iter().zip(&rows[y..y + 2 * r + 1]) {
            let src = &tmp[src_y * w..(src_y + 1) * w];
            for (o, s) in out_row.iter_mut().zip(src) {
                *o += k * s;
            }
        }
    }
    out
}

pub(crate) fn gaussian_blur(plane: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma, gaussian_radius(sigma));
    convolve_separable(plane, w, h, &kernel)
}

/// Separable convolution restricted to positions where the kernel lies fully
/// inside the plane. Returns the output plane and its width and height.
pub(crate) fn convolve_valid(
    plane: &[f64],
    w: usize,
    h: usize,
    kernel: &[f64],
) -> (Vec<f64>, usize, usize) {
    let k = kernel.len();
    let (ow, oh) = (w + 1 - k, h + 1 - k);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = kernel.iter().zip(&row[x..x + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        let out_row = &mut out[y * ow..(y + 1) * ow];
        for (i, kv) in kernel.iter().enumerate() {
            let src = &tmp[(y + i) * ow..(y + i + 1) * ow];
            for (o, s) in out_row.iter_mut().zip(src) {
                *o += kv * s;
            }
        }
    }
    (out, ow, oh)
}

fn rank_filter(
    plane: &[f64],
    w: usize,
    h: usize,
    radius: usize,
    pick: fn(f64, f64) -> f64,
) -> Vec<f64> {
    let r = radius as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            let xi = x as isize;
            tmp[y * w + x] = (xi - r..=xi + r)
                .map(|i| row[reflect(i, w)])
                .reduce(pick)
                .unwrap_or(row[x]);
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let yi = y as isize;
        for x in 0..w {
            out[y * w + x] = (yi - r..=yi + r)
                .map(|j| tmp[reflect(j, h) * w + x])
                .reduce(pick)
                .unwrap_or(tmp[y * w + x]);
        }
    }
    out
}

/// Minimum over a `(2r+1)^2` square window.
pub(crate) fn min_filter(plane: &[f64], w: usize, h: usize, radius: usize) -> Vec<f64> {
    rank_filter(plane, w, h, radius, f64::min)
}

/// Maximum over a `(2r+1)^2` square window.
pub(crate) fn max_filter(plane: &[f64], w: usize, h: usize, radius: usize) -> Vec<f64> {
    rank_filter(plane, w, h, radius, f64::max)
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
