//! Denoising filters: median, bilateral, total variation, non-local means and
//! Haar wavelet shrinkage.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::filter::reflect;
use crate::image::Image;

/// Chambolle iterations per call.
pub const TV_ITERATIONS: usize = 50;
/// Dual step size.
pub const TV_STEP: f64 = 0.25;

/// Copies a plane into a buffer padded by `pad` reflected samples per side.
fn pad_plane(plane: &[f64], w: usize, h: usize, pad: usize) -> (Vec<f64>, usize) {
    let pw = w + 2 * pad;
    let p = pad as isize;
    let mut out = Vec::with_capacity(pw * (h + 2 * pad));
    for y in 0..h + 2 * pad {
        let sy = reflect(y as isize - p, h);
        for x in 0..pw {
            out.push(plane[sy * w + reflect(x as isize - p, w)]);
        }
    }
    (out, pw)
}

pub(crate) fn median_plane(plane: &[f64], w: usize, h: usize, radius: usize) -> Vec<f64> {
    let (padded, pw) = pad_plane(plane, w, h, radius);
    let side = 2 * radius + 1;
    let mid = side * side / 2;
    let mut window = Vec::with_capacity(side * side);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            window.clear();
            for dy in 0..side {
                let row = (y + dy) * pw + x;
                window.extend_from_slice(&padded[row..row + side]);
            }
            let (_, m, _) = window.select_nth_unstable_by(mid, f64::total_cmp);
            out.push(*m);
        }
    }
    out
}

pub(crate) fn bilateral_plane(
    plane: &[f64],
    w: usize,
    h: usize,
    sigma_s: f64,
    sigma_r: f64,
) -> Vec<f64> {
    let r = (2.0 * sigma_s).ceil() as usize;
    let side = 2 * r + 1;
    let (padded, pw) = pad_plane(plane, w, h, r);
    let spatial: Vec<f64> = (0..side * side)
        .map(|i| {
            let dx = (i % side) as f64 - r as f64;
            let dy = (i / side) as f64 - r as f64;
            (-(dx * dx + dy * dy) / (2.0 * sigma_s * sigma_s)).exp()
        })
        .collect();
    let range_coef = -1.0 / (2.0 * sigma_r * sigma_r);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let center = plane[y * w + x];
            let (mut num, mut den) = (0.0, 0.0);
            for dy in 0..side {
                let row = &padded[(y + dy) * pw + x..(y + dy) * pw + x + side];
                for (dx, &v) in row.iter().enumerate() {
                    let d = v - center;
                    let wgt = spatial[dy * side + dx] * (range_coef * d * d).exp();
                    num += wgt * v;
                    den += wgt;
                }
            }
            out.push(num / den);
        }
    }
    out
}

/// Chambolle's dual projection for `min_u 1/2 |u - f|^2 + weight * TV(u)`.
pub(crate) fn tv_plane(plane: &[f64], w: usize, h: usize, weight: f64) -> Vec<f64> {
    if weight <= 0.0 {
        return plane.to_vec();
    }
    let n = w * h;
    let (mut px, mut py) = (vec![0.0; n], vec![0.0; n]);
    let mut u = plane.to_vec();
    let ratio = TV_STEP / weight;
    for _ in 0..TV_ITERATIONS {
        // u = f - weight * div p
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let mut div = px[i] + py[i];
                if x > 0 {
                    div -= px[i - 1];
                }
                if y > 0 {
                    div -= py[i - w];
                }
                u[i] = plane[i] - weight * div;
            }
        }
        // p = (p - tau/weight * grad u) / (1 + tau/weight * |grad u|)
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let gx = if x + 1 < w { u[i + 1] - u[i] } else { 0.0 };
                let gy = if y + 1 < h { u[i + w] - u[i] } else { 0.0 };
                let norm = 1.0 + ratio * (gx * gx + gy * gy).sqrt();
                px[i] = (px[i] - ratio * gx) / norm;
                py[i] = (py[i] - ratio * gy) / norm;
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut div = px[i] + py[i];
            if x > 0 {
                div -= px[i - 1];
            }
            if y > 0 {
                div -= py[i - w];
            }
            u[i] = plane[i] - weight * div;
        }
    }
    u
}

/// Total-variation denoising of every channel (normally called on a single
/// channel). `weight = 0` returns the input unchanged.
pub fn tv_denoise(channel: &Image, weight: f64) -> Image {
    let (w, h) = (channel.width(), channel.height());
    channel.map_planes(|p| tv_plane(p, w, h, weight))
}

const NLM_PATCH_RADIUS: usize = 1;
const NLM_SEARCH_RADIUS: usize = 3;

/// Non-local means with 3x3 patches in a 7x7 search window; weights are
/// `exp(-d^2 / h^2)` with `d^2` the mean squared patch difference.
pub(crate) fn nlm_plane(plane: &[f64], w: usize, h: usize, filter_h: f64) -> Vec<f64> {
    let pad = NLM_PATCH_RADIUS + NLM_SEARCH_RADIUS;
    let (padded, pw) = pad_plane(plane, w, h, pad);
    let pr = NLM_PATCH_RADIUS as isize;
    let sr = NLM_SEARCH_RADIUS as isize;
    let patch_len = ((2 * pr + 1) * (2 * pr + 1)) as f64;
    let inv_h2 = 1.0 / (filter_h * filter_h);
    let at = |x: isize, y: isize| padded[y as usize * pw + x as usize];

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (cx, cy) = (x + pad as isize, y + pad as isize);
            let (mut num, mut den) = (0.0, 0.0);
            for sy in -sr..=sr {
                for sx in -sr..=sr {
                    let (qx, qy) = (cx + sx, cy + sy);
                    let mut d2 = 0.0;
                    for oy in -pr..=pr {
                        for ox in -pr..=pr {
                            let d = at(cx + ox, cy + oy) - at(qx + ox, qy + oy);
                            d2 += d * d;
                        }
                    }
                    let wgt = (-(d2 / patch_len) * inv_h2).exp();
                    num += wgt * at(qx, qy);
                    den += wgt;
                }
            }
            out.push(num / den);
        }
    }
    out
}

const WAVELET_LEVELS: usize = 2;

/// Two-level orthonormal Haar transform with soft-thresholded detail bands.
/// Planes are reflect-padded to a multiple of 4 and cropped afterwards.
pub(crate) fn wavelet_plane(plane: &[f64], w: usize, h: usize, threshold: f64) -> Vec<f64> {
    let block = 1 << WAVELET_LEVELS;
    let (pw, ph) = (w.div_ceil(block) * block, h.div_ceil(block) * block);
    let mut buf = Vec::with_capacity(pw * ph);
    for y in 0..ph {
        let sy = reflect(y as isize, h);
        for x in 0..pw {
            buf.push(plane[sy * w + reflect(x as isize, w)]);
        }
    }

    let mut scratch = vec![0.0; pw.max(ph)];
    for level in 0..WAVELET_LEVELS {
        haar_forward(&mut buf, pw, pw >> level, ph >> level, &mut scratch);
    }

    let (aw, ah) = (pw >> WAVELET_LEVELS, ph >> WAVELET_LEVELS);
    for y in 0..ph {
        for x in 0..pw {
            if x < aw && y < ah {
                continue;
            }
            let c = &mut buf[y * pw + x];
            *c = c.signum() * (c.abs() - threshold).max(0.0);
        }
    }

    for level in (0..WAVELET_LEVELS).rev() {
        haar_inverse(&mut buf, pw, pw >> level, ph >> level, &mut scratch);
    }

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        out.extend_from_slice(&buf[y * pw..y * pw + w]);
    }
    out
}

/// One 2-D analysis step on the top-left `lw x lh` region (both even).
fn haar_forward(buf: &mut [f64], stride: usize, lw: usize, lh: usize, scratch: &mut [f64]) {
    let (hw, hh) = (lw / 2, lh / 2);
    for y in 0..lh {
        let row = &mut buf[y * stride..y * stride + lw];
        for i in 0..hw {
            let (a, b) = (row[2 * i], row[2 * i + 1]);
            scratch[i] = (a + b) * FRAC_1_SQRT_2;
            scratch[hw + i] = (a - b) * FRAC_1_SQRT_2;
        }
        row.copy_from_slice(&scratch[..lw]);
    }
    for x in 0..lw {
        for i in 0..hh {
            let a = buf[2 * i * stride + x];
            let b = buf[(2 * i + 1) * stride + x];
            scratch[i] = (a + b) * FRAC_1_SQRT_2;
            scratch[hh + i] = (a - b) * FRAC_1_SQRT_2;
        }
        for (y, &v) in scratch[..lh].iter().enumerate() {
            buf[y * stride + x] = v;
        }
    }
}

fn haar_inverse(buf: &mut [f64], stride: usize, lw: usize, lh: usize, scratch: &mut [f64]) {
    let (hw, hh) = (lw / 2, lh / 2);
    for x in 0..lw {
        for i in 0..hh {
            let s = buf[i * stride + x];
            let d = buf[(hh + i) * stride + x];
            scratch[2 * i] = (s + d) * FRAC_1_SQRT_2;
            scratch[2 * i + 1] = (s - d) * FRAC_1_SQRT_2;
        }
        for (y, &v) in scratch[..lh].iter().enumerate() {
            buf[y * stride + x] = v;
        }
    }
    for y in 0..lh {
        let row = &mut buf[y * stride..y * stride + lw];
        for i in 0..hw {
            let (s, d) = (row[i], row[hw + i]);
            scratch[2 * i] = (s + d) * FRAC_1_SQRT_2;
            scratch[2 * i + 1] = (s - d) * FRAC_1_SQRT_2;
        }
        row.copy_from_slice(&scratch[..lw]);
    }
}
