//! Tone and contrast operators applied on luma: global and contrast-limited
//! adaptive histogram equalization, unsharp masking and background removal.

use crate::error::{Error, Result};
use crate::filter::{self, mean};
use crate::image::{quantize, Image};

const BINS: usize = 256;
/// CLAHE uses an 8x8 grid of tiles.
pub const CLAHE_GRID: usize = 8;
/// Smallest side accepted by [`clahe`].
pub const CLAHE_MIN_SIDE: usize = 16;
/// Blur used by the unsharp mask.
pub const SHARPEN_SIGMA: f64 = 1.0;

fn histogram(values: impl Iterator<Item = f64>) -> [f64; BINS] {
    let mut hist = [0.0; BINS];
    for v in values {
        hist[quantize(v) as usize] += 1.0;
    }
    hist
}

pub(crate) fn hist_equalize_plane(plane: &[f64]) -> Vec<f64> {
    let hist = histogram(plane.iter().copied());
    let mut cdf = [0.0; BINS];
    let mut acc = 0.0;
    for (c, h) in cdf.iter_mut().zip(hist) {
        acc += h;
        *c = acc;
    }
    let total = plane.len() as f64;
    let cdf_min = cdf.iter().copied().find(|&c| c > 0.0).unwrap_or(0.0);
    if total <= cdf_min {
        return plane.to_vec();
    }
    plane
        .iter()
        .map(|&v| (cdf[quantize(v) as usize] - cdf_min) / (total - cdf_min))
        .collect()
}

pub(crate) fn check_clahe_dims(w: usize, h: usize) -> Result<()> {
    if w < CLAHE_MIN_SIDE || h < CLAHE_MIN_SIDE {
        return Err(Error::Dimension(format!(
            "clahe needs at least {CLAHE_MIN_SIDE}x{CLAHE_MIN_SIDE}, got {w}x{h}"
        )));
    }
    Ok(())
}

/// Mapping of one tile: clipped, uniformly redistributed histogram turned
/// into a normalized inclusive CDF.
pub(crate) fn clahe_tile_lut(values: impl Iterator<Item = f64>, clip_limit: f64) -> [f64; BINS] {
    let mut hist = histogram(values);
    let count: f64 = hist.iter().sum();
    let limit = clip_limit * count / BINS as f64;
    let mut excess = 0.0;
    for h in &mut hist {
        if *h > limit {
            excess += *h - limit;
            *h = limit;
        }
    }
    let bonus = excess / BINS as f64;
    let mut lut = [0.0; BINS];
    let mut acc = 0.0;
    for (l, h) in lut.iter_mut().zip(hist) {
        acc += h + bonus;
        *l = acc / count;
    }
    lut
}

/// Index pair and blend fraction for interpolating between tile centers.
fn locate(pos: f64, centers: &[f64]) -> (usize, usize, f64) {
    let last = centers.len() - 1;
    if pos <= centers[0] {
        return (0, 0, 0.0);
    }
    if pos >= centers[last] {
        return (last, last, 0.0);
    }
    let i = centers.partition_point(|&c| c <= pos) - 1;
    (i, i + 1, (pos - centers[i]) / (centers[i + 1] - centers[i]))
}

pub(crate) fn clahe_plane(plane: &[f64], w: usize, h: usize, clip_limit: f64) -> Vec<f64> {
    let xb: Vec<usize> = (0..=CLAHE_GRID).map(|i| i * w / CLAHE_GRID).collect();
    let yb: Vec<usize> = (0..=CLAHE_GRID).map(|i| i * h / CLAHE_GRID).collect();

    let mut luts = Vec::with_capacity(CLAHE_GRID * CLAHE_GRID);
    for ty in 0..CLAHE_GRID {
        for tx in 0..CLAHE_GRID {
            let tile = (yb[ty]..yb[ty + 1])
                .flat_map(|y| plane[y * w + xb[tx]..y * w + xb[tx + 1]].iter().copied());
            luts.push(clahe_tile_lut(tile, clip_limit));
        }
    }

    let centers = |b: &[usize]| -> Vec<f64> {
        b.windows(2)
            .map(|p| (p[0] + p[1] - 1) as f64 / 2.0)
            .collect()
    };
    let (cx, cy) = (centers(&xb), centers(&yb));
    let xs: Vec<_> = (0..w).map(|x| locate(x as f64, &cx)).collect();

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (ty0, ty1, fy) = locate(y as f64, &cy);
        for (x, &(tx0, tx1, fx)) in xs.iter().enumerate() {
            let b = quantize(plane[y * w + x]) as usize;
            let lut = |ty: usize, tx: usize| luts[ty * CLAHE_GRID + tx][b];
            let top = (1.0 - fx) * lut(ty0, tx0) + fx * lut(ty0, tx1);
            let bottom = (1.0 - fx) * lut(ty1, tx0) + fx * lut(ty1, tx1);
            out.push((1.0 - fy) * top + fy * bottom);
        }
    }
    out
}

/// Contrast-limited adaptive histogram equalization of a luma image on an
/// 8x8 tile grid, with bilinear blending between tile mappings.
pub fn clahe(luma: &Image, clip_limit: f64) -> Result<Image> {
    let (w, h) = (luma.width(), luma.height());
    check_clahe_dims(w, h)?;
    Ok(luma.map_planes(|p| clahe_plane(p, w, h, clip_limit)))
}

pub(crate) fn sharpen_plane(plane: &[f64], w: usize, h: usize, beta: f64) -> Vec<f64> {
    let blurred = filter::gaussian_blur(plane, w, h, SHARPEN_SIGMA);
    plane
        .iter()
        .zip(&blurred)
        .map(|(&v, &b)| v + beta * (v - b))
        .collect()
}

/// Unsharp masking: `v + beta * (v - G_1(v))`, clamped.
pub fn sharpen(luma: &Image, beta: f64) -> Image {
    let (w, h) = (luma.width(), luma.height());
    luma.map_planes(|p| sharpen_plane(p, w, h, beta))
}

pub(crate) fn background_plane(plane: &[f64], w: usize, h: usize, sigma_bg: f64) -> Vec<f64> {
    let background = filter::gaussian_blur(plane, w, h, sigma_bg);
    let level = mean(&background);
    plane
        .iter()
        .zip(&background)
        .map(|(&v, &b)| v - b + level)
        .collect()
}
