//! Fixtures and independent scalar oracles shared by the integration tests.
//! The oracles only use the public pixel accessors and `libm`, never the
//! crate's filters or fitting code.

#![allow(dead_code, clippy::needless_range_loop)]

use std::path::PathBuf;

use evoimage::{load_image, Image};

pub fn fixture_paths() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .expect("fixture directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .collect();
    paths.sort();
    paths
}

/// The twenty 128x128 RGB fixtures, in file name order.
pub fn fixtures() -> Vec<Image> {
    fixture_paths()
        .iter()
        .map(|p| load_image(p).unwrap())
        .collect()
}

/// The fixtures halved to 64x64.
pub fn small_fixtures() -> Vec<Image> {
    fixtures()
        .iter()
        .map(|f| f.downscale_half().unwrap())
        .collect()
}

pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

pub fn luma(img: &Image) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(if img.channels() == 1 {
                img.get(x, y, 0)
            } else {
                0.299 * img.get(x, y, 0) + 0.587 * img.get(x, y, 1) + 0.114 * img.get(x, y, 2)
            });
        }
    }
    out
}

/// Normalized 2-D Gaussian weights of side `2r+1`.
pub fn gaussian_window(sigma: f64, r: usize) -> Vec<Vec<f64>> {
    let n = 2 * r + 1;
    let mut k = vec![vec![0.0; n]; n];
    let mut total = 0.0;
    for (j, row) in k.iter_mut().enumerate() {
        for (i, v) in row.iter_mut().enumerate() {
            let (dx, dy) = (i as f64 - r as f64, j as f64 - r as f64);
            *v = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            total += *v;
        }
    }
    for row in &mut k {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    k
}

/// Mean local SSIM over every fully-contained 11x11 window.
pub fn ssim_oracle(a: &Image, b: &Image) -> f64 {
    let (w, h) = (a.width(), a.height());
    let (x, y) = (luma(a), luma(b));
    let k = gaussian_window(1.5, 5);
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut total = 0.0;
    let mut count = 0.0;
    for oy in 0..=h - 11 {
        for ox in 0..=w - 11 {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for j in 0..11 {
                for i in 0..11 {
                    let p = (oy + j) * w + ox + i;
                    let wt = k[j][i];
                    mx += wt * x[p];
                    my += wt * y[p];
                    sxx += wt * x[p] * x[p];
                    syy += wt * y[p] * y[p];
                    sxy += wt * x[p] * y[p];
                }
            }
            let (vx, vy, cov) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1.0;
        }
    }
    total / count
}

fn ratio(alpha: f64) -> f64 {
    let g2 = libm::tgamma(2.0 / alpha);
    g2 * g2 / (libm::tgamma(1.0 / alpha) * libm::tgamma(3.0 / alpha))
}

/// Grid point nearest to `target` by exhaustive scan; first minimum wins.
pub fn alpha_by_scan(target: f64) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..9801 {
        let a = (200 + k) as f64 / 1000.0;
        let d = (ratio(a) - target).abs();
        if d < best.0 {
            best = (d, a);
        }
    }
    best.1
}

/// (alpha, sigma_l, sigma_r, eta) by direct moment matching.
pub fn aggd_oracle(xs: &[f64]) -> (f64, f64, f64, f64) {
    let left: Vec<f64> = xs.iter().copied().filter(|&x| x < 0.0).collect();
    let right: Vec<f64> = xs.iter().copied().filter(|&x| x > 0.0).collect();
    let ms = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    let (sl, sr) = (ms(&left).sqrt(), ms(&right).sqrt());
    let g = sl / sr;
    let mean_abs = xs.iter().map(|x| x.abs()).sum::<f64>() / xs.len() as f64;
    let r_hat = mean_abs * mean_abs / ms(xs);
    let big_r = r_hat * (g.powi(3) + 1.0) * (g + 1.0) / (g * g + 1.0).powi(2);
    let alpha = alpha_by_scan(big_r);
    let eta = (sr - sl) * libm::tgamma(2.0 / alpha) / libm::tgamma(1.0 / alpha);
    (alpha, sl, sr, eta)
}

/// MSCN by direct 7x7 windowed sums with reflected borders.
pub fn mscn_oracle(plane: &[f64], w: usize, h: usize) -> Vec<f64> {
    let k = gaussian_window(7.0 / 6.0, 3);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (mut m, mut m2) = (0.0, 0.0);
            for j in 0..7 {
                for i in 0..7 {
                    let sx = reflect(x as isize + i as isize - 3, w);
                    let sy = reflect(y as isize + j as isize - 3, h);
                    let v = plane[sy * w + sx];
                    m += k[j][i] * v;
                    m2 += k[j][i] * v * v;
                }
            }
            let sigma = (m2 - m * m).abs().sqrt();
            let c = (plane[y * w + x] - m) / (sigma + 1.0 / 255.0);
            out.push(if c.abs() < 1e-9 { 0.0 } else { c });
        }
    }
    out
}

fn scale_oracle(plane: &[f64], w: usize, h: usize, out: &mut Vec<f64>) {
    let m = mscn_oracle(plane, w, h);
    let at = |x: usize, y: usize| m[y * w + x];
    let n = m.len() as f64;
    let mean_abs = m.iter().map(|v| v.abs()).sum::<f64>() / n;
    let mean_sq = m.iter().map(|v| v * v).sum::<f64>() / n;
    out.push(alpha_by_scan(mean_abs * mean_abs / mean_sq));
    out.push(mean_sq);

    let shifts: [(usize, usize, usize, usize); 4] =
        [(0, 0, 1, 0), (0, 0, 0, 1), (0, 0, 1, 1), (1, 0, 0, 1)];
    for (ax, ay, bx, by) in shifts {
        let mut products = Vec::new();
        let (xmax, ymax) = (w - ax.max(bx), h - ay.max(by));
        for y in 0..ymax {
            for x in 0..xmax {
                products.push(at(x + ax, y + ay) * at(x + bx, y + by));
            }
        }
        let (a, sl, sr, eta) = aggd_oracle(&products);
        out.extend([a, eta, sl * sl, sr * sr]);
    }
}

/// The 36 quality features by brute force.
pub fn brisque_features_oracle(img: &Image) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let y = luma(img);
    let mut out = Vec::new();
    scale_oracle(&y, w, h, &mut out);
    let (hw, hh) = (w / 2, h / 2);
    let mut half = Vec::with_capacity(hw * hh);
    for j in 0..hh {
        for i in 0..hw {
            let s = y[2 * j * w + 2 * i]
                + y[2 * j * w + 2 * i + 1]
                + y[(2 * j + 1) * w + 2 * i]
                + y[(2 * j + 1) * w + 2 * i + 1];
            half.push(s / 4.0);
        }
    }
    scale_oracle(&half, hw, hh, &mut out);
    out
}

/// Immerkaer estimate by direct 3x3 convolution.
pub fn noise_oracle(img: &Image) -> f64 {
    let (w, h) = (img.width(), img.height());
    let y = luma(img);
    let n = [[1.0, -2.0, 1.0], [-2.0, 4.0, -2.0], [1.0, -2.0, 1.0]];
    let mut total = 0.0;
    for cy in 1..h - 1 {
        for cx in 1..w - 1 {
            let mut s = 0.0;
            for (j, row) in n.iter().enumerate() {
                for (i, k) in row.iter().enumerate() {
                    s += k * y[(cy + j - 1) * w + cx + i - 1];
                }
            }
            total += s.abs();
        }
    }
    (std::f64::consts::PI / 2.0).sqrt() * total / (6.0 * (w - 2) as f64 * (h - 2) as f64)
}

/// Samples of a generalized Gaussian with shape `alpha`, unit scale on
/// each side before scaling by `sigma_l` / `sigma_r` so that each side's
/// second moment is the square of its sigma.
pub fn aggd_samples(alpha: f64, sigma_l: f64, sigma_r: f64, n: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Gamma};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let gamma = Gamma::new(1.0 / alpha, 1.0).unwrap();
    // |x|^alpha ~ Gamma(1/alpha); rescale so E[x^2] = 1 on each side.
    let unit = (libm::tgamma(1.0 / alpha) / libm::tgamma(3.0 / alpha)).sqrt();
    let p_left = sigma_l / (sigma_l + sigma_r);
    (0..n)
        .map(|_| {
            let mag = gamma.sample(&mut rng).powf(1.0 / alpha) * unit;
            if rng.random::<f64>() < p_left {
                -sigma_l * mag
            } else {
                sigma_r * mag
            }
        })
        .collect()
}
