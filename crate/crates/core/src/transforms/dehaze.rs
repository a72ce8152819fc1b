//! Dark-channel-prior haze removal.

use crate::filter::min_filter;
use crate::image::Image;

/// Radius of the 15x15 dark-channel window.
const PATCH_RADIUS: usize = 7;
/// Fraction of the haziest pixels averaged into the atmospheric light.
const BRIGHTEST_FRACTION: f64 = 0.001;
const MIN_TRANSMISSION: f64 = 0.1;
const MIN_AIRLIGHT: f64 = 1e-6;

fn dark_channel(planes: &[Vec<f64>], w: usize, h: usize) -> Vec<f64> {
    let per_pixel: Vec<f64> = (0..w * h)
        .map(|i| planes.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min))
        .collect();
    min_filter(&per_pixel, w, h, PATCH_RADIUS)
}

/// Mean color of the pixels with the largest dark-channel values. When the
/// dark channel is flat the global mean color is used.
fn atmospheric_light(planes: &[Vec<f64>], dark: &[f64]) -> Vec<f64> {
    let n = dark.len();
    let flat = dark.iter().all(|&d| d == dark[0]);
    let picked: Vec<usize> = if flat {
        (0..n).collect()
    } else {
        let take = ((n as f64 * BRIGHTEST_FRACTION).ceil() as usize).clamp(1, n);
        let mut order: Vec<usize> = (0..n).collect();
        // stable: equal values keep scan order
        order.sort_by(|&a, &b| dark[b].total_cmp(&dark[a]));
        order.truncate(take);
        order
    };
    planes
        .iter()
        .map(|p| picked.iter().map(|&i| p[i]).sum::<f64>() / picked.len() as f64)
        .collect()
}

/// Recovers `J = (I - A) / max(t, 0.1) + A` with `t = 1 - omega * dark(I / A)`.
pub fn dehaze_dark_channel(image: &Image, omega: f64) -> Image {
    let (w, h) = (image.width(), image.height());
    let planes: Vec<Vec<f64>> = image.planes().map(<[f64]>::to_vec).collect();
    let dark = dark_channel(&planes, w, h);
    let airlight = atmospheric_light(&planes, &dark);

    let normalized: Vec<Vec<f64>> = planes
        .iter()
        .zip(&airlight)
        .map(|(p, &a)| {
            let a = a.max(MIN_AIRLIGHT);
            p.iter().map(|v| v / a).collect()
        })
        .collect();
    let transmission: Vec<f64> = dark_channel(&normalized, w, h)
        .into_iter()
        .map(|d| (1.0 - omega * d).max(MIN_TRANSMISSION))
        .collect();

    let out = planes
        .iter()
        .zip(&airlight)
        .map(|(p, &a)| {
            p.iter()
                .zip(&transmission)
                .map(|(&v, &t)| (v - a) / t + a)
                .collect()
        })
        .collect();
    Image::from_planes(w, h, out)
}
