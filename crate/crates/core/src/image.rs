//! Planar floating-point image buffer, PNG/JPEG codecs, luma conversion,
//! content hashing and resampling.
//!
//! Samples live in `[0, 1]`. The buffer is planar: all samples of channel 0
//! in row-major order, then channel 1, then channel 2. Quantization to 8 bits
//! happens only when encoding and hashing.

use std::path::Path;

use image::{ColorType, ImageFormat};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Rec. 601 luma weights for red and blue; green takes the remainder.
pub const LUMA_R: f64 = 0.299;
pub const LUMA_G: f64 = 0.587;
pub const LUMA_B: f64 = 0.114;

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image from planar data, validating shape and sample range.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "expected {} samples, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!(
                "sample {bad} is outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// An image with every sample set to `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
        )
    }

    /// Builds an image by evaluating `f(x, y, channel)` for every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    /// Internal constructor for filter outputs: clamps into `[0, 1]` and maps
    /// NaN to 0 so every transform result satisfies the image invariants.
    pub(crate) fn from_raw_clamped(
        width: usize,
        height: usize,
        channels: usize,
        mut data: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        for v in &mut data {
            *v = clamp_unit(*v);
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    /// Assembles an image from per-channel planes of identical size.
    pub(crate) fn from_planes(width: usize, height: usize, planes: Vec<Vec<f64>>) -> Self {
        let channels = planes.len();
        let data = planes.into_iter().flatten().collect();
        Self::from_raw_clamped(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(width, height, channels)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Samples of one channel, row-major.
    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.pixel_count();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn planes(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.pixel_count())
    }

    pub fn get(&self, x: usize, y: usize, channel: usize) -> f64 {
        self.data[channel * self.pixel_count() + y * self.width + x]
    }

    /// Applies `f` independently to every channel plane.
    pub(crate) fn map_planes(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Image {
        let planes = self.planes().map(&mut f).collect();
        Image::from_planes(self.width, self.height, planes)
    }

    pub(crate) fn ensure_same_shape(&self, other: &Image) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left: self.shape(),
                right: other.shape(),
            })
        }
    }

    /// Luma channel. RGB uses the Rec. 601 weights; single-channel images are
    /// copied unchanged.
    pub fn to_luma(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = luma_plane(self.plane(0), self.plane(1), self.plane(2));
        Image::from_raw_clamped(self.width, self.height, 1, data)
    }

    /// Every sample snapped to the nearest 8-bit level (`round(v * 255) / 255`).
    pub fn quantized(&self) -> Image {
        let data = self
            .data
            .iter()
            .map(|&v| f64::from(quantize(v)) / 255.0)
            .collect();
        Image { data, ..*self }
    }

    /// Hex SHA-256 over `width`, `height`, `channels` as little-endian u64,
    /// followed by every sample quantized to one byte, in buffer order.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for dim in [self.width, self.height, self.channels] {
            hasher.update((dim as u64).to_le_bytes());
        }
        let bytes: Vec<u8> = self.data.iter().map(|&v| quantize(v)).collect();
        hasher.update(&bytes);
        hex::encode(hasher.finalize())
    }

    /// Halves both dimensions (floor) by averaging 2x2 blocks per channel.
    pub fn downscale_half(&self) -> Result<Image> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::Dimension(format!(
                "downscale_half needs at least 2x2, got {}x{}",
                self.width, self.height
            )));
        }
        let (w, h) = (self.width / 2, self.height / 2);
        let sw = self.width;
        let planes = self
            .planes()
            .map(|src| {
                let mut out = Vec::with_capacity(w * h);
                for y in 0..h {
                    let r0 = 2 * y * sw;
                    let r1 = r0 + sw;
                    for x in 0..w {
                        let x0 = 2 * x;
                        let s = src[r0 + x0] + src[r0 + x0 + 1] + src[r1 + x0] + src[r1 + x0 + 1];
                        out.push(s * 0.25);
                    }
                }
                out
            })
            .collect();
        Ok(Image::from_planes(w, h, planes))
    }

    /// Box-filter downscale so the longest side is at most `max_side`,
    /// preserving aspect ratio. Returns a copy when already small enough.
    pub fn fit_within(&self, max_side: usize) -> Image {
        let longest = self.width.max(self.height);
        if max_side == 0 || longest <= max_side {
            return self.clone();
        }
        let scale = max_side as f64 / longest as f64;
        let nw = ((self.width as f64 * scale).round() as usize).clamp(1, max_side);
        let nh = ((self.height as f64 * scale).round() as usize).clamp(1, max_side);
        let wx = area_weights(self.width, nw);
        let wy = area_weights(self.height, nh);
        let planes = self
            .planes()
            .map(|src| {
                // rows first, then columns
                let mut tmp = vec![0.0; nw * self.height];
                for y in 0..self.height {
                    let row = &src[y * self.width..(y + 1) * self.width];
                    for (ox, taps) in wx.iter().enumerate() {
                        tmp[y * nw + ox] = taps.iter().map(|&(i, w)| w * row[i]).sum();
                    }
                }
                let mut out = vec![0.0; nw * nh];
                for (oy, taps) in wy.iter().enumerate() {
                    for ox in 0..nw {
                        out[oy * nw + ox] = taps.iter().map(|&(i, w)| w * tmp[i * nw + ox]).sum();
                    }
                }
                out
            })
            .collect();
        Image::from_planes(nw, nh, planes)
    }
}

/// Per-output-sample `(source index, weight)` lists for area-average resampling.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let start = o as f64 * ratio;
            let end = start + ratio;
            let first = start.floor() as usize;
            let last = (end.ceil() as usize).min(src);
            (first..last)
                .filter_map(|i| {
                    let overlap = (end.min(i as f64 + 1.0) - start.max(i as f64)).max(0.0);
                    (overlap > 0.0).then_some((i, overlap / ratio))
                })
                .collect()
        })
        .collect()
}

/// Rec. 601 luma written so that neutral pixels (r = g = b) map to exactly
/// their own value.
pub(crate) fn luma_plane(r: &[f64], g: &[f64], b: &[f64]) -> Vec<f64> {
    r.iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| g + LUMA_R * (r - g) + LUMA_B * (b - g))
        .collect()
}

#[inline]
pub(crate) fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Round-half-up to an 8-bit level.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (clamp_unit(v) * 255.0 + 0.5).floor().min(255.0) as u8
}

/// Decodes a PNG or JPEG file into a 3-channel image. Grayscale sources are
/// replicated across channels and alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoded = image::load_from_memory(&bytes).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let n = w * h;
    let mut data = vec![0.0; n * 3];
    for (i, px) in rgb.pixels().enumerate() {
        for c in 0..3 {
            data[c * n + i] = f64::from(px.0[c]) / 255.0;
        }
    }
    Image::new(w, h, 3, data)
}

/// Encodes an image as 8-bit PNG (gray or RGB) using round-half-up quantization.
pub fn save_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let n = image.pixel_count();
    let c = image.channels();
    let mut bytes = vec![0u8; n * c];
    for ch in 0..c {
        for (i, &v) in image.plane(ch).iter().enumerate() {
            bytes[i * c + ch] = quantize(v);
        }
    }
    let color = if c == 1 {
        ColorType::L8
    } else {
        ColorType::Rgb8
    };
    image::save_buffer_with_format(
        path,
        &bytes,
        image.width() as u32,
        image.height() as u32,
        color,
        ImageFormat::Png,
    )
    .map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}
