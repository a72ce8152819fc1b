//! Natural-scene-statistics quality score computed from mean-subtracted
//! contrast-normalized (MSCN) luminance.
//!
//! Features per scale: generalized Gaussian fit of the MSCN map (shape,
//! variance) and asymmetric fits of the four neighbour-product maps
//! (shape, mean term, left variance, right variance), for 18 values. The
//! second scale is the 2x2 box-downscaled image, giving 36 features. A
//! linear model on standardized features maps them to a 0..100 score where
//! lower is better.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{convolve_separable, gaussian_kernel};
use crate::image::Image;
use crate::iqa::aggd::{fit_aggd, fit_ggd};
use crate::iqa::{Orientation, QualityScore, Scorer};

pub const FEATURE_COUNT: usize = 36;
pub const FEATURES_PER_SCALE: usize = 18;
/// MSCN needs at least this many pixels per side.
pub const MSCN_MIN_SIDE: usize = 16;
/// Two scales, the coarser one at half size.
pub const BRISQUE_MIN_SIDE: usize = 32;
/// Stabilizer added to the local deviation.
pub const MSCN_C: f64 = 1.0 / 255.0;
/// Coefficients smaller than this are rounding residue of flat regions and
/// are set to exactly zero.
pub const MSCN_ZERO: f64 = 1e-9;
const WINDOW_RADIUS: usize = 3;
const WINDOW_SIGMA: f64 = 7.0 / 6.0;

static BUNDLED_MODEL: &str = include_str!("../../models/brisque_linear.json");

/// A row-major map of unbounded coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

/// MSCN coefficients `(I - mu) / (sigma + 1/255)` with `mu`, `sigma` taken
/// under a normalized 7x7 Gaussian window (sigma 7/6), reflected borders.
/// Values below [`MSCN_ZERO`] in magnitude are flushed to zero.
pub fn mscn(luma: &Image) -> Result<CoefficientMap> {
    let (w, h) = (luma.width(), luma.height());
    if w < MSCN_MIN_SIDE || h < MSCN_MIN_SIDE {
        return Err(Error::Dimension(format!(
            "MSCN needs at least {MSCN_MIN_SIDE}x{MSCN_MIN_SIDE}, got {w}x{h}"
        )));
    }
    let luma = luma.to_luma();
    // Shifting by one sample leaves the coefficients unchanged mathematically
    // and makes flat images exactly zero.
    let offset = luma.data()[0];
    let shifted: Vec<f64> = luma.data().iter().map(|v| v - offset).collect();
    let squared: Vec<f64> = shifted.iter().map(|v| v * v).collect();
    let kernel = gaussian_kernel(WINDOW_SIGMA, WINDOW_RADIUS);
    let mu = convolve_separable(&shifted, w, h, &kernel);
    let mu_sq = convolve_separable(&squared, w, h, &kernel);
    let data = shifted
        .iter()
        .zip(mu.iter().zip(&mu_sq))
        .map(|(&v, (&m, &m2))| {
            let sigma = (m2 - m * m).abs().sqrt();
            let c = (v - m) / (sigma + MSCN_C);
            if c.abs() < MSCN_ZERO {
                0.0
            } else {
                c
            }
        })
        .collect();
    Ok(CoefficientMap {
        width: w,
        height: h,
        data,
    })
}

/// Products of each coefficient with its right, lower, lower-right and
/// lower-left neighbours, in that order.
pub fn neighbour_products(map: &CoefficientMap) -> [Vec<f64>; 4] {
    let (w, h, d) = (map.width, map.height, &map.data);
    let at = |x: usize, y: usize| d[y * w + x];
    let mut horizontal = Vec::with_capacity((w - 1) * h);
    let mut vertical = Vec::with_capacity(w * (h - 1));
    let mut diagonal = Vec::with_capacity((w - 1) * (h - 1));
    let mut anti = Vec::with_capacity((w - 1) * (h - 1));
    for y in 0..h {
        for x in 0..w - 1 {
            horizontal.push(at(x, y) * at(x + 1, y));
        }
    }
    for y in 0..h - 1 {
        for x in 0..w {
            vertical.push(at(x, y) * at(x, y + 1));
        }
        for x in 0..w - 1 {
            diagonal.push(at(x, y) * at(x + 1, y + 1));
            anti.push(at(x + 1, y) * at(x, y + 1));
        }
    }
    [horizontal, vertical, diagonal, anti]
}

fn scale_features(luma: &Image, out: &mut Vec<f64>) -> Result<()> {
    let map = mscn(luma)?;
    let ggd = fit_ggd(&map.data)?;
    out.extend([ggd.alpha, ggd.variance]);
    for products in neighbour_products(&map) {
        let fit = fit_aggd(&products)?;
        out.extend([
            fit.alpha,
            fit.eta,
            fit.sigma_left * fit.sigma_left,
            fit.sigma_right * fit.sigma_right,
        ]);
    }
    Ok(())
}

/// The 36-feature vector: `[scale1: ggd(2), H(4), V(4), D1(4), D2(4); scale2: same]`.
pub fn brisque_features(image: &Image) -> Result<[f64; FEATURE_COUNT]> {
    let (w, h) = (image.width(), image.height());
    if w < BRISQUE_MIN_SIDE || h < BRISQUE_MIN_SIDE {
        return Err(Error::Dimension(format!(
            "quality features need at least {BRISQUE_MIN_SIDE}x{BRISQUE_MIN_SIDE}, got {w}x{h}"
        )));
    }
    let luma = image.to_luma();
    let mut features = Vec::with_capacity(FEATURE_COUNT);
    scale_features(&luma, &mut features)?;
    scale_features(&luma.downscale_half()?, &mut features)?;
    let mut out = [0.0; FEATURE_COUNT];
    out.copy_from_slice(&features);
    Ok(out)
}

/// Linear regression on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrisqueModel {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl BrisqueModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let model: BrisqueModel =
            serde_json::from_str(text).map_err(|e| Error::InvalidModel(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// The model shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_MODEL).expect("bundled quality model is valid")
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("means", &self.means),
            ("scales", &self.scales),
            ("weights", &self.weights),
        ] {
            if v.len() != FEATURE_COUNT {
                return Err(Error::InvalidModel(format!(
                    "`{name}` has {} entries, expected {FEATURE_COUNT}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "`{name}` has non-finite entries"
                )));
            }
        }
        if self.scales.iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidModel(
                "scales must be strictly positive".into(),
            ));
        }
        if !self.bias.is_finite() {
            return Err(Error::InvalidModel("bias must be finite".into()));
        }
        Ok(())
    }

    /// Unclamped regression output.
    pub fn predict(&self, features: &[f64; FEATURE_COUNT]) -> f64 {
        self.bias
            + features
                .iter()
                .zip(&self.means)
                .zip(self.scales.iter().zip(&self.weights))
                .map(|((f, m), (s, w))| w * (f - m) / s)
                .sum::<f64>()
    }
}

/// Score in `[0, 100]`, lower is better.
pub fn brisque_score(image: &Image, model: &BrisqueModel) -> Result<QualityScore> {
    let features = brisque_features(image)?;
    Ok(QualityScore::new(
        model.predict(&features).clamp(0.0, 100.0),
        Orientation::LowerBetter,
    ))
}

/// Built-in scorer backed by [`brisque_score`].
#[derive(Debug, Clone)]
pub struct BrisqueScorer {
    model: BrisqueModel,
    eval_downscale: Option<usize>,
}

impl BrisqueScorer {
    pub fn new(model: BrisqueModel, eval_downscale: Option<usize>) -> Self {
        Self {
            model,
            eval_downscale,
        }
    }

    pub fn bundled() -> Self {
        Self::new(BrisqueModel::bundled(), None)
    }

    pub fn model(&self) -> &BrisqueModel {
        &self.model
    }
}

impl Scorer for BrisqueScorer {
    fn score(&self, image: &Image) -> Result<QualityScore> {
        match self.eval_downscale {
            Some(side) => brisque_score(&image.fit_within(side), &self.model),
            None => brisque_score(image, &self.model),
        }
    }

    fn orientation(&self) -> Orientation {
        Orientation::LowerBetter
    }
}
