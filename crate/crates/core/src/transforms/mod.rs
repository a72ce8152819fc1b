//! Registry of parameterized image transformations sampled by the search.
//!
//! Every op is a pure function of its parameters, the current image and the
//! search's initial image (used only by the blending ops). A [`TransformSpec`]
//! can only be built with a known op and in-range parameters, so applying a
//! spec never fails on validation.

mod blend;
mod dehaze;
mod denoise;
mod tone;

use std::fmt;

use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::filter;
use crate::image::{luma_plane, Image};

pub use blend::{stack_weighted, subtract_initial};
pub use dehaze::dehaze_dark_channel;
pub use denoise::tv_denoise;
pub use tone::{clahe, sharpen};

/// How an op treats color images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    /// Applied to luma; RGB channels are then scaled by `y' / max(y, 1/255)`.
    LumaThenRecombine,
    /// Applied independently to every channel.
    PerChannel,
    /// Uses all channels together.
    RgbJoint,
}

/// Closed interval for one parameter of an op.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRange {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
    /// Only whole numbers are accepted.
    pub integer: bool,
}

impl ParamRange {
    const fn real(name: &'static str, min: f64, max: f64) -> Self {
        Self {
            name,
            min,
            max,
            integer: false,
        }
    }

    const fn int(name: &'static str, min: f64, max: f64) -> Self {
        Self {
            name,
            min,
            max,
            integer: true,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.min && value <= self.max && (!self.integer || value.fract() == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    GaussianDenoise,
    MedianDenoise,
    BilateralDenoise,
    TvDenoise,
    NlmDenoise,
    WaveletDenoise,
    HistEqualize,
    Clahe,
    BrightnessContrast,
    Gamma,
    Sharpen,
    Dehaze,
    BackgroundSuppress,
    Erode,
    Dilate,
    StackInitial,
    SubtractInitial,
}

impl Op {
    pub const ALL: [Op; 17] = [
        Op::GaussianDenoise,
        Op::MedianDenoise,
        Op::BilateralDenoise,
        Op::TvDenoise,
        Op::NlmDenoise,
        Op::WaveletDenoise,
        Op::HistEqualize,
        Op::Clahe,
        Op::BrightnessContrast,
        Op::Gamma,
        Op::Sharpen,
        Op::Dehaze,
        Op::BackgroundSuppress,
        Op::Erode,
        Op::Dilate,
        Op::StackInitial,
        Op::SubtractInitial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Op::GaussianDenoise => "gaussian_denoise",
            Op::MedianDenoise => "median_denoise",
            Op::BilateralDenoise => "bilateral_denoise",
            Op::TvDenoise => "tv_denoise",
            Op::NlmDenoise => "nlm_denoise",
            Op::WaveletDenoise => "wavelet_denoise",
            Op::HistEqualize => "hist_equalize",
            Op::Clahe => "clahe",
            Op::BrightnessContrast => "brightness_contrast",
            Op::Gamma => "gamma",
            Op::Sharpen => "sharpen",
            Op::Dehaze => "dehaze",
            Op::BackgroundSuppress => "background_suppress",
            Op::Erode => "erode",
            Op::Dilate => "dilate",
            Op::StackInitial => "stack_initial",
            Op::SubtractInitial => "subtract_initial",
        }
    }

    pub fn from_name(name: &str) -> Result<Op> {
        Op::ALL
            .into_iter()
            .find(|op| op.name() == name)
            .ok_or_else(|| Error::UnknownOp(name.to_string()))
    }

    /// Declared parameters, in serialization order.
    pub fn params(self) -> &'static [ParamRange] {
        const SIGMA: [ParamRange; 1] = [ParamRange::real("sigma", 0.5, 2.0)];
        const RADIUS: [ParamRange; 1] = [ParamRange::int("radius", 1.0, 2.0)];
        const BILATERAL: [ParamRange; 2] = [
            ParamRange::real("sigma_s", 1.0, 3.0),
            ParamRange::real("sigma_r", 0.05, 0.25),
        ];
        const TV: [ParamRange; 1] = [ParamRange::real("weight", 0.02, 0.2)];
        const NLM: [ParamRange; 1] = [ParamRange::real("h", 0.02, 0.15)];
        const WAVELET: [ParamRange; 1] = [ParamRange::real("threshold", 0.01, 0.1)];
        const CLAHE: [ParamRange; 1] = [ParamRange::real("clip_limit", 1.0, 4.0)];
        const BC: [ParamRange; 2] = [
            ParamRange::real("alpha", 0.8, 1.3),
            ParamRange::real("beta_shift", -0.1, 0.1),
        ];
        const GAMMA: [ParamRange; 1] = [ParamRange::real("g", 0.6, 1.6)];
        const SHARPEN: [ParamRange; 1] = [ParamRange::real("beta", 0.5, 1.5)];
        const DEHAZE: [ParamRange; 1] = [ParamRange::real("omega", 0.75, 0.95)];
        const BACKGROUND: [ParamRange; 1] = [ParamRange::real("sigma_bg", 10.0, 40.0)];
        const STACK: [ParamRange; 1] = [ParamRange::real("weight", 0.3, 0.95)];
        const SUBTRACT: [ParamRange; 1] = [ParamRange::real("amount", 0.05, 0.3)];

        match self {
            Op::GaussianDenoise => &SIGMA,
            Op::MedianDenoise | Op::Erode | Op::Dilate => &RADIUS,
            Op::BilateralDenoise => &BILATERAL,
            Op::TvDenoise => &TV,
            Op::NlmDenoise => &NLM,
            Op::WaveletDenoise => &WAVELET,
            Op::HistEqualize => &[],
            Op::Clahe => &CLAHE,
            Op::BrightnessContrast => &BC,
            Op::Gamma => &GAMMA,
            Op::Sharpen => &SHARPEN,
            Op::Dehaze => &DEHAZE,
            Op::BackgroundSuppress => &BACKGROUND,
            Op::StackInitial => &STACK,
            Op::SubtractInitial => &SUBTRACT,
        }
    }

    pub fn channel_mode(self) -> ChannelMode {
        match self {
            Op::HistEqualize | Op::Clahe | Op::Sharpen | Op::BackgroundSuppress => {
                ChannelMode::LumaThenRecombine
            }
            Op::Dehaze | Op::StackInitial | Op::SubtractInitial => ChannelMode::RgbJoint,
            _ => ChannelMode::PerChannel,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One fully parameterized step of a transform sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSpec {
    op: Op,
    /// Parameter values in the order of [`Op::params`].
    values: Vec<f64>,
}

impl TransformSpec {
    /// Validates an op name and named parameters against the registry.
    pub fn new(op: &str, params: &[(&str, f64)]) -> Result<Self> {
        let op = Op::from_name(op)?;
        for (name, _) in params {
            if !op.params().iter().any(|p| p.name == *name) {
                return Err(Error::UnknownParam {
                    op: op.name().into(),
                    name: (*name).into(),
                });
            }
        }
        let values = op
            .params()
            .iter()
            .map(|p| {
                params
                    .iter()
                    .find(|(name, _)| *name == p.name)
                    .map(|&(_, v)| v)
                    .ok_or_else(|| Error::MissingParam {
                        op: op.name().into(),
                        name: p.name.into(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_values(op, values)
    }

    /// Builds a spec from values given in registry order.
    pub fn from_values(op: Op, values: Vec<f64>) -> Result<Self> {
        let ranges = op.params();
        if values.len() != ranges.len() {
            return Err(Error::Config(format!(
                "`{op}` takes {} parameters, got {}",
                ranges.len(),
                values.len()
            )));
        }
        for (range, &value) in ranges.iter().zip(&values) {
            if !range.contains(value) {
                return Err(Error::ParamOutOfRange {
                    op: op.name().into(),
                    name: range.name.into(),
                    value,
                    min: range.min,
                    max: range.max,
                    detail: if range.integer && value.fract() != 0.0 {
                        " (must be an integer)"
                    } else {
                        ""
                    },
                });
            }
        }
        Ok(Self { op, values })
    }

    pub fn op(&self) -> Op {
        self.op
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.op
            .params()
            .iter()
            .position(|p| p.name == name)
            .map(|i| self.values[i])
    }

    /// `(name, value)` pairs in registry order.
    pub fn params(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        self.op
            .params()
            .iter()
            .zip(&self.values)
            .map(|(p, &v)| (p.name, v))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Parses `{"op": name, "params": {name: number}}`.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::TraceSyntax("step must be an object".into()))?;
        let op = obj
            .get("op")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::TraceSyntax("step is missing string field `op`".into()))?;
        let params = match obj.get("params") {
            None => Vec::new(),
            Some(p) => p
                .as_object()
                .ok_or_else(|| Error::TraceSyntax("`params` must be an object".into()))?
                .iter()
                .map(|(k, v)| {
                    v.as_f64()
                        .map(|f| (k.as_str(), f))
                        .ok_or_else(|| Error::TraceSyntax(format!("param `{k}` is not a number")))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        if let Some(extra) = obj.keys().find(|k| *k != "op" && *k != "params") {
            return Err(Error::TraceSyntax(format!(
                "unexpected step field `{extra}`"
            )));
        }
        Self::new(op, &params)
    }

    fn int_param(&self, index: usize) -> usize {
        self.values[index] as usize
    }
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.op)?;
        for (i, (name, v)) in self.params().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{name}={v:.4}")?;
        }
        f.write_str(")")
    }
}

impl Serialize for TransformSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Params<'a>(&'a TransformSpec);
        impl Serialize for Params<'_> {
            fn serialize<S: Serializer>(
                &self,
                serializer: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                let mut map = serializer.serialize_map(Some(self.0.values.len()))?;
                for (name, v) in self.0.params() {
                    map.serialize_entry(name, &v)?;
                }
                map.end()
            }
        }
        let mut s = serializer.serialize_struct("TransformSpec", 2)?;
        s.serialize_field("op", self.op.name())?;
        s.serialize_field("params", &Params(self))?;
        s.end()
    }
}

/// Applies one step. `initial` is the operand of the blending ops and is
/// ignored by every other op.
pub fn apply_transform(spec: &TransformSpec, image: &Image, initial: &Image) -> Result<Image> {
    let (w, h) = (image.width(), image.height());
    let v = &spec.values;
    let out = match spec.op {
        Op::GaussianDenoise => image.map_planes(|p| filter::gaussian_blur(p, w, h, v[0])),
        Op::MedianDenoise => {
            let r = spec.int_param(0);
            image.map_planes(|p| denoise::median_plane(p, w, h, r))
        }
        Op::BilateralDenoise => image.map_planes(|p| denoise::bilateral_plane(p, w, h, v[0], v[1])),
        Op::TvDenoise => image.map_planes(|p| denoise::tv_plane(p, w, h, v[0])),
        Op::NlmDenoise => image.map_planes(|p| denoise::nlm_plane(p, w, h, v[0])),
        Op::WaveletDenoise => image.map_planes(|p| denoise::wavelet_plane(p, w, h, v[0])),
        Op::HistEqualize => luma_mode(image, tone::hist_equalize_plane),
        Op::Clahe => {
            tone::check_clahe_dims(w, h)?;
            luma_mode(image, |p| tone::clahe_plane(p, w, h, v[0]))
        }
        Op::BrightnessContrast => {
            let (alpha, shift) = (v[0], v[1]);
            image.map_planes(|p| p.iter().map(|&x| alpha * (x - 0.5) + 0.5 + shift).collect())
        }
        Op::Gamma => {
            let g = v[0];
            image.map_planes(|p| p.iter().map(|&x| x.powf(g)).collect())
        }
        Op::Sharpen => luma_mode(image, |p| tone::sharpen_plane(p, w, h, v[0])),
        Op::Dehaze => dehaze_dark_channel(image, v[0]),
        Op::BackgroundSuppress => luma_mode(image, |p| tone::background_plane(p, w, h, v[0])),
        Op::Erode => {
            let r = spec.int_param(0);
            image.map_planes(|p| filter::min_filter(p, w, h, r))
        }
        Op::Dilate => {
            let r = spec.int_param(0);
            image.map_planes(|p| filter::max_filter(p, w, h, r))
        }
        Op::StackInitial => stack_weighted(image, initial, v[0])?,
        Op::SubtractInitial => subtract_initial(image, initial, v[0])?,
    };
    Ok(out)
}

/// Applies `steps` in order starting from `initial`.
pub fn apply_sequence(initial: &Image, steps: &[TransformSpec]) -> Result<Image> {
    let mut image = initial.clone();
    for step in steps {
        image = apply_transform(step, &image, initial)?;
    }
    Ok(image)
}

/// Runs `f` on the luma plane and rescales RGB channels by the luma ratio.
fn luma_mode(image: &Image, f: impl FnOnce(&[f64]) -> Vec<f64>) -> Image {
    let (w, h) = (image.width(), image.height());
    if image.channels() == 1 {
        return Image::from_raw_clamped(w, h, 1, f(image.plane(0)));
    }
    let luma = luma_plane(image.plane(0), image.plane(1), image.plane(2));
    let mapped = f(&luma);
    let ratio: Vec<f64> = luma
        .iter()
        .zip(&mapped)
        .map(|(&y, &y_new)| {
            let y_new = crate::image::clamp_unit(y_new);
            if y_new == y {
                1.0
            } else {
                y_new / y.max(1.0 / 255.0)
            }
        })
        .collect();
    image.map_planes(|p| p.iter().zip(&ratio).map(|(v, r)| v * r).collect())
}
