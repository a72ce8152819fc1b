//! Image quality measures: the built-in no-reference score, SSIM, noise
//! level estimation and the external scorer protocol.

pub mod aggd;
pub mod brisque;
pub mod external;
pub mod noise;
pub mod ssim;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub use aggd::{fit_aggd, fit_ggd, AggdFit, GgdFit};
pub use brisque::{brisque_features, brisque_score, mscn, BrisqueModel, BrisqueScorer};
pub use external::ExternalScorer;
pub use noise::noise_sigma;
pub use ssim::ssim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherBetter,
    LowerBetter,
}

impl Orientation {
    pub fn name(self) -> &'static str {
        match self {
            Orientation::HigherBetter => "higher_better",
            Orientation::LowerBetter => "lower_better",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityScore {
    pub value: f64,
    pub orientation: Orientation,
}

impl QualityScore {
    pub fn new(value: f64, orientation: Orientation) -> Self {
        Self { value, orientation }
    }

    /// The score on a higher-is-better scale.
    pub fn canonical(&self) -> f64 {
        match self.orientation {
            Orientation::HigherBetter => self.value,
            Orientation::LowerBetter => -self.value,
        }
    }
}

/// Anything that can rate an image.
pub trait Scorer: Send + Sync {
    fn score(&self, image: &Image) -> Result<QualityScore>;
    fn orientation(&self) -> Orientation;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    BrisqueBuiltin,
    External,
}

impl ScorerKind {
    pub fn name(self) -> &'static str {
        match self {
            ScorerKind::BrisqueBuiltin => "brisque_builtin",
            ScorerKind::External => "external",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "brisque_builtin" => Some(ScorerKind::BrisqueBuiltin),
            "external" => Some(ScorerKind::External),
            _ => None,
        }
    }
}

/// Smallest accepted `eval_downscale`.
pub const MIN_EVAL_SIDE: usize = 32;

/// Which metric drives the search.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerConfig {
    pub kind: ScorerKind,
    /// Command template with an `{image}` placeholder (external only).
    pub command: Option<String>,
    /// Per-invocation limit (external only).
    pub timeout_secs: f64,
    pub orientation: Orientation,
    /// Longest side used for scoring; `None` scores at full resolution.
    pub eval_downscale: Option<usize>,
    /// Concurrent external processes allowed per scorer.
    pub max_in_flight: usize,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self::brisque()
    }
}

impl ScorerConfig {
    pub fn brisque() -> Self {
        Self {
            kind: ScorerKind::BrisqueBuiltin,
            command: None,
            timeout_secs: 30.0,
            orientation: Orientation::LowerBetter,
            eval_downscale: None,
            max_in_flight: 4,
        }
    }

    pub fn external(command: impl Into<String>, orientation: Orientation) -> Self {
        Self {
            kind: ScorerKind::External,
            command: Some(command.into()),
            orientation,
            ..Self::brisque()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == ScorerKind::External
            && self
                .command
                .as_deref()
                .map_or(true, |c| c.trim().is_empty())
        {
            return Err(Error::Config(
                "external scorer requires a non-empty command".into(),
            ));
        }
        if self.kind == ScorerKind::BrisqueBuiltin && self.orientation != Orientation::LowerBetter {
            return Err(Error::Config(
                "the built-in score is lower-is-better".into(),
            ));
        }
        if let Some(side) = self.eval_downscale {
            if side < MIN_EVAL_SIDE {
                return Err(Error::Config(format!(
                    "eval_downscale must be at least {MIN_EVAL_SIDE}, got {side}"
                )));
            }
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(Error::Config("scorer timeout must be positive".into()));
        }
        Ok(())
    }

    /// Instantiates the configured scorer (the built-in one uses the bundled model).
    pub fn build(&self) -> Result<Box<dyn Scorer>> {
        self.validate()?;
        Ok(match self.kind {
            ScorerKind::BrisqueBuiltin => Box::new(BrisqueScorer::new(
                BrisqueModel::bundled(),
                self.eval_downscale,
            )),
            ScorerKind::External => Box::new(ExternalScorer::new(self)?),
        })
    }
}
