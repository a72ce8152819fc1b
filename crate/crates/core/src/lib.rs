//! Evolutionary search over sequences of classical image transformations,
//! guided by a no-reference quality score and guarded by structural
//! similarity to the input image.
//!
//! ```no_run
//! use evoimage::{evolve, load_image, EvolveConfig};
//!
//! let image = load_image("hazy.png")?;
//! let run = evolve(&image, &EvolveConfig { seed: 7, ..Default::default() })?;
//! println!("{}", evoimage::trace::serialize_trace(&run.trace));
//! # Ok::<(), evoimage::Error>(())
//! ```

pub mod error;
pub mod evolve;
pub(crate) mod filter;
pub mod harness;
pub mod image;
pub mod iqa;
pub mod trace;
pub mod transforms;

pub use error::{Error, Result};
pub use evolve::{evolve, evolve_with, Evolution, EvolveConfig, Individual};
pub use image::{load_image, quantize, save_image, Image};
pub use iqa::{Orientation, QualityScore, Scorer, ScorerConfig, ScorerKind};
pub use trace::{parse_trace, replay, serialize_trace, Trace};
pub use transforms::{apply_sequence, apply_transform, Op, TransformSpec};
