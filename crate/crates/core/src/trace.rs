//! Trace files: the ordered, replayable record of a search result.
//!
//! Traces are written in a canonical compact JSON form: fixed key order, no
//! whitespace, every float as 17 significant digits in exponent notation
//! (`5.0000000000000000e-1`), which parses back to the identical `f64`.
//! Top-level key order:
//!
//! ```text
//! format_version, source_hash, seed,
//! config {population, epochs, min_ssim, max_sequence_len, scorer, eval_downscale},
//! steps [{op, params {name: value, ...in registry order}}],
//! result_hash,
//! scores {raw_before, raw_after, ssim_final, noise_sigma_before, noise_sigma_after}
//! ```

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::evolve::EvolveConfig;
use crate::image::Image;
use crate::iqa::ScorerKind;
use crate::transforms::{apply_transform, TransformSpec};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceConfig {
    pub population: usize,
    pub epochs: usize,
    pub min_ssim: f64,
    pub max_sequence_len: usize,
    pub scorer: ScorerKind,
    pub eval_downscale: Option<usize>,
}

impl From<&EvolveConfig> for TraceConfig {
    fn from(c: &EvolveConfig) -> Self {
        Self {
            population: c.population_size,
            epochs: c.epochs,
            min_ssim: c.min_ssim,
            max_sequence_len: c.max_sequence_len,
            scorer: c.scorer.kind,
            eval_downscale: c.scorer.eval_downscale,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceScores {
    pub raw_before: f64,
    pub raw_after: f64,
    pub ssim_final: f64,
    pub noise_sigma_before: f64,
    pub noise_sigma_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub format_version: u64,
    pub source_hash: String,
    pub seed: u64,
    pub config: TraceConfig,
    pub steps: Vec<TransformSpec>,
    pub result_hash: String,
    pub scores: TraceScores,
}

/// 17 significant digits; non-finite values become `null`.
fn write_float(out: &mut String, v: f64) {
    if v.is_finite() {
        write!(out, "{v:.16e}").expect("writing to a String");
    } else {
        out.push_str("null");
    }
}

fn write_str(out: &mut String, s: &str) {
    out.push_str(&Value::String(s.to_string()).to_string());
}

/// Canonical JSON text of `trace`.
pub fn serialize_trace(trace: &Trace) -> String {
    let mut o = String::with_capacity(256 + 96 * trace.steps.len());
    write!(o, "{{\"format_version\":{}", trace.format_version).unwrap();
    o.push_str(",\"source_hash\":");
    write_str(&mut o, &trace.source_hash);
    write!(o, ",\"seed\":{}", trace.seed).unwrap();

    let c = &trace.config;
    write!(
        o,
        ",\"config\":{{\"population\":{},\"epochs\":{},\"min_ssim\":",
        c.population, c.epochs
    )
    .unwrap();
    write_float(&mut o, c.min_ssim);
    write!(
        o,
        ",\"max_sequence_len\":{},\"scorer\":",
        c.max_sequence_len
    )
    .unwrap();
    write_str(&mut o, c.scorer.name());
    o.push_str(",\"eval_downscale\":");
    match c.eval_downscale {
        Some(side) => write!(o, "{side}").unwrap(),
        None => o.push_str("null"),
    }
    o.push('}');

    o.push_str(",\"steps\":[");
    for (i, step) in trace.steps.iter().enumerate() {
        if i > 0 {
            o.push(',');
        }
        o.push_str("{\"op\":");
        write_str(&mut o, step.op().name());
        o.push_str(",\"params\":{");
        for (j, (name, v)) in step.params().enumerate() {
            if j > 0 {
                o.push(',');
            }
            write_str(&mut o, name);
            o.push(':');
            write_float(&mut o, v);
        }
        o.push_str("}}");
    }
    o.push(']');

    o.push_str(",\"result_hash\":");
    write_str(&mut o, &trace.result_hash);
    let s = &trace.scores;
    o.push_str(",\"scores\":{");
    for (i, (name, v)) in [
        ("raw_before", s.raw_before),
        ("raw_after", s.raw_after),
        ("ssim_final", s.ssim_final),
        ("noise_sigma_before", s.noise_sigma_before),
        ("noise_sigma_after", s.noise_sigma_after),
    ]
    .into_iter()
    .enumerate()
    {
        if i > 0 {
            o.push(',');
        }
        write_str(&mut o, name);
        o.push(':');
        write_float(&mut o, v);
    }
    o.push_str("}}");
    o
}

fn syntax(msg: impl Into<String>) -> Error {
    Error::TraceSyntax(msg.into())
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| syntax(format!("missing field `{key}`")))
}

fn object<'a>(v: &'a Value, what: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| syntax(format!("`{what}` must be an object")))
}

fn uint(obj: &Map<String, Value>, key: &str) -> Result<u64> {
    field(obj, key)?
        .as_u64()
        .ok_or_else(|| syntax(format!("`{key}` must be a non-negative integer")))
}

fn count(obj: &Map<String, Value>, key: &str) -> Result<usize> {
    usize::try_from(uint(obj, key)?).map_err(|_| syntax(format!("`{key}` is too large")))
}

/// Finite number, or NaN for `null`.
fn float(obj: &Map<String, Value>, key: &str) -> Result<f64> {
    match field(obj, key)? {
        Value::Null => Ok(f64::NAN),
        v => v
            .as_f64()
            .ok_or_else(|| syntax(format!("`{key}` must be a number"))),
    }
}

fn hash(obj: &Map<String, Value>, key: &str) -> Result<String> {
    let s = field(obj, key)?
        .as_str()
        .ok_or_else(|| syntax(format!("`{key}` must be a string")))?;
    if s.len() != 64
        || !s
            .bytes()
            .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
    {
        return Err(syntax(format!("`{key}` must be 64 lowercase hex digits")));
    }
    Ok(s.to_string())
}

/// Parses and validates trace text. Field order and whitespace are not
/// checked; every step must name a registered op with in-range parameters.
pub fn parse_trace(text: &str) -> Result<Trace> {
    let root: Value = serde_json::from_str(text).map_err(|e| syntax(e.to_string()))?;
    let root = object(&root, "trace")?;
    let format_version = uint(root, "format_version")?;
    if format_version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: format_version,
            supported: FORMAT_VERSION,
        });
    }

    let c = object(field(root, "config")?, "config")?;
    let scorer_name = field(c, "scorer")?
        .as_str()
        .ok_or_else(|| syntax("`scorer` must be a string"))?;
    let config = TraceConfig {
        population: count(c, "population")?,
        epochs: count(c, "epochs")?,
        min_ssim: float(c, "min_ssim")?,
        max_sequence_len: count(c, "max_sequence_len")?,
        scorer: ScorerKind::from_name(scorer_name)
            .ok_or_else(|| syntax(format!("unknown scorer `{scorer_name}`")))?,
        eval_downscale: match field(c, "eval_downscale")? {
            Value::Null => None,
            _ => Some(count(c, "eval_downscale")?),
        },
    };

    let steps = field(root, "steps")?
        .as_array()
        .ok_or_else(|| syntax("`steps` must be an array"))?
        .iter()
        .map(TransformSpec::from_json)
        .collect::<Result<Vec<_>>>()?;
    if steps.len() > config.max_sequence_len {
        return Err(syntax(format!(
            "{} steps exceed max_sequence_len {}",
            steps.len(),
            config.max_sequence_len
        )));
    }

    let s = object(field(root, "scores")?, "scores")?;
    Ok(Trace {
        format_version,
        source_hash: hash(root, "source_hash")?,
        seed: uint(root, "seed")?,
        config,
        steps,
        result_hash: hash(root, "result_hash")?,
        scores: TraceScores {
            raw_before: float(s, "raw_before")?,
            raw_after: float(s, "raw_after")?,
            ssim_final: float(s, "ssim_final")?,
            noise_sigma_before: float(s, "noise_sigma_before")?,
            noise_sigma_after: float(s, "noise_sigma_after")?,
        },
    })
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text)
}

pub fn write_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, serialize_trace(trace) + "\n").map_err(|e| Error::io(path, e))
}

/// Applies the trace's steps to `initial`. With `verify`, the source and
/// result hashes recorded in the trace are checked.
pub fn replay(initial: &Image, trace: &Trace, verify: bool) -> Result<Image> {
    if verify {
        let actual = initial.content_hash();
        if actual != trace.source_hash {
            return Err(Error::SourceMismatch {
                expected: trace.source_hash.clone(),
                actual,
            });
        }
    }
    let mut image = initial.clone();
    for step in &trace.steps {
        image = apply_transform(step, &image, initial)?;
    }
    if verify {
        let actual = image.content_hash();
        if actual != trace.result_hash {
            return Err(Error::ResultMismatch {
                expected: trace.result_hash.clone(),
                actual,
            });
        }
    }
    Ok(image)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(steps: Vec<TransformSpec>) -> Trace {
        Trace {
            format_version: FORMAT_VERSION,
            source_hash: "a".repeat(64),
            seed: u64::MAX,
            config: TraceConfig {
                population: 20,
                epochs: 50,
                min_ssim: 0.5,
                max_sequence_len: 25,
                scorer: ScorerKind::BrisqueBuiltin,
                eval_downscale: None,
            },
            steps,
            result_hash: "b".repeat(64),
            scores: TraceScores {
                raw_before: 41.25,
                raw_after: 0.1 + 0.2,
                ssim_final: 0.9137,
                noise_sigma_before: 1.0 / 3.0,
                noise_sigma_after: 0.0,
            },
        }
    }

    #[test]
    fn empty_steps_layout() {
        let text = serialize_trace(&sample(Vec::new()));
        assert!(text.starts_with("{\"format_version\":1,\"source_hash\":\"aaaa"));
        assert!(text.contains("\"steps\":[]"));
        assert!(text.contains("\"min_ssim\":5.0000000000000000e-1"));
        assert!(text.contains("\"eval_downscale\":null"));
        assert!(!text.contains(' '));
        serde_json::from_str::<Value>(&text).unwrap();
    }

    #[test]
    fn round_trip_is_exact() {
        let steps = vec![
            TransformSpec::new("gamma", &[("g", 0.6000000000000001)]).unwrap(),
            TransformSpec::new("median_denoise", &[("radius", 2.0)]).unwrap(),
            TransformSpec::new(
                "bilateral_denoise",
                &[("sigma_s", 1.234567890123), ("sigma_r", 0.05)],
            )
            .unwrap(),
            TransformSpec::new("hist_equalize", &[]).unwrap(),
        ];
        let t = sample(steps);
        let text = serialize_trace(&t);
        let back = parse_trace(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(serialize_trace(&back), text);
    }

    #[test]
    fn param_order_follows_registry() {
        let step =
            TransformSpec::new("bilateral_denoise", &[("sigma_r", 0.1), ("sigma_s", 2.0)]).unwrap();
        let text = serialize_trace(&sample(vec![step]));
        let a = text.find("sigma_s").unwrap();
        let b = text.find("sigma_r").unwrap();
        assert!(a < b);
    }

    #[test]
    fn parse_errors() {
        let good = serialize_trace(&sample(vec![
            TransformSpec::new("gamma", &[("g", 1.0)]).unwrap()
        ]));
        assert!(matches!(parse_trace("{"), Err(Error::TraceSyntax(_))));
        assert!(matches!(
            parse_trace(&good.replace("\"gamma\"", "\"frobnicate\"")),
            Err(Error::UnknownOp(_))
        ));
        assert!(matches!(
            parse_trace(&good.replace("\"g\":1.0000000000000000e0", "\"g\":9.9")),
            Err(Error::ParamOutOfRange { .. })
        ));
        assert!(matches!(
            parse_trace(&good.replace("\"format_version\":1", "\"format_version\":2")),
            Err(Error::VersionMismatch { found: 2, .. })
        ));
        assert!(matches!(
            parse_trace(&good.replace(&"a".repeat(64), "xyz")),
            Err(Error::TraceSyntax(_))
        ));
    }

    #[test]
    fn replay_checks_hashes() {
        let img = Image::from_fn(16, 16, 1, |x, y, _| ((x + y) % 5) as f64 / 4.0).unwrap();
        let mut t = sample(Vec::new());
        t.source_hash = img.content_hash();
        t.result_hash = img.content_hash();
        assert_eq!(replay(&img, &t, true).unwrap(), img);

        let other = Image::filled(16, 16, 1, 0.5).unwrap();
        assert!(matches!(
            replay(&other, &t, true),
            Err(Error::SourceMismatch { .. })
        ));
        assert!(replay(&other, &t, false).is_ok());

        t.steps
            .push(TransformSpec::new("gamma", &[("g", 1.5)]).unwrap());
        assert!(matches!(
            replay(&img, &t, true),
            Err(Error::ResultMismatch { .. })
        ));
    }
}
