//! Synthetic degradations and the batch benchmark runner.
//!
//! Degradations are deliberately kept out of the transform registry so the
//! search cannot undo one by applying its exact inverse.
//!
//! Bench reports are CSV with the fixed columns of [`CSV_HEADER`] plus a
//! Markdown table with the same columns and a final row of means.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolve::{evolve, EvolveConfig};
use crate::filter::gaussian_blur;
use crate::image::{load_image, save_image, Image};
use crate::trace::write_trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegradeKind {
    /// Blend towards white: `(1 - s) I + s`.
    Fog,
    /// Gaussian blur with standard deviation `s` pixels.
    Blur,
    /// Additive Gaussian noise with standard deviation `s`, clamped.
    Noise,
}

impl DegradeKind {
    pub fn name(self) -> &'static str {
        match self {
            DegradeKind::Fog => "fog",
            DegradeKind::Blur => "blur",
            DegradeKind::Noise => "noise",
        }
    }

    /// Accepted strength interval and whether its lower end is included.
    fn range(self) -> (f64, f64, bool) {
        match self {
            DegradeKind::Fog => (0.0, 1.0, true),
            DegradeKind::Blur => (0.0, 5.0, false),
            DegradeKind::Noise => (0.0, 0.3, false),
        }
    }
}

/// A degradation and its strength, written `kind:strength` (e.g. `fog:0.4`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradeSpec {
    pub kind: DegradeKind,
    pub strength: f64,
}

impl DegradeSpec {
    pub fn new(kind: DegradeKind, strength: f64) -> Result<Self> {
        let (min, max, closed) = kind.range();
        let above = if closed {
            strength >= min
        } else {
            strength > min
        };
        if !(above && strength <= max) {
            return Err(Error::ParamOutOfRange {
                op: kind.name().into(),
                name: "strength".into(),
                value: strength,
                min,
                max,
                detail: if closed {
                    ""
                } else {
                    " (lower bound excluded)"
                },
            });
        }
        Ok(Self { kind, strength })
    }
}

impl FromStr for DegradeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("expected kind:strength, got `{s}`")))?;
        let kind = match kind {
            "fog" => DegradeKind::Fog,
            "blur" => DegradeKind::Blur,
            "noise" => DegradeKind::Noise,
            other => {
                return Err(Error::Config(format!(
                    "unknown degradation `{other}` (expected fog, blur or noise)"
                )))
            }
        };
        let strength = value
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("invalid strength `{value}`")))?;
        Self::new(kind, strength)
    }
}

impl fmt::Display for DegradeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.name(), self.strength)
    }
}

/// Applies `spec`; `seed` only matters for noise.
pub fn degrade(image: &Image, spec: DegradeSpec, seed: u64) -> Image {
    let (w, h) = (image.width(), image.height());
    let s = spec.strength;
    match spec.kind {
        DegradeKind::Fog => image.map_planes(|p| p.iter().map(|&v| (1.0 - s) * v + s).collect()),
        DegradeKind::Blur => image.map_planes(|p| gaussian_blur(p, w, h, s)),
        DegradeKind::Noise => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, s).expect("strength is positive and finite");
            image.map_planes(|p| p.iter().map(|&v| v + normal.sample(&mut rng)).collect())
        }
    }
}

/// The splitmix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed used for the image at `index` of a bench: `seed ^ splitmix64(index)`.
pub fn image_seed(seed: u64, index: usize) -> u64 {
    seed ^ splitmix64(index as u64)
}

pub const CSV_HEADER: [&str; 9] = [
    "filename",
    "score_before",
    "score_after",
    "noise_sigma_before",
    "noise_sigma_after",
    "ssim_final",
    "steps_count",
    "wall_time_s",
    "error",
];

/// One image of a bench. Numeric fields are NaN when `error` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub filename: String,
    pub score_before: f64,
    pub score_after: f64,
    pub noise_sigma_before: f64,
    pub noise_sigma_after: f64,
    pub ssim_final: f64,
    pub steps_count: usize,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

impl BenchRow {
    fn failed(filename: String, error: &Error, wall_time_s: f64) -> Self {
        Self {
            filename,
            score_before: f64::NAN,
            score_after: f64::NAN,
            noise_sigma_before: f64::NAN,
            noise_sigma_after: f64::NAN,
            ssim_final: f64::NAN,
            steps_count: 0,
            wall_time_s,
            error: Some(error.to_string()),
        }
    }

    fn numbers(&self) -> [f64; 7] {
        [
            self.score_before,
            self.score_after,
            self.noise_sigma_before,
            self.noise_sigma_after,
            self.ssim_final,
            self.steps_count as f64,
            self.wall_time_s,
        ]
    }
}

/// Means over the rows without an error.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub succeeded: usize,
    pub failed: usize,
    pub score_before: f64,
    pub score_after: f64,
    pub noise_sigma_before: f64,
    pub noise_sigma_after: f64,
    pub ssim_final: f64,
    pub steps_count: f64,
    pub wall_time_s: f64,
}

impl BenchSummary {
    pub fn from_rows(rows: &[BenchRow]) -> Self {
        let ok: Vec<&BenchRow> = rows.iter().filter(|r| r.error.is_none()).collect();
        let mut sums = [0.0; 7];
        for row in &ok {
            for (s, v) in sums.iter_mut().zip(row.numbers()) {
                *s += v;
            }
        }
        let n = ok.len() as f64;
        let m = sums.map(|s| if ok.is_empty() { f64::NAN } else { s / n });
        Self {
            succeeded: ok.len(),
            failed: rows.len() - ok.len(),
            score_before: m[0],
            score_after: m[1],
            noise_sigma_before: m[2],
            noise_sigma_after: m[3],
            ssim_final: m[4],
            steps_count: m[5],
            wall_time_s: m[6],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summary: BenchSummary,
}

fn cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("writing to memory");
        for r in &self.rows {
            let mut record = vec![r.filename.clone()];
            record.extend(r.numbers()[..5].iter().map(|&v| cell(v)));
            record.push(r.steps_count.to_string());
            record.push(format!("{:.3}", r.wall_time_s));
            record.push(r.error.clone().unwrap_or_default());
            w.write_record(&record).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is UTF-8")
    }

    /// Aligned Markdown table; the last row holds the means.
    pub fn to_markdown(&self) -> String {
        let fmt4 = |v: f64| {
            if v.is_nan() {
                "-".to_string()
            } else {
                format!("{v:.4}")
            }
        };
        let mut rows: Vec<Vec<String>> = vec![CSV_HEADER.iter().map(|s| s.to_string()).collect()];
        for r in &self.rows {
            let mut row = vec![r.filename.clone()];
            row.extend(r.numbers()[..5].iter().map(|&v| fmt4(v)));
            row.push(r.steps_count.to_string());
            row.push(format!("{:.3}", r.wall_time_s));
            row.push(r.error.clone().unwrap_or_default().replace('|', "\\|"));
            rows.push(row);
        }
        let s = &self.summary;
        rows.push(vec![
            "**mean**".to_string(),
            fmt4(s.score_before),
            fmt4(s.score_after),
            fmt4(s.noise_sigma_before),
            fmt4(s.noise_sigma_after),
            fmt4(s.ssim_final),
            format!("{:.2}", s.steps_count),
            format!("{:.3}", s.wall_time_s),
            if s.failed > 0 {
                format!("{} failed", s.failed)
            } else {
                String::new()
            },
        ]);

        let widths: Vec<usize> = (0..CSV_HEADER.len())
            .map(|c| {
                rows.iter()
                    .map(|r| r[c].chars().count())
                    .max()
                    .unwrap_or(0)
                    .max(3)
            })
            .collect();
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (v, &w))| {
                    if c == 0 || c == CSV_HEADER.len() - 1 {
                        format!("{v:<w$}")
                    } else {
                        format!("{v:>w$}")
                    }
                })
                .collect();
            format!("| {} |\n", padded.join(" | "))
        };
        let mut out = line(&rows[0]);
        let rule: Vec<String> = widths
            .iter()
            .enumerate()
            .map(|(c, &w)| {
                if c == 0 || c == CSV_HEADER.len() - 1 {
                    format!(":{}", "-".repeat(w - 1))
                } else {
                    format!("{}:", "-".repeat(w - 1))
                }
            })
            .collect();
        out.push_str(&format!("| {} |\n", rule.join(" | ")));
        for row in &rows[1..] {
            out.push_str(&line(row));
        }
        out
    }
}

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Image files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if is_image && path.is_file() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub config: EvolveConfig,
    pub degrade: Option<DegradeSpec>,
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
}

fn bench_one(
    path: &Path,
    index: usize,
    out_dir: &Path,
    options: &BenchOptions,
) -> Result<BenchRow> {
    let filename = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = path
        .file_stem()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| format!("image{index}"));
    let start = Instant::now();
    let seed = image_seed(options.config.seed, index);
    let mut image = load_image(path)?;
    if let Some(spec) = options.degrade {
        // Quantized so the saved input replays to the same hashes.
        image = degrade(&image, spec, seed).quantized();
        save_image(&image, out_dir.join(format!("{stem}.input.png")))?;
    }
    let config = EvolveConfig {
        seed,
        ..options.config.clone()
    };
    let run = evolve(&image, &config)?;
    write_trace(&run.trace, out_dir.join(format!("{stem}.trace.json")))?;
    let best = run
        .best
        .image
        .as_deref()
        .expect("returned best is rendered");
    save_image(best, out_dir.join(format!("{stem}.out.png")))?;
    let scores = &run.trace.scores;
    Ok(BenchRow {
        filename,
        score_before: scores.raw_before,
        score_after: scores.raw_after,
        noise_sigma_before: scores.noise_sigma_before,
        noise_sigma_after: scores.noise_sigma_after,
        ssim_final: scores.ssim_final,
        steps_count: run.trace.steps.len(),
        wall_time_s: start.elapsed().as_secs_f64(),
        error: None,
    })
}

/// Paths of the CSV and Markdown reports for a requested report path.
pub fn report_paths(report: &Path) -> (PathBuf, PathBuf) {
    if report.extension().is_some_and(|e| e == "md") {
        (report.with_extension("csv"), report.to_path_buf())
    } else {
        (report.to_path_buf(), report.with_extension("md"))
    }
}

/// Runs the search on every image in `dir` and writes the reports, plus a
/// trace, an output image and (when degrading) the degraded input per image,
/// into the report's directory.
pub fn run_bench(dir: &Path, report: &Path, options: &BenchOptions) -> Result<BenchReport> {
    options.config.validate()?;
    let files = list_images(dir)?;
    if files.is_empty() {
        return Err(Error::EmptyDir(dir.to_path_buf()));
    }
    let out_dir = match report.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let work = || -> Vec<BenchRow> {
        files
            .par_iter()
            .enumerate()
            .map(|(i, path)| {
                let start = Instant::now();
                bench_one(path, i, &out_dir, options).unwrap_or_else(|e| {
                    let name = path
                        .file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    BenchRow::failed(name, &e, start.elapsed().as_secs_f64())
                })
            })
            .collect()
    };
    let rows = if options.jobs == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
            .install(work)
    };
    if rows
        .iter()
        .all(|r| matches!(&r.error, Some(e) if e.starts_with("cannot decode")))
    {
        return Err(Error::EmptyDir(dir.to_path_buf()));
    }

    let report_data = BenchReport {
        summary: BenchSummary::from_rows(&rows),
        rows,
    };
    let (csv_path, md_path) = report_paths(report);
    std::fs::write(&csv_path, report_data.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
    std::fs::write(&md_path, report_data.to_markdown()).map_err(|e| Error::io(&md_path, e))?;
    Ok(report_data)
}
