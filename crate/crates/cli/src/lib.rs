//! Argument parsing and subcommand dispatch for the `evoimage` binary.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
//! failures while running.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use evoimage::harness::{self, BenchOptions, DegradeSpec};
use evoimage::iqa::{brisque_score, noise_sigma, ssim, BrisqueModel};
use evoimage::trace::{read_trace, write_trace};
use evoimage::{
    evolve, load_image, replay, save_image, Error, EvolveConfig, Orientation, ScorerConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "evoimage",
    version,
    about = "Evolutionary image enhancement with replayable traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search for a transform sequence that improves an image.
    Enhance(EnhanceArgs),
    /// Re-apply a trace to its source image.
    Replay(ReplayArgs),
    /// Print one quality number for an image.
    Score(ScoreArgs),
    /// Apply a synthetic degradation.
    Degrade(DegradeArgs),
    /// Enhance every image of a directory and write a report.
    Bench(BenchArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ScorerChoice {
    Brisque,
    External,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum OrientationChoice {
    Higher,
    Lower,
}

#[derive(Args, Debug)]
struct SearchArgs {
    /// Quality metric driving the search.
    #[arg(long, value_enum, default_value = "brisque")]
    scorer: ScorerChoice,
    /// External scorer command; `{image}` is replaced by a PNG path.
    #[arg(long, value_name = "TEMPLATE")]
    scorer_cmd: Option<String>,
    /// Seconds allowed per external scorer call.
    #[arg(long, default_value_t = 30.0)]
    scorer_timeout: f64,
    /// Whether higher or lower external scores are better.
    #[arg(long, value_enum, default_value = "higher")]
    scorer_orientation: OrientationChoice,
    #[arg(long, default_value_t = 20)]
    population: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Candidates less similar than this to the input are penalized.
    #[arg(long, default_value_t = 0.5)]
    min_ssim: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Longest transform sequence.
    #[arg(long, default_value_t = evoimage::evolve::DEFAULT_MAX_SEQUENCE_LEN)]
    max_steps: usize,
    /// Score on a copy whose longest side is at most this many pixels.
    #[arg(long, value_name = "PX")]
    eval_downscale: Option<usize>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

impl SearchArgs {
    fn config(&self) -> Result<EvolveConfig, Error> {
        let mut scorer = match self.scorer {
            ScorerChoice::Brisque => {
                if self.scorer_cmd.is_some() {
                    return Err(Error::Config("--scorer-cmd needs --scorer external".into()));
                }
                ScorerConfig::brisque()
            }
            ScorerChoice::External => {
                let cmd = self
                    .scorer_cmd
                    .clone()
                    .ok_or_else(|| Error::Config("--scorer external needs --scorer-cmd".into()))?;
                let orientation = match self.scorer_orientation {
                    OrientationChoice::Higher => Orientation::HigherBetter,
                    OrientationChoice::Lower => Orientation::LowerBetter,
                };
                ScorerConfig::external(cmd, orientation)
            }
        };
        scorer.timeout_secs = self.scorer_timeout;
        scorer.eval_downscale = self.eval_downscale;
        let config = EvolveConfig {
            population_size: self.population,
            epochs: self.epochs,
            min_ssim: self.min_ssim,
            seed: self.seed,
            scorer,
            max_sequence_len: self.max_steps,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Debug)]
struct EnhanceArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Check the source and result hashes recorded in the trace.
    #[arg(long)]
    verify: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Metric {
    Brisque,
    Noise,
    Ssim,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    metric: Metric,
    /// Reference image for `--metric ssim`.
    #[arg(long = "ref", value_name = "PATH")]
    reference: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DegradeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// fog:<s>, blur:<sigma> or noise:<sigma>.
    #[arg(long, value_parser = parse_degrade)]
    op: DegradeSpec,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    dir: PathBuf,
    /// CSV report path; a Markdown table is written next to it.
    #[arg(long)]
    report: PathBuf,
    /// Degrade every image before enhancing it.
    #[arg(long, value_parser = parse_degrade, value_name = "OP:STRENGTH")]
    degrade: Option<DegradeSpec>,
    #[command(flatten)]
    search: SearchArgs,
}

fn parse_degrade(s: &str) -> Result<DegradeSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => Failure::Usage(msg),
            other => Failure::Runtime(other),
        }
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{text}");
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            let _ = writeln!(err, "Run `evoimage --help` for usage.");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Enhance(a) => enhance(a, out),
        Command::Replay(a) => replay_cmd(a, out),
        Command::Score(a) => score(a, out),
        Command::Degrade(a) => degrade_cmd(a),
        Command::Bench(a) => bench(a, out),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon_pool(jobs)?;
    Ok(pool.install(f))
}

fn rayon_pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Usage(format!("cannot start {jobs} workers: {e}")))
}

fn enhance(a: EnhanceArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let config = a.search.config()?;
    let image = load_image(&a.input)?;
    let run = with_jobs(a.search.jobs, || evolve(&image, &config))??;
    let best = run
        .best
        .image
        .as_deref()
        .expect("returned best is rendered");
    save_image(best, &a.out)?;
    write_trace(&run.trace, &a.trace)?;
    let s = &run.trace.scores;
    writeln!(
        out,
        "score {:.4} -> {:.4}, ssim {:.4}, {} steps",
        s.raw_before,
        s.raw_after,
        s.ssim_final,
        run.trace.steps.len()
    )
    .map_err(|e| io_failure(Path::new("<stdout>"), e))
}

fn replay_cmd(a: ReplayArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let image = load_image(&a.input)?;
    let trace = read_trace(&a.trace)?;
    let result = replay(&image, &trace, a.verify)?;
    save_image(&result, &a.out)?;
    writeln!(out, "{}", result.quantized().content_hash())
        .map_err(|e| io_failure(Path::new("<stdout>"), e))
}

fn score(a: ScoreArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let image = load_image(&a.input)?;
    let value = match a.metric {
        Metric::Brisque => brisque_score(&image, &BrisqueModel::bundled())?.value,
        Metric::Noise => noise_sigma(&image)?,
        Metric::Ssim => {
            let path = a
                .reference
                .ok_or_else(|| Failure::Usage("--metric ssim needs --ref".into()))?;
            ssim(&image, &load_image(path)?)?
        }
    };
    writeln!(out, "{value:.6}").map_err(|e| io_failure(Path::new("<stdout>"), e))
}

fn degrade_cmd(a: DegradeArgs) -> Result<(), Failure> {
    let image = load_image(&a.input)?;
    save_image(&harness::degrade(&image, a.op, a.seed), &a.out)?;
    Ok(())
}

fn bench(a: BenchArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let options = BenchOptions {
        config: a.search.config()?,
        degrade: a.degrade,
        jobs: a.search.jobs,
    };
    let report = harness::run_bench(&a.dir, &a.report, &options)?;
    write!(out, "{}", report.to_markdown()).map_err(|e| io_failure(Path::new("<stdout>"), e))
}
