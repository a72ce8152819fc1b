//! Population search over transform sequences.
//!
//! Each epoch adds three children (the best member mutated, a random member
//! mutated, a random member stacked with the initial image) and culls the
//! three worst, so the best fitness never decreases. All random draws come
//! from one seeded generator on the calling thread, before any parallel
//! rendering, so results do not depend on the thread count.

use std::cmp::Ordering;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::iqa::{noise_sigma, ssim, Orientation, QualityScore, Scorer, ScorerConfig};
use crate::trace::{Trace, TraceConfig, TraceScores, FORMAT_VERSION};
use crate::transforms::{apply_sequence, apply_transform, Op, TransformSpec};

/// Subtracted from the fitness of members that drift below the SSIM floor.
pub const PENALTY: f64 = 1e6;
/// Fitness of members whose rendering or scoring failed.
pub const FAILED_FITNESS: f64 = -1e9;
/// Children added, and members culled, per epoch.
pub const CHILDREN_PER_EPOCH: usize = 3;
pub const DEFAULT_MAX_SEQUENCE_LEN: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveConfig {
    pub population_size: usize,
    pub epochs: usize,
    pub min_ssim: f64,
    pub seed: u64,
    pub scorer: ScorerConfig,
    pub max_sequence_len: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            population_size: 20,
            epochs: 50,
            min_ssim: 0.5,
            seed: 0,
            scorer: ScorerConfig::default(),
            max_sequence_len: DEFAULT_MAX_SEQUENCE_LEN,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Config(format!(
                "population size must be at least 2, got {}",
                self.population_size
            )));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.min_ssim) {
            return Err(Error::Config(format!(
                "min_ssim must lie in [0, 1], got {}",
                self.min_ssim
            )));
        }
        if self.max_sequence_len < 1 {
            return Err(Error::Config("max_sequence_len must be at least 1".into()));
        }
        self.scorer.validate()
    }
}

/// A candidate sequence and its evaluation.
#[derive(Debug, Clone)]
pub struct Individual {
    pub sequence: Vec<TransformSpec>,
    /// Rendered result; `None` when rendering failed.
    pub image: Option<Arc<Image>>,
    /// `None` when rendering or scoring failed.
    pub raw_score: Option<QualityScore>,
    /// NaN when rendering or scoring failed.
    pub ssim_to_initial: f64,
    pub fitness: f64,
    /// Why evaluation failed, if it did.
    pub error: Option<String>,
    birth: u64,
}

impl Individual {
    pub fn is_failed(&self) -> bool {
        self.error.is_some()
    }

    pub fn is_penalized(&self, min_ssim: f64) -> bool {
        self.is_failed() || self.ssim_to_initial < min_ssim
    }

    /// Order of creation within a run; lower is older.
    pub fn birth(&self) -> u64 {
        self.birth
    }
}

#[derive(Debug, Clone)]
pub struct Population {
    pub members: Vec<Individual>,
    next_birth: u64,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Highest fitness; ties go to the shorter sequence, then the older member.
    pub fn best(&self) -> &Individual {
        self.members
            .iter()
            .min_by(|a, b| best_order(a, b))
            .expect("population is never empty")
    }

    fn take_birth(&mut self) -> u64 {
        let b = self.next_birth;
        self.next_birth += 1;
        b
    }
}

fn best_order(a: &Individual, b: &Individual) -> Ordering {
    b.fitness
        .total_cmp(&a.fitness)
        .then(a.sequence.len().cmp(&b.sequence.len()))
        .then(a.birth.cmp(&b.birth))
}

/// Worst first: lowest fitness, then longer sequence, then older.
fn cull_order(a: &Individual, b: &Individual) -> Ordering {
    a.fitness
        .total_cmp(&b.fitness)
        .then(b.sequence.len().cmp(&a.sequence.len()))
        .then(a.birth.cmp(&b.birth))
}

/// Higher-is-better score minus the penalty when `ssim_val < min_ssim`.
pub fn canonical_fitness(score: QualityScore, ssim_val: f64, min_ssim: f64) -> f64 {
    let base = match score.orientation {
        Orientation::HigherBetter => score.value,
        Orientation::LowerBetter => -score.value,
    };
    if ssim_val < min_ssim {
        base - PENALTY
    } else {
        base
    }
}

/// Uniform op (the initial-image stacking op excluded) with uniform
/// parameters; integer parameters are uniform over their whole values.
pub fn random_transform<R: Rng + ?Sized>(rng: &mut R) -> TransformSpec {
    let ops: Vec<Op> = Op::ALL
        .into_iter()
        .filter(|&op| op != Op::StackInitial)
        .collect();
    let op = ops[rng.random_range(0..ops.len())];
    let values = op
        .params()
        .iter()
        .map(|p| sample_param(rng, p.min, p.max, p.integer))
        .collect();
    TransformSpec::from_values(op, values).expect("sampled values lie in their ranges")
}

fn sample_param<R: Rng + ?Sized>(rng: &mut R, min: f64, max: f64, integer: bool) -> f64 {
    if integer {
        rng.random_range(min as i64..=max as i64) as f64
    } else {
        rng.random_range(min..=max)
    }
}

fn stack_step<R: Rng + ?Sized>(rng: &mut R) -> TransformSpec {
    let range = Op::StackInitial.params()[0];
    let w = sample_param(rng, range.min, range.max, false);
    TransformSpec::from_values(Op::StackInitial, vec![w]).expect("weight lies in range")
}

/// A child to render: parent image (if reusable) plus its full sequence.
struct Job {
    sequence: Vec<TransformSpec>,
    base: Option<Arc<Image>>,
    birth: u64,
}

fn evaluate(job: Job, initial: &Image, config: &EvolveConfig, scorer: &dyn Scorer) -> Individual {
    let rendered = match (&job.base, job.sequence.last()) {
        (Some(base), Some(step)) => apply_transform(step, base, initial),
        (Some(base), None) => Ok((**base).clone()),
        (None, _) => apply_sequence(initial, &job.sequence),
    };
    let scored = rendered.and_then(|image| {
        let raw = scorer.score(&image)?;
        let s = ssim(&image, initial)?;
        Ok((image, raw, s))
    });
    match scored {
        Ok((image, raw, s)) => Individual {
            fitness: canonical_fitness(raw, s, config.min_ssim),
            sequence: job.sequence,
            image: Some(Arc::new(image)),
            raw_score: Some(raw),
            ssim_to_initial: s,
            error: None,
            birth: job.birth,
        },
        Err(e) => Individual {
            sequence: job.sequence,
            image: None,
            raw_score: None,
            ssim_to_initial: f64::NAN,
            fitness: FAILED_FITNESS,
            error: Some(e.to_string()),
            birth: job.birth,
        },
    }
}

fn render_all(
    jobs: Vec<Job>,
    initial: &Image,
    config: &EvolveConfig,
    scorer: &dyn Scorer,
) -> Vec<Individual> {
    jobs.into_par_iter()
        .map(|job| evaluate(job, initial, config, scorer))
        .collect()
}

/// Member 0 is the untouched initial image; every other member gets one
/// random transform with probability 1/2. Fails if the initial image itself
/// cannot be scored.
pub fn init_population<R: Rng + ?Sized>(
    initial: &Image,
    config: &EvolveConfig,
    scorer: &dyn Scorer,
    rng: &mut R,
) -> Result<Population> {
    config.validate()?;
    let mut pop = Population {
        members: Vec::with_capacity(config.population_size + CHILDREN_PER_EPOCH),
        next_birth: 0,
    };
    let raw = scorer.score(initial)?;
    let s = ssim(initial, initial)?;
    let birth = pop.take_birth();
    pop.members.push(Individual {
        sequence: Vec::new(),
        image: Some(Arc::new(initial.clone())),
        raw_score: Some(raw),
        ssim_to_initial: s,
        fitness: canonical_fitness(raw, s, config.min_ssim),
        error: None,
        birth,
    });

    let base = Arc::new(initial.clone());
    let jobs: Vec<Job> = (1..config.population_size)
        .map(|_| {
            let sequence = if rng.random_bool(0.5) {
                vec![random_transform(rng)]
            } else {
                Vec::new()
            };
            Job {
                sequence,
                base: Some(base.clone()),
                birth: pop.take_birth(),
            }
        })
        .collect();
    pop.members
        .extend(render_all(jobs, initial, config, scorer));
    Ok(pop)
}

/// Child sequence from `parent` plus `step`; at the length cap the last step
/// is replaced and the child is rendered from scratch.
fn child_job(parent: &Individual, step: TransformSpec, max_len: usize, birth: u64) -> Job {
    let mut sequence = parent.sequence.clone();
    let mut base = parent.image.clone();
    if sequence.len() >= max_len {
        sequence.truncate(max_len - 1);
        base = None;
    }
    sequence.push(step);
    Job {
        sequence,
        base,
        birth,
    }
}

/// One epoch: three children added, three worst members removed.
pub fn epoch_step<R: Rng + ?Sized>(
    pop: &mut Population,
    initial: &Image,
    config: &EvolveConfig,
    scorer: &dyn Scorer,
    rng: &mut R,
) {
    let n = pop.len();
    let best_idx = pop
        .members
        .iter()
        .enumerate()
        .min_by(|a, b| best_order(a.1, b.1))
        .map(|(i, _)| i)
        .expect("population is never empty");

    let step_a = random_transform(rng);
    let idx_b = rng.random_range(0..n);
    let step_b = random_transform(rng);
    let idx_c = rng.random_range(0..n);
    let step_c = stack_step(rng);

    let max = config.max_sequence_len;
    let jobs = vec![
        child_job(&pop.members[best_idx], step_a, max, pop.next_birth),
        child_job(&pop.members[idx_b], step_b, max, pop.next_birth + 1),
        child_job(&pop.members[idx_c], step_c, max, pop.next_birth + 2),
    ];
    pop.next_birth += CHILDREN_PER_EPOCH as u64;
    pop.members
        .extend(render_all(jobs, initial, config, scorer));

    pop.members.sort_by(cull_order);
    pop.members.drain(..CHILDREN_PER_EPOCH);
    pop.members.sort_by_key(|m| m.birth);
}

/// Outcome of a full search.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub best: Individual,
    /// The untouched initial image as scored by the search.
    pub baseline: Individual,
    pub trace: Trace,
    /// Best fitness after initialization and after every epoch.
    pub best_fitness_history: Vec<f64>,
}

/// Runs the search with the scorer described by `config.scorer`.
pub fn evolve(initial: &Image, config: &EvolveConfig) -> Result<Evolution> {
    config.validate()?;
    let scorer = config.scorer.build()?;
    evolve_with(initial, config, scorer.as_ref())
}

/// Runs the search with a caller-supplied scorer; `config.scorer` is only
/// recorded in the trace.
pub fn evolve_with(
    initial: &Image,
    config: &EvolveConfig,
    scorer: &dyn Scorer,
) -> Result<Evolution> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pop = init_population(initial, config, scorer, &mut rng)?;
    let baseline = pop.members[0].clone();
    let mut history = Vec::with_capacity(config.epochs + 1);
    history.push(pop.best().fitness);
    for _ in 0..config.epochs {
        epoch_step(&mut pop, initial, config, scorer, &mut rng);
        history.push(pop.best().fitness);
    }

    let candidate = pop.best();
    let best = if candidate.is_penalized(config.min_ssim) {
        baseline.clone()
    } else {
        candidate.clone()
    };
    let best_image = best
        .image
        .as_deref()
        .expect("unpenalized members are rendered");
    let trace = Trace {
        format_version: FORMAT_VERSION,
        source_hash: initial.content_hash(),
        seed: config.seed,
        config: TraceConfig::from(config),
        steps: best.sequence.clone(),
        result_hash: best_image.content_hash(),
        scores: TraceScores {
            raw_before: raw_value(&baseline),
            raw_after: raw_value(&best),
            ssim_final: best.ssim_to_initial,
            noise_sigma_before: noise_sigma(initial)?,
            noise_sigma_after: noise_sigma(best_image)?,
        },
    };
    Ok(Evolution {
        best,
        baseline,
        trace,
        best_fitness_history: history,
    })
}

fn raw_value(ind: &Individual) -> f64 {
    ind.raw_score.map_or(f64::NAN, |s| s.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(f64);

    impl Scorer for Constant {
        fn score(&self, _: &Image) -> Result<QualityScore> {
            Ok(QualityScore::new(self.0, Orientation::HigherBetter))
        }
        fn orientation(&self) -> Orientation {
            Orientation::HigherBetter
        }
    }

    /// Prefers brighter images.
    struct Brightness;

    impl Scorer for Brightness {
        fn score(&self, image: &Image) -> Result<QualityScore> {
            let mean = image.data().iter().sum::<f64>() / image.data().len() as f64;
            Ok(QualityScore::new(mean, Orientation::HigherBetter))
        }
        fn orientation(&self) -> Orientation {
            Orientation::HigherBetter
        }
    }

    fn test_image() -> Image {
        Image::from_fn(24, 20, 3, |x, y, c| {
            0.2 + 0.5 * (((x * 5 + y * 3 + c * 7) % 17) as f64 / 16.0)
        })
        .unwrap()
    }

    fn config(seed: u64) -> EvolveConfig {
        EvolveConfig {
            population_size: 5,
            epochs: 6,
            seed,
            ..EvolveConfig::default()
        }
    }

    #[test]
    fn fitness_examples() {
        let lower = QualityScore::new(30.0, Orientation::LowerBetter);
        let higher = QualityScore::new(5.2, Orientation::HigherBetter);
        assert_eq!(canonical_fitness(lower, 0.9, 0.5), -30.0);
        assert_eq!(canonical_fitness(higher, 0.9, 0.5), 5.2);
        assert_eq!(canonical_fitness(higher, 0.4, 0.5), 5.2 - 1e6);
        assert_eq!(canonical_fitness(higher, 0.5, 0.5), 5.2);
    }

    #[test]
    fn config_validation() {
        assert!(EvolveConfig::default().validate().is_ok());
        for bad in [
            EvolveConfig {
                population_size: 1,
                ..Default::default()
            },
            EvolveConfig {
                epochs: 0,
                ..Default::default()
            },
            EvolveConfig {
                min_ssim: 1.5,
                ..Default::default()
            },
            EvolveConfig {
                max_sequence_len: 0,
                ..Default::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn random_transform_is_valid_and_never_stacks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let t = random_transform(&mut rng);
            assert_ne!(t.op(), Op::StackInitial);
            for (range, &v) in t.op().params().iter().zip(t.values()) {
                assert!(range.contains(v));
            }
        }
    }

    #[test]
    fn init_keeps_an_untouched_clone() {
        let img = test_image();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pop = init_population(&img, &config(1), &Constant(1.0), &mut rng).unwrap();
        assert_eq!(pop.len(), 5);
        assert!(pop.members[0].sequence.is_empty());
        assert_eq!(pop.members[0].fitness, 1.0);
        assert!(pop.members.iter().all(|m| m.sequence.len() <= 1));
    }

    #[test]
    fn init_fails_when_initial_cannot_be_scored() {
        let tiny = Image::filled(4, 4, 1, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(init_population(&tiny, &config(1), &Constant(1.0), &mut rng).is_err());
    }

    #[test]
    fn epoch_keeps_size_and_best() {
        let img = test_image();
        let cfg = config(9);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut pop = init_population(&img, &cfg, &Brightness, &mut rng).unwrap();
        let mut best = pop.best().fitness;
        for _ in 0..10 {
            epoch_step(&mut pop, &img, &cfg, &Brightness, &mut rng);
            assert_eq!(pop.len(), 5);
            assert!(pop.best().fitness >= best);
            best = pop.best().fitness;
        }
    }

    #[test]
    fn members_replay_from_initial() {
        let img = test_image();
        let cfg = EvolveConfig {
            max_sequence_len: 2,
            epochs: 12,
            ..config(4)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut pop = init_population(&img, &cfg, &Brightness, &mut rng).unwrap();
        for _ in 0..cfg.epochs {
            epoch_step(&mut pop, &img, &cfg, &Brightness, &mut rng);
        }
        for m in &pop.members {
            assert!(m.sequence.len() <= 2);
            if let Some(image) = &m.image {
                assert_eq!(**image, apply_sequence(&img, &m.sequence).unwrap());
            }
        }
    }

    #[test]
    fn tie_breaks() {
        let ind = |len: usize, fitness: f64, birth: u64| Individual {
            sequence: vec![TransformSpec::new("hist_equalize", &[]).unwrap(); len],
            image: None,
            raw_score: None,
            ssim_to_initial: 1.0,
            fitness,
            error: None,
            birth,
        };
        let pop = Population {
            members: vec![
                ind(2, 1.0, 0),
                ind(1, 1.0, 1),
                ind(1, 1.0, 2),
                ind(0, 0.5, 3),
            ],
            next_birth: 4,
        };
        assert_eq!(pop.best().birth, 1);
        let mut members = pop.members.clone();
        members.sort_by(cull_order);
        let order: Vec<u64> = members.iter().map(|m| m.birth).collect();
        assert_eq!(order, vec![3, 0, 1, 2]);
    }

    #[test]
    fn constant_scorer_keeps_baseline_fitness() {
        let img = test_image();
        let cfg = EvolveConfig {
            epochs: 1,
            ..config(2)
        };
        let run = evolve_with(&img, &cfg, &Constant(3.0)).unwrap();
        assert_eq!(run.best.fitness, run.baseline.fitness);
        assert_eq!(run.best_fitness_history.len(), 2);
    }
}
