//! Elitist evolutionary pretraining of the loss network.
//!
//! Each generation draws a Monte-Carlo set of sample pairs, scores every
//! individual on it, keeps the lowest-fitness elites, and refills the rest
//! by mutating uniformly chosen elites. A child must not score worse than
//! its parent on the same pair set; after `max_attempts` rejected tries the
//! slot takes the last child anyway. The mutation step size adapts to the
//! best individual's trend accuracy: exploration while ranking is still
//! poor, fine-tuning once it crosses the threshold.
//!
//! Chaotic mutation scales each mutation event by one logistic-map
//! coefficient, so step magnitudes follow the map's bursty arcsine
//! statistics instead of a fixed schedule.
//!
//! Fitness estimates are noisy, so the run also scores each generation's
//! best individual on a fixed validation pair set and tracks the running
//! minimum; that monotone curve and its argmin are what the run reports.

use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chaos::ChaosState;
use crate::fitness::{
    batch_loss_and_grad, estimate_fitness, evaluate, EvalSet, FitnessReport,
};
use crate::lossnet::{LossGradients, LossNetParams, Workspace, DEFAULT_INIT_SCALE};
use crate::probspace::MixtureConfig;
use crate::seeds;
use crate::{Error, Result};

/// How mutation steps are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationMode {
    /// Plain Gaussian steps of fixed standard deviation `sigma`.
    Normal,
    /// Gaussian steps scaled by a logistic-map coefficient drawn once per
    /// mutation event, with an independent random sign per parameter.
    Chaotic,
}

impl std::fmt::Display for MutationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MutationMode::Normal => "normal",
            MutationMode::Chaotic => "chaotic",
        })
    }
}

impl FromStr for MutationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(MutationMode::Normal),
            "chaotic" => Ok(MutationMode::Chaotic),
            other => Err(Error::InvalidArgument(format!(
                "unknown mutation mode `{other}` (expected `normal` or `chaotic`)"
            ))),
        }
    }
}

/// Search hyperparameters. Deserialization is strict: every field must be
/// present and unknown fields are rejected, so a config file documents the
/// full search setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    /// Individuals per generation.
    pub population_size: usize,
    /// Lowest-fitness individuals carried over unchanged.
    pub elite_count: usize,
    /// Generations to run.
    pub generations: usize,
    /// Monte-Carlo batches per fitness estimate.
    pub batches: usize,
    /// Sample pairs per batch.
    pub pairs_per_batch: usize,
    /// Mutation scale while the best accuracy is below the threshold.
    pub sigma_high: f64,
    /// Mutation scale once the threshold is reached.
    pub sigma_low: f64,
    /// Trend-accuracy threshold switching sigma_high to sigma_low.
    pub accuracy_threshold: f64,
    /// Mutation attempts per refill slot before accepting the last child.
    pub max_attempts: usize,
    /// Classes in the probability vectors.
    pub class_count: usize,
    /// Weight-initialization scale for the starting population.
    pub init_scale: f64,
    /// Size of the fixed validation pair set.
    pub validation_pairs: usize,
    /// Score all individuals of a generation on one shared pair set
    /// (variance reduction through common random draws). When false every
    /// evaluation draws fresh pairs.
    pub shared_pairs: bool,
    /// Threads used to score a generation; mutation stays sequential.
    pub workers: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 6,
            elite_count: 2,
            generations: 80,
            batches: 4,
            pairs_per_batch: 1024,
            sigma_high: 0.20,
            sigma_low: 0.01,
            accuracy_threshold: 0.95,
            max_attempts: 8,
            class_count: 10,
            init_scale: DEFAULT_INIT_SCALE,
            validation_pairs: 8192,
            shared_pairs: true,
            workers: 1,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::InvalidArgument(format!(
                "population_size = {} must be at least 2",
                self.population_size
            )));
        }
        if self.elite_count == 0 || self.elite_count >= self.population_size {
            return Err(Error::InvalidArgument(format!(
                "elite_count = {} must lie in [1, population_size)",
                self.elite_count
            )));
        }
        if self.generations == 0 {
            return Err(Error::InvalidArgument("generations must be positive".into()));
        }
        if self.batches == 0 || self.pairs_per_batch == 0 {
            return Err(Error::InvalidArgument(
                "batches and pairs_per_batch must be positive".into(),
            ));
        }
        if !(self.sigma_high > 0.0 && self.sigma_high.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma_high = {} must be positive",
                self.sigma_high
            )));
        }
        if !(self.sigma_low > 0.0 && self.sigma_low.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma_low = {} must be positive",
                self.sigma_low
            )));
        }
        if self.sigma_low > self.sigma_high {
            return Err(Error::InvalidArgument(format!(
                "sigma_low = {} exceeds sigma_high = {}",
                self.sigma_low, self.sigma_high
            )));
        }
        if !(0.0..=1.0).contains(&self.accuracy_threshold) {
            return Err(Error::InvalidArgument(format!(
                "accuracy_threshold = {} must lie in [0, 1]",
                self.accuracy_threshold
            )));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidArgument("max_attempts must be positive".into()));
        }
        if self.class_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "class_count = {} must be at least 2",
                self.class_count
            )));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "init_scale = {} must be positive",
                self.init_scale
            )));
        }
        if self.validation_pairs == 0 {
            return Err(Error::InvalidArgument(
                "validation_pairs must be positive".into(),
            ));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("workers must be positive".into()));
        }
        Ok(())
    }
}

/// Pick the mutation scale from the best individual's trend accuracy.
/// Reaching the threshold exactly already counts as converged.
pub fn select_sigma(best_accuracy: f64, cfg: &EvolutionConfig) -> f64 {
    if best_accuracy < cfg.accuracy_threshold {
        cfg.sigma_high
    } else {
        cfg.sigma_low
    }
}

/// Gaussian mutation: every parameter moves by `sigma * eps`.
pub fn mutate_normal<R: Rng + ?Sized>(
    parent: &LossNetParams,
    sigma: f64,
    rng: &mut R,
) -> LossNetParams {
    let mut child = parent.clone();
    for v in child.flat_mut() {
        let eps: f64 = rng.sample(StandardNormal);
        *v += sigma * eps;
    }
    child
}

/// Chaos-scaled mutation: every parameter moves by
/// `sigma * coefficient * d * eps` with a fresh sign `d` and Gaussian
/// magnitude per parameter. The coefficient comes from one logistic-map
/// step and is shared by the whole event. Per parameter the sign is drawn
/// before the magnitude.
pub fn mutate_chaotic<R: Rng + ?Sized>(
    parent: &LossNetParams,
    sigma: f64,
    coefficient: f64,
    rng: &mut R,
) -> LossNetParams {
    let mut child = parent.clone();
    let scale = sigma * coefficient;
    for v in child.flat_mut() {
        let d = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let eps: f64 = rng.sample(StandardNormal);
        *v += scale * d * eps;
    }
    child
}

/// One scored individual.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub params: LossNetParams,
    /// Monte-Carlo fitness on the generation's pair set; lower is better.
    pub fitness: f64,
    /// Trend accuracy on the same set.
    pub accuracy: f64,
    /// Generation whose refill produced these parameters; 0 for the
    /// initial population. Elites carry their lineage forward unchanged.
    pub lineage: usize,
}

/// Per-generation log row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Mutation scale used for this generation's refill.
    pub sigma: f64,
    /// Best (lowest) fitness in the scored population.
    pub best_fitness: f64,
    pub mean_fitness: f64,
    /// Trend accuracy of the best individual.
    pub best_accuracy: f64,
    pub mean_accuracy: f64,
    /// Fixed-set score of this generation's best individual.
    pub val_fitness: f64,
    pub val_accuracy: f64,
    /// Running minimum of `val_fitness`; never increases.
    pub global_best_fitness: f64,
    /// Mutation attempts spent refilling after this generation.
    pub refill_attempts: usize,
    /// Smallest chaos coefficient drawn this generation; absent in normal
    /// mode.
    pub chaos_min: Option<f64>,
    /// Mean chaos coefficient this generation; absent in normal mode.
    pub chaos_mean: Option<f64>,
    /// Largest chaos coefficient this generation; absent in normal mode.
    pub chaos_max: Option<f64>,
    /// Cumulative chaotic-orbit reseeds (0 in normal mode).
    pub chaos_reseeds: u64,
}

/// Outcome of one evolutionary run.
#[derive(Debug, Clone)]
pub struct RunResult {
    /// Parameters with the lowest validation fitness seen in the run.
    pub best: LossNetParams,
    pub best_fitness: f64,
    pub best_accuracy: f64,
    /// Generation (0-based) where the final best first appeared.
    pub best_generation: usize,
    /// Population after the last refill, sorted by fitness.
    pub final_population: Vec<Candidate>,
    pub history: Vec<GenerationRecord>,
}

enum EvalPlan<'a> {
    Shared(&'a EvalSet),
    Fresh { seed: u64, generation: usize },
}

impl EvalPlan<'_> {
    fn score(
        &self,
        net: &LossNetParams,
        cfg: &EvolutionConfig,
        mixture: &MixtureConfig,
        slot: usize,
        ws: &mut Workspace,
    ) -> Result<FitnessReport> {
        match self {
            EvalPlan::Shared(set) => evaluate(net, set, ws),
            EvalPlan::Fresh { seed, generation } => {
                let idx = (*generation as u64) << 16 | slot as u64;
                let mut rng = seeds::stream(*seed, seeds::tag::GEN_PAIRS, idx);
                estimate_fitness(net, mixture, cfg.batches, cfg.pairs_per_batch, &mut rng, ws)
            }
        }
    }
}

fn score_population(
    nets: &[LossNetParams],
    plan: &EvalPlan<'_>,
    cfg: &EvolutionConfig,
    mixture: &MixtureConfig,
) -> Result<Vec<FitnessReport>> {
    let workers = cfg.workers.min(nets.len()).max(1);
    if workers == 1 {
        let mut ws = nets[0].workspace();
        return nets
            .iter()
            .enumerate()
            .map(|(i, net)| plan.score(net, cfg, mixture, i, &mut ws))
            .collect();
    }
    let mut results: Vec<Option<Result<FitnessReport>>> = (0..nets.len()).map(|_| None).collect();
    let chunk = nets.len().div_ceil(workers);
    std::thread::scope(|scope| {
        for (t, out_chunk) in results.chunks_mut(chunk).enumerate() {
            let base = t * chunk;
            let nets = &nets[base..base + out_chunk.len()];
            scope.spawn(move || {
                let mut ws = nets[0].workspace();
                for (j, net) in nets.iter().enumerate() {
                    out_chunk[j] = Some(plan.score(net, cfg, mixture, base + j, &mut ws));
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("worker filled slot")).collect()
}

/// Mutate `parent` until a child scores no worse, giving up after
/// `max_attempts` and keeping the last child. Returns the child, the
/// attempts spent, and whether it met the acceptance bound. Chaos
/// coefficients drawn along the way are appended to `coefficients`.
#[allow(clippy::too_many_arguments)]
fn refill_slot(
    parent: &Candidate,
    sigma: f64,
    mode: MutationMode,
    cfg: &EvolutionConfig,
    mixture: &MixtureConfig,
    plan: &EvalPlan<'_>,
    slot: usize,
    lineage: usize,
    chaos: &mut ChaosState,
    rng: &mut ChaCha8Rng,
    ws: &mut Workspace,
    coefficients: &mut Vec<f64>,
) -> Result<(Candidate, usize, bool)> {
    let mut last = None;
    for attempt in 1..=cfg.max_attempts {
        let params = match mode {
            MutationMode::Normal => mutate_normal(&parent.params, sigma, rng),
            MutationMode::Chaotic => {
                let coefficient = chaos.next();
                coefficients.push(coefficient);
                mutate_chaotic(&parent.params, sigma, coefficient, rng)
            }
        };
        let report = plan.score(&params, cfg, mixture, slot, ws)?;
        let child = Candidate {
            params,
            fitness: report.fitness,
            accuracy: report.accuracy,
            lineage,
        };
        if child.fitness <= parent.fitness {
            return Ok((child, attempt, true));
        }
        last = Some(child);
    }
    Ok((last.expect("max_attempts >= 1"), cfg.max_attempts, false))
}

/// Run the full search. `sink` receives every [`GenerationRecord`] as it is
/// produced, in order; the same records are returned in the result.
pub fn run_evolution(
    cfg: &EvolutionConfig,
    mixture: &MixtureConfig,
    mode: MutationMode,
    seed: u64,
    mut sink: impl FnMut(&GenerationRecord),
) -> Result<RunResult> {
    cfg.validate()?;
    mixture.validate()?;

    let mut val_rng = seeds::stream(seed, seeds::tag::VALIDATION, 0);
    let val_set = EvalSet::sample(mixture, cfg.class_count, cfg.validation_pairs, &mut val_rng)?;

    let mut evolve_rng = seeds::stream(seed, seeds::tag::EVOLVE, 0);
    let mut chaos = ChaosState::new(seeds::stream(seed, seeds::tag::CHAOS, 0));
    let mut ws = LossNetParams::zeros(cfg.class_count)?.workspace();

    let mut population: Vec<Candidate> = (0..cfg.population_size)
        .map(|i| {
            let mut rng = seeds::stream(seed, seeds::tag::INIT, i as u64);
            Ok(Candidate {
                params: LossNetParams::init(cfg.class_count, &mut rng, cfg.init_scale)?,
                fitness: f64::NAN,
                accuracy: 0.0,
                lineage: 0,
            })
        })
        .collect::<Result<_>>()?;

    let mut history = Vec::with_capacity(cfg.generations);
    let mut global_best_fitness = f64::INFINITY;
    let mut global_best_accuracy = 0.0;
    let mut global_best_generation = 0;
    let mut global_best: Option<LossNetParams> = None;

    for gen in 0..cfg.generations {
        let shared_set;
        let plan = if cfg.shared_pairs {
            let mut pair_rng = seeds::stream(seed, seeds::tag::GEN_PAIRS, gen as u64);
            shared_set = EvalSet::sample(
                mixture,
                cfg.class_count,
                cfg.batches * cfg.pairs_per_batch,
                &mut pair_rng,
            )?;
            EvalPlan::Shared(&shared_set)
        } else {
            EvalPlan::Fresh {
                seed,
                generation: gen,
            }
        };

        // Score the whole population on this generation's draw.
        let nets: Vec<LossNetParams> = population.iter().map(|c| c.params.clone()).collect();
        let reports = score_population(&nets, &plan, cfg, mixture)?;
        for (cand, report) in population.iter_mut().zip(reports.iter()) {
            cand.fitness = report.fitness;
            cand.accuracy = report.accuracy;
        }
        population.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));

        let best = &population[0];
        let mean_fitness =
            population.iter().map(|c| c.fitness).sum::<f64>() / population.len() as f64;
        let mean_accuracy =
            population.iter().map(|c| c.accuracy).sum::<f64>() / population.len() as f64;

        // Validation score of the generation champion; the running minimum
        // defines the reported best parameters.
        let val = evaluate(&best.params, &val_set, &mut ws)?;
        if val.fitness < global_best_fitness {
            global_best_fitness = val.fitness;
            global_best_accuracy = val.accuracy;
            global_best_generation = gen;
            global_best = Some(best.params.clone());
        }

        let sigma = select_sigma(best.accuracy, cfg);

        // Refill the non-elite slots from uniformly chosen elites. This is
        // sequential by construction: the chaotic orbit and the mutation
        // stream advance in a fixed order.
        let mut refill_attempts = 0;
        let mut coefficients = Vec::new();
        let mut next: Vec<Candidate> = population[..cfg.elite_count].to_vec();
        for slot in cfg.elite_count..cfg.population_size {
            let parent_idx = evolve_rng.random_range(0..cfg.elite_count);
            // Fresh-pair mode gives every slot its own draw, distinct from
            // the population-scoring draws.
            let eval_slot = cfg.population_size + slot;
            let (child, attempts, _) = refill_slot(
                &population[parent_idx],
                sigma,
                mode,
                cfg,
                mixture,
                &plan,
                eval_slot,
                gen,
                &mut chaos,
                &mut evolve_rng,
                &mut ws,
                &mut coefficients,
            )?;
            refill_attempts += attempts;
            next.push(child);
        }

        let chaos_min = coefficients.iter().copied().reduce(f64::min);
        let chaos_max = coefficients.iter().copied().reduce(f64::max);
        let chaos_mean = if coefficients.is_empty() {
            None
        } else {
            Some(coefficients.iter().sum::<f64>() / coefficients.len() as f64)
        };
        let record = GenerationRecord {
            generation: gen,
            sigma,
            best_fitness: best.fitness,
            mean_fitness,
            best_accuracy: best.accuracy,
            mean_accuracy,
            val_fitness: val.fitness,
            val_accuracy: val.accuracy,
            global_best_fitness,
            refill_attempts,
            chaos_min,
            chaos_mean,
            chaos_max,
            chaos_reseeds: chaos.reseeds(),
        };
        sink(&record);
        history.push(record);
        population = next;
    }

    population.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));
    Ok(RunResult {
        best: global_best.expect("at least one generation ran"),
        best_fitness: global_best_fitness,
        best_accuracy: global_best_accuracy,
        best_generation: global_best_generation,
        final_population: population,
        history,
    })
}

/// Gradient-descent baseline configuration. All fields have defaults, so a
/// config file may state only what it overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GdConfig {
    pub steps: usize,
    pub learning_rate: f64,
    /// First-moment decay of the Adam update. The ranking objective has a
    /// constant-output plateau with vanishing gradients; Adam's
    /// per-parameter normalization walks off it where plain steps stall.
    pub beta1: f64,
    /// Second-moment decay of the Adam update.
    pub beta2: f64,
    pub pairs_per_step: usize,
    pub class_count: usize,
    pub init_scale: f64,
    pub validation_pairs: usize,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            steps: 12_000,
            learning_rate: 0.025,
            beta1: 0.9,
            beta2: 0.999,
            pairs_per_step: 4096,
            class_count: 10,
            // Larger-than-unit init starts the network in the steep part of
            // the ranking objective; unit-scale inits spend most of the
            // budget growing the output scale before the ordering improves.
            init_scale: 2.25,
            validation_pairs: 8192,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.pairs_per_step == 0 || self.validation_pairs == 0 {
            return Err(Error::InvalidArgument(
                "steps, pairs_per_step, and validation_pairs must be positive".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate = {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidArgument(format!(
                "beta1 = {} and beta2 = {} must lie in [0, 1)",
                self.beta1, self.beta2
            )));
        }
        if self.class_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "class_count = {} must be at least 2",
                self.class_count
            )));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "init_scale = {} must be positive",
                self.init_scale
            )));
        }
        Ok(())
    }
}

/// One gradient step's log row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdStepRecord {
    pub step: usize,
    /// Ranking fitness on the step's fresh batch, before the update.
    pub train_fitness: f64,
    pub grad_norm: f64,
}

/// Outcome of the gradient-descent baseline.
#[derive(Debug, Clone)]
pub struct GdRunResult {
    pub params: LossNetParams,
    /// Score of the final parameters on the fixed validation set.
    pub final_val: FitnessReport,
    pub history: Vec<GdStepRecord>,
}

/// Descend the same ranking objective directly with Adam, one fresh
/// Monte-Carlo batch per step, using the network's exact gradients.
pub fn gd_pretrain(
    cfg: &GdConfig,
    mixture: &MixtureConfig,
    seed: u64,
    mut sink: impl FnMut(&GdStepRecord),
) -> Result<GdRunResult> {
    cfg.validate()?;
    mixture.validate()?;
    const ADAM_EPS: f64 = 1e-8;

    let mut init_rng = seeds::stream(seed, seeds::tag::INIT, 0);
    let mut params = LossNetParams::init(cfg.class_count, &mut init_rng, cfg.init_scale)?;
    let mut ws = params.workspace();
    let mut grads = LossGradients::zeros_like(&params);
    let mut first = vec![0.0; params.param_count()];
    let mut second = vec![0.0; params.param_count()];

    // Polyak tail average over the last quarter of the schedule. A single
    // final iterate keeps one sample of the stochastic-gradient noise; the
    // window mean cancels it. Short schedules (< 4 steps) skip the window
    // and return the raw final iterate.
    let avg_start = cfg.steps - cfg.steps / 4;
    let mut avg_sum = vec![0.0; params.param_count()];
    let mut avg_n = 0usize;

    let mut history = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let mut rng = seeds::stream(seed, seeds::tag::GD, step as u64);
        let batch = EvalSet::sample(mixture, cfg.class_count, cfg.pairs_per_step, &mut rng)?;
        let fitness = batch_loss_and_grad(&params, &batch, &mut ws, &mut grads)?;
        let grad_norm = grads.d_params.iter().map(|g| g * g).sum::<f64>().sqrt();
        // Cosine decay to zero removes the constant-rate noise floor of
        // stochastic Adam; the last steps polish at a vanishing rate.
        let progress = step as f64 / cfg.steps as f64;
        let lr = cfg.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        let bias1 = 1.0 - cfg.beta1.powi(step as i32 + 1);
        let bias2 = 1.0 - cfg.beta2.powi(step as i32 + 1);
        for (k, p) in params.flat_mut().iter_mut().enumerate() {
            let g = grads.d_params[k];
            first[k] = cfg.beta1 * first[k] + (1.0 - cfg.beta1) * g;
            second[k] = cfg.beta2 * second[k] + (1.0 - cfg.beta2) * g * g;
            let m_hat = first[k] / bias1;
            let v_hat = second[k] / bias2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
        if step >= avg_start {
            for (a, p) in avg_sum.iter_mut().zip(params.flat()) {
                *a += p;
            }
            avg_n += 1;
        }
        let record = GdStepRecord {
            step,
            train_fitness: fitness,
            grad_norm,
        };
        sink(&record);
        history.push(record);
    }

    if avg_n > 0 {
        for a in avg_sum.iter_mut() {
            *a /= avg_n as f64;
        }
        params = LossNetParams::from_flat(cfg.class_count, avg_sum)?;
    }

    let mut val_rng = seeds::stream(seed, seeds::tag::VALIDATION, 0);
    let val_set = EvalSet::sample(mixture, cfg.class_count, cfg.validation_pairs, &mut val_rng)?;
    let final_val = evaluate(&params, &val_set, &mut ws)?;
    Ok(GdRunResult {
        params,
        final_val,
        history,
    })
}
