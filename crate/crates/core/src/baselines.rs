//! Lifespan-as-fitness baselines: an evolution strategy and an elitist GA.
//!
//! Both draw every episode seed from the run's master stream before any
//! evaluation starts, so evaluations can be spread over threads without
//! changing results.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::{DeathCause, EnvSpec};
use crate::episode::run_genome_episode;
use crate::error::{Error, Result};
use crate::genome::{mutate_in_place, new_random_genome, Genome, MutationConfig, PolicySpec};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessShaping {
    /// Ranks (ties averaged) mapped linearly onto `[-0.5, 0.5]`.
    #[default]
    CenteredRank,
    /// Raw fitness values, unmodified.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EaConfig {
    pub population_size: usize,
    pub mutation_scale: f64,
    pub mutation_scale_decay: f64,
    pub learning_rate: f64,
    pub learning_rate_decay: f64,
    pub weight_decay: f64,
    pub fitness_shaping: FitnessShaping,
    /// Evaluate perturbations in `±ε` pairs.
    pub antithetic: bool,
    /// Every member of a generation faces the same episode seed.
    pub common_random_numbers: bool,
}

impl Default for EaConfig {
    fn default() -> Self {
        Self {
            population_size: 48,
            mutation_scale: 0.1,
            mutation_scale_decay: 0.999,
            learning_rate: 0.1,
            learning_rate_decay: 0.999,
            weight_decay: 0.01,
            fitness_shaping: FitnessShaping::CenteredRank,
            antithetic: false,
            common_random_numbers: false,
        }
    }
}

impl EaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::config("ea.population_size", "must be at least 2"));
        }
        if self.antithetic && !self.population_size.is_multiple_of(2) {
            return Err(Error::config("ea.population_size", "must be even with antithetic sampling"));
        }
        if !(self.mutation_scale > 0.0 && self.mutation_scale.is_finite()) {
            return Err(Error::config("ea.mutation_scale", "must be > 0"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("ea.learning_rate", "must be > 0"));
        }
        for (field, d) in [
            ("ea.mutation_scale_decay", self.mutation_scale_decay),
            ("ea.learning_rate_decay", self.learning_rate_decay),
        ] {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::config(field, "must lie in (0, 1]"));
            }
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config("ea.weight_decay", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    pub population_size: usize,
    pub elite_size: usize,
    pub mutation_scale: f64,
    pub weight_decay: f64,
    pub common_random_numbers: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 128,
            elite_size: 8,
            mutation_scale: 0.005,
            weight_decay: 0.01,
            common_random_numbers: false,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.elite_size == 0 || self.elite_size >= self.population_size {
            return Err(Error::config(
                "ga.elite_size",
                "must satisfy 1 <= elite_size < population_size",
            ));
        }
        if !(self.mutation_scale >= 0.0 && self.mutation_scale.is_finite()) {
            return Err(Error::config("ga.mutation_scale", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.weight_decay) {
            return Err(Error::config("ga.weight_decay", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Fitness of one candidate plus how its episode ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub cause: Option<DeathCause>,
}

impl Evaluation {
    pub fn score(fitness: f64) -> Self {
        Self { fitness, cause: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    /// One entry per evaluated candidate, in member order.
    pub evaluations: Vec<Evaluation>,
    pub best: f64,
    pub mean: f64,
}

impl GenerationStats {
    fn new(evaluations: Vec<Evaluation>) -> Self {
        let best = evaluations.iter().map(|e| e.fitness).fold(f64::NEG_INFINITY, f64::max);
        let mean = evaluations.iter().map(|e| e.fitness).sum::<f64>() / evaluations.len() as f64;
        Self { evaluations, best, mean }
    }
}

/// Lifespan of `genome` over one episode seeded with `seed`.
///
/// Needs a finite-lifespan environment: without a time cap a good policy
/// would never return.
pub fn evaluate_lifespan(
    genome: &Genome,
    env_spec: &EnvSpec,
    policy_spec: &PolicySpec,
    seed: u64,
) -> Result<u64> {
    Ok(evaluate_episode(genome, env_spec, policy_spec, seed)?.fitness as u64)
}

fn evaluate_episode(
    genome: &Genome,
    env_spec: &EnvSpec,
    policy_spec: &PolicySpec,
    seed: u64,
) -> Result<Evaluation> {
    if env_spec.time_cap.is_none() {
        return Err(Error::config(
            "env.time_cap",
            format!("{} needs a time cap for lifespan fitness", env_spec.env_id),
        ));
    }
    let mut rng = RngStream::new(seed);
    let outcome = run_genome_episode(genome, policy_spec, env_spec, &mut rng, None, None)?;
    Ok(Evaluation {
        fitness: outcome.lifespan as f64,
        cause: outcome.cause,
    })
}

/// Centered ranks: ascending rank `r` (ties share their average rank) maps
/// to `r / (n - 1) - 0.5`.
pub fn centered_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks.iter().map(|r| r / (n - 1) as f64 - 0.5).collect()
}

/// Search distribution of the evolution strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct EaState {
    pub center: Genome,
    pub mutation_scale: f64,
    pub learning_rate: f64,
}

impl EaState {
    pub fn new(center: Genome, cfg: &EaConfig) -> Self {
        Self {
            center,
            mutation_scale: cfg.mutation_scale,
            learning_rate: cfg.learning_rate,
        }
    }
}

fn evaluate_all<F>(candidates: &[Genome], seeds: &[u64], fitness: &F) -> Result<Vec<Evaluation>>
where
    F: Fn(&Genome, u64) -> Result<Evaluation> + Sync,
{
    candidates
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(g, &s)| fitness(g, s))
        .collect()
}

fn draw_seeds(n: usize, common: bool, rng: &mut RngStream) -> Vec<u64> {
    if common {
        vec![rng.next_seed(); n]
    } else {
        (0..n).map(|_| rng.next_seed()).collect()
    }
}

/// One ES update.
///
/// Draws `population_size` standard-normal directions (with antithetic
/// sampling, odd members mirror the previous one), then the episode seeds,
/// evaluates `center + σ·ε_i`, shapes the fitnesses and moves the centre by
/// `α/(nσ)·Σ shaped_i·ε_i − α·weight_decay·center`. Both σ and α then decay.
pub fn ea_generation<F>(
    state: &mut EaState,
    cfg: &EaConfig,
    rng: &mut RngStream,
    fitness: F,
) -> Result<GenerationStats>
where
    F: Fn(&Genome, u64) -> Result<Evaluation> + Sync,
{
    cfg.validate()?;
    if state.mutation_scale <= 0.0 || state.mutation_scale.is_nan() {
        return Err(Error::config("ea.mutation_scale", "current scale is zero"));
    }
    let n = cfg.population_size;
    let dim = state.center.len();
    let sigma = state.mutation_scale;

    let mut noise: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        if cfg.antithetic && i % 2 == 1 {
            let mirrored = noise[i - 1].iter().map(|e| -e).collect();
            noise.push(mirrored);
        } else {
            noise.push((0..dim).map(|_| rng.normal()).collect());
        }
    }
    let seeds = draw_seeds(n, cfg.common_random_numbers, rng);

    let center = state.center.weights();
    let candidates: Vec<Genome> = noise
        .iter()
        .map(|eps| Genome::from_raw(center.iter().zip(eps).map(|(c, e)| c + sigma * e).collect()))
        .collect();
    let evaluations = evaluate_all(&candidates, &seeds, &fitness)?;

    let raw: Vec<f64> = evaluations.iter().map(|e| e.fitness).collect();
    let shaped = match cfg.fitness_shaping {
        FitnessShaping::CenteredRank => centered_ranks(&raw),
        FitnessShaping::Raw => raw,
    };
    let mut step = vec![0.0; dim];
    for (s, eps) in shaped.iter().zip(&noise) {
        for (acc, e) in step.iter_mut().zip(eps) {
            *acc += s * e;
        }
    }
    let alpha = state.learning_rate;
    let gain = alpha / (n as f64 * sigma);
    let decay = alpha * cfg.weight_decay;
    let next: Vec<f64> = center
        .iter()
        .zip(&step)
        .map(|(c, g)| c + gain * g - decay * c)
        .collect();
    state.center = Genome::from_raw(next);
    state.mutation_scale *= cfg.mutation_scale_decay;
    state.learning_rate *= cfg.learning_rate_decay;
    Ok(GenerationStats::new(evaluations))
}

/// One generation of elitist selection.
///
/// Evaluates `population` (one seed per member, drawn up front), ranks it by
/// descending fitness with ties going to the lower index, copies the top
/// `elite_size` verbatim into the next population (best first) and fills
/// the rest with children: pick an elite uniformly, shrink it by
/// `1 - weight_decay`, add `N(0, mutation_scale²)` noise to every weight.
pub fn ga_generation<F>(
    population: &mut Vec<Genome>,
    cfg: &GaConfig,
    rng: &mut RngStream,
    fitness: F,
) -> Result<GenerationStats>
where
    F: Fn(&Genome, u64) -> Result<Evaluation> + Sync,
{
    cfg.validate()?;
    if population.len() != cfg.population_size {
        return Err(Error::Dimension {
            what: "GA population",
            expected: cfg.population_size,
            actual: population.len(),
        });
    }
    let seeds = draw_seeds(population.len(), cfg.common_random_numbers, rng);
    let evaluations = evaluate_all(population, &seeds, &fitness)?;

    let mut order: Vec<usize> = (0..population.len()).collect();
    // stable: equal fitness keeps the lower index first
    order.sort_by(|&a, &b| evaluations[b].fitness.total_cmp(&evaluations[a].fitness));
    let elites: Vec<Genome> = order[..cfg.elite_size]
        .iter()
        .map(|&i| population[i].clone())
        .collect();

    let mutation = MutationConfig {
        scale: cfg.mutation_scale,
        per_weight_prob: 1.0,
    };
    let mut next = elites.clone();
    while next.len() < cfg.population_size {
        let parent = &elites[rng.below(elites.len())];
        let mut child = parent.scaled(1.0 - cfg.weight_decay);
        mutate_in_place(&mut child, &mutation, rng);
        next.push(child);
    }
    *population = next;
    Ok(GenerationStats::new(evaluations))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Ea,
    Ga,
}

/// One episode evaluation inside a baseline run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitnessRecord {
    pub generation: u64,
    pub member: usize,
    pub lifespan: u64,
    pub cause: Option<DeathCause>,
}

/// Runs `generations` generations of `method` on `env_spec`, logging every
/// episode evaluation.
#[allow(clippy::too_many_arguments)]
pub fn baseline_run(
    method: BaselineMethod,
    env_spec: &EnvSpec,
    policy_spec: &PolicySpec,
    ea: &EaConfig,
    ga: &GaConfig,
    init_scale: f64,
    generations: u64,
    seed: u64,
) -> Result<Vec<FitnessRecord>> {
    baseline_run_with(method, env_spec, policy_spec, ea, ga, init_scale, generations, seed, |_, _| {})
}

/// [`baseline_run`] with a callback after every generation (generation index,
/// evaluations of that generation).
#[allow(clippy::too_many_arguments)]
pub fn baseline_run_with<C>(
    method: BaselineMethod,
    env_spec: &EnvSpec,
    policy_spec: &PolicySpec,
    ea: &EaConfig,
    ga: &GaConfig,
    init_scale: f64,
    generations: u64,
    seed: u64,
    mut on_generation: C,
) -> Result<Vec<FitnessRecord>>
where
    C: FnMut(u64, &GenerationStats),
{
    if generations == 0 {
        return Err(Error::config("budget", "generations must be at least 1"));
    }
    env_spec.validate()?;
    env_spec.check_policy(policy_spec)?;
    if env_spec.time_cap.is_none() {
        return Err(Error::config(
            "env.time_cap",
            format!("{} needs a time cap for lifespan fitness", env_spec.env_id),
        ));
    }
    let mut rng = RngStream::new(seed);
    let fitness = |g: &Genome, s: u64| evaluate_episode(g, env_spec, policy_spec, s);
    let mut log = Vec::new();
    let record = |generation: u64, stats: &GenerationStats, log: &mut Vec<FitnessRecord>| {
        for (member, e) in stats.evaluations.iter().enumerate() {
            log.push(FitnessRecord {
                generation,
                member,
                lifespan: e.fitness as u64,
                cause: e.cause,
            });
        }
    };
    match method {
        BaselineMethod::Ea => {
            ea.validate()?;
            let center = new_random_genome(policy_spec, init_scale, &mut rng);
            let mut state = EaState::new(center, ea);
            for g in 0..generations {
                let stats = ea_generation(&mut state, ea, &mut rng, fitness)?;
                record(g, &stats, &mut log);
                on_generation(g, &stats);
            }
        }
        BaselineMethod::Ga => {
            ga.validate()?;
            let mut population: Vec<Genome> = (0..ga.population_size)
                .map(|_| new_random_genome(policy_spec, init_scale, &mut rng))
                .collect();
            for g in 0..generations {
                let stats = ga_generation(&mut population, ga, &mut rng, fitness)?;
                record(g, &stats, &mut log);
                on_generation(g, &stats);
            }
        }
    }
    Ok(log)
}
