//! Real-coded evolutionary engine: tournament selection, arithmetic
//! crossover, Gaussian mutation, elitist survival, non-dominated archiving,
//! and cooperative co-evolution across model implementations.
//!
//! Determinism: every random draw comes from a ChaCha stream derived from
//! (master_seed, generation, index), so fitness evaluations may run on any
//! number of threads and the result is bit-identical.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{fit_weights_ols, weighted_sum, EnsembleWeights, DEFAULT_TRAIN_FRACTION};
use crate::error::{Error, Result};
use crate::metrics::station_fitness;
use crate::models::{ModelEvaluator, ParameterSpace, Scenario};
use crate::rng;
use crate::series::{head_fraction, StationSeries};
use crate::tags::{Concept, Layer, OperatorTag};

// rng stream contexts
const CTX_INIT: u64 = 0x10;
const CTX_SELECT: u64 = 0x20;
const CTX_VARY: u64 = 0x30;

/// A candidate model: genotype plus cached phenotype and objective values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genotype: Vec<f64>,
    /// Present iff the individual has been evaluated.
    pub phenotype: Option<StationSeries>,
    /// Empty until evaluated. Objective 0 is the selection criterion.
    pub objectives: Vec<f64>,
    pub tag: OperatorTag,
    pub rng_stream_id: u64,
}

impl Individual {
    pub fn unevaluated(genotype: Vec<f64>, tag: OperatorTag, rng_stream_id: u64) -> Self {
        Individual {
            genotype,
            phenotype: None,
            objectives: Vec::new(),
            tag,
            rng_stream_id,
        }
    }

    pub fn is_evaluated(&self) -> bool {
        !self.objectives.is_empty()
    }

    pub fn primary(&self) -> f64 {
        self.objectives[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub members: Vec<Individual>,
    pub generation: usize,
}

/// Engine knobs. Defaults mirror the 10-individual, 5-generation budget of
/// the benchmark calibration setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub pop_size: usize,
    pub generations: usize,
    pub tournament_k: usize,
    /// Mutation sigma as a fraction of each parameter's bound range.
    pub mutation_sigma_fraction: f64,
    pub crossover_rate: f64,
    pub elitism: usize,
    pub master_seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            pop_size: 10,
            generations: 5,
            tournament_k: 2,
            mutation_sigma_fraction: 0.1,
            crossover_rate: 0.8,
            elitism: 1,
            master_seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size == 0 || self.generations == 0 {
            return Err(Error::Validation("pop_size and generations must be > 0".into()));
        }
        if self.tournament_k < 2 {
            return Err(Error::Validation("tournament_k must be >= 2".into()));
        }
        if !(self.mutation_sigma_fraction > 0.0 && self.mutation_sigma_fraction <= 1.0) {
            return Err(Error::Validation(
                "mutation_sigma_fraction must be in (0, 1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::Validation("crossover_rate must be in [0, 1]".into()));
        }
        if self.elitism >= self.pop_size {
            return Err(Error::Validation("elitism must be < pop_size".into()));
        }
        Ok(())
    }
}

/// `a` dominates `b` under minimization: <= in all objectives, < in one.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "objective length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub objectives: Vec<f64>,
    pub payload: Vec<f64>,
}

/// Non-dominated archive under minimization. Insertion drops newly
/// dominated entries; exact duplicates are ignored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    pub entries: Vec<ArchiveEntry>,
    pub capacity: Option<usize>,
}

impl ParetoArchive {
    pub fn new(capacity: Option<usize>) -> Self {
        ParetoArchive {
            entries: Vec::new(),
            capacity,
        }
    }

    /// Returns true if the entry was added.
    pub fn insert(&mut self, objectives: Vec<f64>, payload: Vec<f64>) -> Result<bool> {
        for e in &self.entries {
            if dominates(&e.objectives, &objectives)? {
                return Ok(false);
            }
            if e.objectives == objectives && e.payload == payload {
                return Ok(false);
            }
        }
        let mut keep = Vec::with_capacity(self.entries.len() + 1);
        for e in std::mem::take(&mut self.entries) {
            if !dominates(&objectives, &e.objectives)? {
                keep.push(e);
            }
        }
        keep.push(ArchiveEntry {
            objectives,
            payload,
        });
        self.entries = keep;
        if let Some(cap) = self.capacity {
            while self.entries.len() > cap {
                // drop the worst entry by first objective
                let worst = self
                    .entries
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.objectives[0].total_cmp(&b.1.objectives[0]))
                    .map(|(i, _)| i)
                    .unwrap();
                self.entries.remove(worst);
            }
        }
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// CSV with one objective per column, then genotype columns.
    pub fn to_csv(&self) -> String {
        let n_obj = self.entries.first().map_or(0, |e| e.objectives.len());
        let n_gen = self.entries.first().map_or(0, |e| e.payload.len());
        let mut header: Vec<String> = (0..n_obj).map(|i| format!("objective{i}")).collect();
        header.extend((0..n_gen).map(|i| format!("gene{i}")));
        let mut out = header.join(",");
        out.push('\n');
        for e in &self.entries {
            let row: Vec<String> = e
                .objectives
                .iter()
                .chain(&e.payload)
                .map(|v| v.to_string())
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best: Vec<f64>,
    pub mean: Vec<f64>,
    /// Cumulative model evaluations up to and including this generation.
    pub evaluations: usize,
}

/// Per-generation convergence curve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLog {
    pub records: Vec<GenerationRecord>,
}

impl ConvergenceLog {
    fn push(&mut self, pop: &Population, evaluations: usize) {
        let n_obj = pop.members[0].objectives.len();
        let mut best = vec![f64::INFINITY; n_obj];
        let mut mean = vec![0.0; n_obj];
        // best row = member with minimal primary objective
        let best_member = pop
            .members
            .iter()
            .min_by(|a, b| a.primary().total_cmp(&b.primary()))
            .unwrap();
        best.copy_from_slice(&best_member.objectives);
        for m in &pop.members {
            for (acc, o) in mean.iter_mut().zip(&m.objectives) {
                *acc += o / pop.members.len() as f64;
            }
        }
        self.records.push(GenerationRecord {
            generation: pop.generation,
            best,
            mean,
            evaluations,
        });
    }

    /// `generation,best,mean,evaluations` on the primary objective.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("generation,best,mean,evaluations\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.generation, r.best[0], r.mean[0], r.evaluations
            );
        }
        out
    }

    pub fn total_evaluations(&self) -> usize {
        self.records.last().map_or(0, |r| r.evaluations)
    }
}

fn init_tag() -> OperatorTag {
    // parameter identification from data
    OperatorTag::new(Layer::Data, Layer::Model, Concept::Quantitative, Concept::Quantitative)
}

fn offspring_tag() -> OperatorTag {
    // mutation acts within the model layer
    OperatorTag::intra(Layer::Model, Concept::Quantitative)
}

/// Create generation 0: uniform within bounds, with optional seeded
/// candidates filling the front of the population (out-of-bounds seeder
/// output is clamped and logged).
pub fn init_population(
    space: &ParameterSpace,
    config: &EvolutionConfig,
    seeder: Option<&[Vec<f64>]>,
) -> Result<Population> {
    config.validate()?;
    let mut members = Vec::with_capacity(config.pop_size);
    if let Some(candidates) = seeder {
        for (i, c) in candidates.iter().take(config.pop_size).enumerate() {
            let mut genotype = c.clone();
            if genotype.len() != space.dim() {
                return Err(Error::InvalidInput(format!(
                    "seeder candidate {i} has {} genes, space has {}",
                    genotype.len(),
                    space.dim()
                )));
            }
            if !space.contains(&genotype) {
                log::warn!("seeder candidate {i} out of bounds, clamping: {genotype:?}");
                space.clamp(&mut genotype);
            }
            members.push(Individual::unevaluated(genotype, init_tag(), i as u64));
        }
    }
    for i in members.len()..config.pop_size {
        let mut r = rng::stream(config.master_seed, CTX_INIT, i as u64);
        let genotype = space.sample_uniform(&mut r);
        members.push(Individual::unevaluated(genotype, init_tag(), i as u64));
    }
    Ok(Population {
        members,
        generation: 0,
    })
}

/// Evaluate every unevaluated member in parallel against observations.
/// Evaluator faults score +infinity instead of aborting the generation.
/// Returns the number of evaluations performed.
pub fn evaluate(
    pop: &mut Population,
    evaluator: &dyn ModelEvaluator,
    observations: &StationSeries,
) -> Result<usize> {
    let results: Vec<Option<(StationSeries, f64)>> = pop
        .members
        .par_iter()
        .map(|ind| {
            if ind.is_evaluated() {
                return None;
            }
            let scored = evaluator
                .evaluate(&ind.genotype)
                .and_then(|pred| {
                    let q = station_fitness(&pred, observations)?;
                    Ok((pred, q.value))
                })
                .unwrap_or_else(|e| {
                    log::warn!("evaluator fault on {:?}: {e}", ind.genotype);
                    (StationSeries::new(), f64::INFINITY)
                });
            Some(scored)
        })
        .collect();
    let mut count = 0;
    for (ind, res) in pop.members.iter_mut().zip(results) {
        if let Some((phenotype, objective)) = res {
            ind.phenotype = Some(phenotype);
            ind.objectives = vec![objective];
            count += 1;
        }
    }
    Ok(count)
}

/// Tournament selection on the primary objective; yields
/// `pop_size - elitism` parent pairs.
pub fn select(pop: &Population, config: &EvolutionConfig) -> Result<Vec<(usize, usize)>> {
    if pop.members.iter().any(|m| !m.is_evaluated()) {
        return Err(Error::Contract("selection requires an evaluated population".into()));
    }
    let n_pairs = config.pop_size - config.elitism;
    let mut pairs = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        let mut r = rng::stream(
            config.master_seed,
            CTX_SELECT ^ (pop.generation as u64) << 8,
            i as u64,
        );
        let pick = |r: &mut rand_chacha::ChaCha8Rng| {
            let mut best = r.gen_range(0..pop.members.len());
            for _ in 1..config.tournament_k {
                let c = r.gen_range(0..pop.members.len());
                if pop.members[c].primary() < pop.members[best].primary() {
                    best = c;
                }
            }
            best
        };
        let a = pick(&mut r);
        let b = pick(&mut r);
        pairs.push((a, b));
    }
    Ok(pairs)
}

/// Arithmetic crossover (per-gene `u·a + (1−u)·b` with probability
/// `crossover_rate`) followed by per-gene Gaussian mutation, clamped.
pub fn vary(
    pop: &Population,
    pairs: &[(usize, usize)],
    space: &ParameterSpace,
    config: &EvolutionConfig,
) -> Vec<Vec<f64>> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, &(pa, pb))| {
            let mut r = rng::stream(
                config.master_seed,
                CTX_VARY ^ (pop.generation as u64) << 8,
                i as u64,
            );
            let a = &pop.members[pa].genotype;
            let b = &pop.members[pb].genotype;
            let mut child: Vec<f64> = if r.gen::<f64>() < config.crossover_rate {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| {
                        let u: f64 = r.gen();
                        u * x + (1.0 - u) * y
                    })
                    .collect()
            } else {
                a.clone()
            };
            for (g, dim) in child.iter_mut().zip(0..space.dim()) {
                let sigma = config.mutation_sigma_fraction * space.range(dim);
                if sigma > 0.0 {
                    let noise = Normal::new(0.0, sigma).unwrap();
                    *g += noise.sample(&mut r);
                }
            }
            space.clamp(&mut child);
            child
        })
        .collect()
}

/// Elitist survival: best `elitism` of the old population plus the
/// offspring; population size is preserved.
pub fn survive(old: &Population, offspring: Population, config: &EvolutionConfig) -> Population {
    let mut elite_idx: Vec<usize> = (0..old.members.len()).collect();
    elite_idx.sort_by(|&a, &b| old.members[a].primary().total_cmp(&old.members[b].primary()));
    let mut members: Vec<Individual> = elite_idx
        .into_iter()
        .take(config.elitism)
        .map(|i| old.members[i].clone())
        .collect();
    members.extend(offspring.members);
    members.truncate(config.pop_size);
    Population {
        members,
        generation: old.generation + 1,
    }
}

#[derive(Debug, Clone)]
pub struct EvolveResult {
    pub best: Individual,
    pub log: ConvergenceLog,
    /// Final-generation population snapshot.
    pub population: Population,
    /// Present only for multi-objective runs.
    pub archive: Option<ParetoArchive>,
}

/// Full single-objective loop against an arbitrary evaluator.
pub fn evolve_with(
    evaluator: &dyn ModelEvaluator,
    observations: &StationSeries,
    config: &EvolutionConfig,
    seeder: Option<&[Vec<f64>]>,
) -> Result<EvolveResult> {
    config.validate()?;
    let space = evaluator.space().clone();
    let mut pop = init_population(&space, config, seeder)?;
    let mut evaluations = evaluate(&mut pop, evaluator, observations)?;
    let mut log = ConvergenceLog::default();
    log.push(&pop, evaluations);
    let mut best = pop
        .members
        .iter()
        .min_by(|a, b| a.primary().total_cmp(&b.primary()))
        .unwrap()
        .clone();

    for _ in 0..config.generations {
        let pairs = select(&pop, config)?;
        let genotypes = vary(&pop, &pairs, &space, config);
        let mut offspring = Population {
            members: genotypes
                .into_iter()
                .enumerate()
                .map(|(i, g)| Individual::unevaluated(g, offspring_tag(), i as u64))
                .collect(),
            generation: pop.generation,
        };
        evaluations += evaluate(&mut offspring, evaluator, observations)?;
        pop = survive(&pop, offspring, config);
        log.push(&pop, evaluations);
        let gen_best = pop
            .members
            .iter()
            .min_by(|a, b| a.primary().total_cmp(&b.primary()))
            .unwrap();
        if gen_best.primary() < best.primary() {
            best = gen_best.clone();
        }
    }
    Ok(EvolveResult {
        best,
        log,
        population: pop,
        archive: None,
    })
}

/// Calibrate the benchmark model on one forcing of a scenario.
pub fn evolve(
    scenario: &Scenario,
    forcing_index: usize,
    config: &EvolutionConfig,
) -> Result<EvolveResult> {
    let evaluator = scenario.evaluator(forcing_index)?;
    evolve_with(&evaluator, &scenario.observations, config, None)
}

/// How collaborators are picked across populations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairingStrategy {
    /// Pair with the best-known member of each other population from the
    /// previous generation.
    BestOfPrevious,
}

#[derive(Debug, Clone)]
pub struct CoevolveResult {
    /// Non-dominated triples (member error per forcing, ensemble error)
    /// over all generations; payload is the concatenated genotypes.
    pub archive: ParetoArchive,
    /// One convergence log per population; objective 0 is the ensemble
    /// error (the integral criterion), objective 1 the own-model error.
    pub logs: Vec<ConvergenceLog>,
    /// OLS weights of the best collaboration per generation.
    pub weights_trace: Vec<EnsembleWeights>,
    pub best_ensemble_error: f64,
    pub best_genotypes: Vec<Vec<f64>>,
    pub best_weights: EnsembleWeights,
    pub total_evaluations: usize,
}

struct Collaboration {
    ensemble_error: f64,
    own_error: f64,
}

/// Cooperative co-evolution: one population per forcing. Each individual
/// is paired with the best-known collaborators of the other populations,
/// the collaboration is joined by OLS weights on the training window, and
/// selection uses the ensemble error as the integral criterion.
pub fn coevolve(
    scenario: &Scenario,
    config: &EvolutionConfig,
    _pairing: PairingStrategy,
) -> Result<CoevolveResult> {
    config.validate()?;
    let n_forcings = scenario.forcings.len();
    if n_forcings < 2 {
        return Err(Error::InvalidInput(format!(
            "co-evolution needs >= 2 forcings, got {n_forcings}"
        )));
    }
    let train_obs = head_fraction(&scenario.observations, DEFAULT_TRAIN_FRACTION);
    let evaluators: Vec<_> = (0..n_forcings)
        .map(|f| scenario.evaluator(f))
        .collect::<Result<Vec<_>>>()?;

    // per-population configs get decorrelated seeds
    let pop_configs: Vec<EvolutionConfig> = (0..n_forcings)
        .map(|f| EvolutionConfig {
            master_seed: config.master_seed.wrapping_add(0x5151_0000 + f as u64),
            ..config.clone()
        })
        .collect();

    let mut pops: Vec<Population> = pop_configs
        .iter()
        .zip(&evaluators)
        .map(|(cfg, ev)| init_population(ev.space(), cfg, None))
        .collect::<Result<Vec<_>>>()?;

    let mut archive = ParetoArchive::new(None);
    let mut logs = vec![ConvergenceLog::default(); n_forcings];
    let mut weights_trace = Vec::new();
    let mut evaluations = vec![0usize; n_forcings];
    let mut best: Option<(f64, Vec<Vec<f64>>, EnsembleWeights)> = None;

    // own-model training-window outputs and errors for one population
    let score_own = |pop: &mut Population, f: usize, evals: &mut usize| -> Result<Vec<(StationSeries, f64)>> {
        *evals += evaluate(pop, &evaluators[f], &scenario.observations)?;
        pop.members
            .iter()
            .map(|ind| {
                let full = ind.phenotype.clone().unwrap_or_default();
                let train = head_fraction(&full, DEFAULT_TRAIN_FRACTION);
                let err = if full.is_empty() {
                    f64::INFINITY
                } else {
                    station_fitness(&train, &train_obs)?.value
                };
                Ok((train, err))
            })
            .collect()
    };

    let mut own: Vec<Vec<(StationSeries, f64)>> = Vec::with_capacity(n_forcings);
    for f in 0..n_forcings {
        let scored = score_own(&mut pops[f], f, &mut evaluations[f])?;
        own.push(scored);
    }

    for round in 0..=config.generations {
        // representatives: best member of each population by own error
        let reps: Vec<usize> = own
            .iter()
            .map(|scored| {
                scored
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                    .map(|(i, _)| i)
                    .unwrap()
            })
            .collect();

        // evaluate every collaboration and overwrite member objectives
        let mut round_best: Option<(f64, Vec<Vec<f64>>, EnsembleWeights)> = None;
        for f in 0..n_forcings {
            let mut collabs: Vec<Collaboration> = Vec::with_capacity(pops[f].members.len());
            for i in 0..pops[f].members.len() {
                let mut outputs: Vec<StationSeries> = Vec::with_capacity(n_forcings);
                let mut member_errors = Vec::with_capacity(n_forcings);
                for g in 0..n_forcings {
                    let idx = if g == f { i } else { reps[g] };
                    outputs.push(own[g][idx].0.clone());
                    member_errors.push(own[g][idx].1);
                }
                let (ensemble_error, weights) = if outputs.iter().any(|o| o.is_empty()) {
                    (
                        f64::INFINITY,
                        EnsembleWeights {
                            weights: vec![0.0; n_forcings],
                            fitted_on: "unfit (faulted member)".into(),
                            rank_deficient: true,
                        },
                    )
                } else {
                    let w = fit_weights_ols(&outputs, &train_obs)?;
                    let pred = weighted_sum(&outputs, &w.weights)?;
                    (station_fitness(&pred, &train_obs)?.value, w)
                };

                let mut triple = member_errors.clone();
                triple.push(ensemble_error);
                let payload: Vec<f64> = (0..n_forcings)
                    .flat_map(|g| {
                        let idx = if g == f { i } else { reps[g] };
                        pops[g].members[idx].genotype.clone()
                    })
                    .collect();
                archive.insert(triple, payload.clone())?;

                if round_best
                    .as_ref()
                    .map_or(true, |(e, _, _)| ensemble_error < *e)
                {
                    let genotypes: Vec<Vec<f64>> = (0..n_forcings)
                        .map(|g| {
                            let idx = if g == f { i } else { reps[g] };
                            pops[g].members[idx].genotype.clone()
                        })
                        .collect();
                    round_best = Some((ensemble_error, genotypes, weights.clone()));
                }
                collabs.push(Collaboration {
                    ensemble_error,
                    own_error: own[f][i].1,
                });
            }
            for (ind, c) in pops[f].members.iter_mut().zip(&collabs) {
                ind.objectives = vec![c.ensemble_error, c.own_error];
            }
            logs[f].push(&pops[f], evaluations[f]);
        }

        if let Some((e, g, w)) = round_best {
            weights_trace.push(w.clone());
            if best.as_ref().map_or(true, |(be, _, _)| e < *be) {
                best = Some((e, g, w));
            }
        }

        if round == config.generations {
            break;
        }

        // breed each population on the integral criterion (objective 0)
        for f in 0..n_forcings {
            let cfg = &pop_configs[f];
            let pairs = select(&pops[f], cfg)?;
            let genotypes = vary(&pops[f], &pairs, evaluators[f].space(), cfg);
            let offspring = Population {
                members: genotypes
                    .into_iter()
                    .enumerate()
                    .map(|(i, g)| Individual::unevaluated(g, offspring_tag(), i as u64))
                    .collect(),
                generation: pops[f].generation,
            };
            pops[f] = survive(&pops[f], offspring, cfg);
            own[f] = score_own(&mut pops[f], f, &mut evaluations[f])?;
        }
    }

    let (best_ensemble_error, best_genotypes, best_weights) = best.unwrap();
    Ok(CoevolveResult {
        archive,
        logs,
        weights_trace,
        best_ensemble_error,
        best_genotypes,
        best_weights,
        total_evaluations: evaluations.iter().sum(),
    })
}
