//! Evolutionary discovery of discriminative symbol patterns: variable-length
//! chains scored against one behavior cluster, kept in a Pareto archive.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::{Alphabet, EventSequence, SequenceClusters};

/// A candidate pattern with its two maximized objectives:
/// `[within-cluster support, discriminative length]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternIndividual {
    pub pattern: Vec<String>,
    pub objectives: [f64; 2],
}

impl PatternIndividual {
    /// Integral criterion used for per-generation reporting: the product of
    /// the two objectives.
    pub fn integral(&self) -> f64 {
        self.objectives[0] * self.objectives[1]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatternConfig {
    pub population_size: usize,
    pub generations: usize,
    pub target_cluster: usize,
    pub max_pattern_len: usize,
    pub seed: u64,
    /// Probability that mutation discards the parent and draws a fresh
    /// random pattern, keeping the search from stalling on one shape.
    pub immigrant_rate: f64,
}

impl Default for PatternConfig {
    fn default() -> Self {
        PatternConfig {
            population_size: 40,
            generations: 30,
            target_cluster: 0,
            max_pattern_len: 6,
            seed: 0,
            immigrant_rate: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternGenRecord {
    pub generation: usize,
    /// Up to 10 best archive members by the integral criterion.
    pub top: Vec<PatternIndividual>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatternDiscovery {
    /// Non-dominated patterns (maximization on both objectives), deduplicated.
    pub archive: Vec<PatternIndividual>,
    pub log: Vec<PatternGenRecord>,
}

fn contains_contiguous(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty()
        && haystack.len() >= needle.len()
        && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Support inside and outside the target cluster, combined into the two
/// maximized objectives: within-cluster support, and pattern length times
/// the support margin (within minus out-of-cluster).
pub fn pattern_objectives(
    pattern: &[String],
    corpus: &[EventSequence],
    clusters: &SequenceClusters,
    target_cluster: usize,
) -> Result<[f64; 2]> {
    let mut in_hits = 0usize;
    let mut in_total = 0usize;
    let mut out_hits = 0usize;
    let mut out_total = 0usize;
    for seq in corpus {
        let cluster = *clusters.assignment.get(&seq.case_id).ok_or_else(|| {
            Error::InvalidInput(format!("case '{}' missing from cluster model", seq.case_id))
        })?;
        let hit = contains_contiguous(&seq.symbols, pattern);
        if cluster == target_cluster {
            in_total += 1;
            in_hits += usize::from(hit);
        } else {
            out_total += 1;
            out_hits += usize::from(hit);
        }
    }
    if in_total == 0 {
        return Err(Error::InvalidInput(format!(
            "target cluster {target_cluster} is empty"
        )));
    }
    let support = in_hits as f64 / in_total as f64;
    let out_support = if out_total == 0 {
        0.0
    } else {
        out_hits as f64 / out_total as f64
    };
    Ok([support, pattern.len() as f64 * (support - out_support)])
}

/// `a` dominates `b` under maximization of both objectives.
fn dominates_max(a: &[f64; 2], b: &[f64; 2]) -> bool {
    a[0] >= b[0] && a[1] >= b[1] && (a[0] > b[0] || a[1] > b[1])
}

fn archive_insert(archive: &mut Vec<PatternIndividual>, cand: PatternIndividual) {
    if archive.iter().any(|e| {
        e.pattern == cand.pattern || dominates_max(&e.objectives, &cand.objectives)
    }) {
        return;
    }
    archive.retain(|e| !dominates_max(&cand.objectives, &e.objectives));
    archive.push(cand);
}

fn random_pattern<R: Rng>(r: &mut R, alphabet: &Alphabet, max_len: usize) -> Vec<String> {
    let len = r.gen_range(2..=max_len.max(2));
    (0..len)
        .map(|_| alphabet.symbols()[r.gen_range(0..alphabet.len())].clone())
        .collect()
}

fn mutate<R: Rng>(
    r: &mut R,
    parent: &[String],
    alphabet: &Alphabet,
    config: &PatternConfig,
) -> Vec<String> {
    if r.gen::<f64>() < config.immigrant_rate {
        return random_pattern(r, alphabet, config.max_pattern_len);
    }
    let mut child: Vec<String> = parent.to_vec();
    let symbols = alphabet.symbols();
    match r.gen_range(0..3u8) {
        0 if child.len() < config.max_pattern_len => {
            let pos = r.gen_range(0..=child.len());
            child.insert(pos, symbols[r.gen_range(0..symbols.len())].clone());
        }
        1 if child.len() > 2 => {
            child.remove(r.gen_range(0..child.len()));
        }
        _ => {
            let pos = r.gen_range(0..child.len());
            child[pos] = symbols[r.gen_range(0..symbols.len())].clone();
        }
    }
    child
}

/// Evolve variable-length patterns against the target cluster. The archive
/// collects every non-dominated pattern seen; the log records the 10 best
/// archive members per generation by the integral criterion.
pub fn discover_patterns_evolutionary(
    corpus: &[EventSequence],
    clusters: &SequenceClusters,
    config: &PatternConfig,
) -> Result<PatternDiscovery> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    if config.population_size == 0 {
        return Err(Error::InvalidInput("population_size must be >= 1".into()));
    }
    if config.max_pattern_len < 2 {
        return Err(Error::InvalidInput("max_pattern_len must be >= 2".into()));
    }
    let alphabet = &clusters.alphabet;

    let score = |pattern: Vec<String>| -> Result<PatternIndividual> {
        let objectives =
            pattern_objectives(&pattern, corpus, clusters, config.target_cluster)?;
        Ok(PatternIndividual {
            pattern,
            objectives,
        })
    };

    // seed with every length-2 pattern, topped up with random draws
    let mut init: Vec<Vec<String>> = Vec::new();
    for a in alphabet.symbols() {
        for b in alphabet.symbols() {
            init.push(vec![a.clone(), b.clone()]);
        }
    }
    let mut r = rng::stream(config.seed, 0x9a77, 0);
    while init.len() < config.population_size {
        init.push(random_pattern(&mut r, alphabet, config.max_pattern_len));
    }

    let mut population: Vec<PatternIndividual> =
        init.into_iter().map(score).collect::<Result<_>>()?;
    let mut archive: Vec<PatternIndividual> = Vec::new();
    for ind in &population {
        archive_insert(&mut archive, ind.clone());
    }

    let mut log = Vec::with_capacity(config.generations);
    for generation in 0..config.generations {
        let mut r = rng::stream(config.seed, 0x9a77, 1 + generation as u64);
        let mut offspring = Vec::with_capacity(config.population_size);
        for _ in 0..config.population_size {
            // binary tournament on the integral criterion
            let a = &population[r.gen_range(0..population.len())];
            let b = &population[r.gen_range(0..population.len())];
            let parent = if a.integral() >= b.integral() { a } else { b };
            let child = score(mutate(&mut r, &parent.pattern, alphabet, config))?;
            archive_insert(&mut archive, child.clone());
            offspring.push(child);
        }
        // keep the better half of parents plus offspring
        let mut pool = population;
        pool.extend(offspring);
        pool.sort_by(|a, b| b.integral().total_cmp(&a.integral()));
        pool.truncate(config.population_size);
        population = pool;

        let mut top = archive.clone();
        top.sort_by(|a, b| b.integral().total_cmp(&a.integral()));
        top.truncate(10);
        log.push(PatternGenRecord { generation, top });
    }

    archive.sort_by(|a, b| {
        b.objectives[0]
            .total_cmp(&a.objectives[0])
            .then(b.objectives[1].total_cmp(&a.objectives[1]))
            .then(a.pattern.cmp(&b.pattern))
    });
    Ok(PatternDiscovery { archive, log })
}
