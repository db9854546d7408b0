//! Synthetic continuations of an observed prefix, and assimilation of newly
//! observed events into the continuation population.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::{extract_ngram_sets, EventSequence, SequenceClusters};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuationConfig {
    pub population_size: usize,
    pub mutation_rate: f64,
    /// n-gram order used for prefix-to-donor similarity and cluster votes.
    pub n: usize,
    pub seed: u64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            population_size: 50,
            mutation_rate: 0.2,
            n: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssimilationMode {
    /// Drop members inconsistent with the extended prefix.
    Filter,
    /// Filter, then refill to the target size by mutating survivors.
    Regenerate,
}

/// A population of full synthetic sequences, each extending the observed
/// prefix verbatim, with nearest-centroid cluster votes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationPopulation {
    pub observed_prefix: Vec<String>,
    pub members: Vec<EventSequence>,
    pub cluster_votes: BTreeMap<usize, usize>,
}

impl ContinuationPopulation {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Fraction of members voting for the given cluster.
pub fn fraction_in_cluster(pop: &ContinuationPopulation, cluster: usize) -> f64 {
    if pop.members.is_empty() {
        return 0.0;
    }
    *pop.cluster_votes.get(&cluster).unwrap_or(&0) as f64 / pop.members.len() as f64
}

fn count_votes(
    members: &[EventSequence],
    clusters: &SequenceClusters,
) -> Result<BTreeMap<usize, usize>> {
    let mut votes = BTreeMap::new();
    for m in members {
        *votes.entry(clusters.assign(m)?).or_insert(0) += 1;
    }
    Ok(votes)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn weighted_index<R: Rng>(r: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return r.gen_range(0..weights.len());
    }
    let mut target = r.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        target -= w;
        if target <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

fn mutate_suffix<R: Rng>(
    r: &mut R,
    prefix_len: usize,
    symbols: &mut [String],
    clusters: &SequenceClusters,
    rate: f64,
) {
    let alphabet = clusters.alphabet.symbols();
    for s in symbols.iter_mut().skip(prefix_len) {
        if r.gen::<f64>() < rate {
            *s = alphabet[r.gen_range(0..alphabet.len())].clone();
        }
    }
}

fn splice(prefix: &[String], donor: &EventSequence) -> Vec<String> {
    let cut = prefix.len().min(donor.len());
    let mut symbols = prefix.to_vec();
    symbols.extend(donor.symbols[cut..].iter().cloned());
    symbols
}

fn member(index: usize, symbols: Vec<String>) -> Result<EventSequence> {
    EventSequence::new(&format!("synthetic-{index:03}"), symbols)
}

/// Seed a continuation population by splicing the prefix with corpus
/// suffixes, sampled in proportion to prefix-to-donor similarity. Member 0
/// splices the most similar donor without mutation, so a prefix equal to a
/// full corpus sequence keeps that sequence in the population.
pub fn generate_continuations(
    prefix: &[String],
    clusters: &SequenceClusters,
    corpus: &[EventSequence],
    config: &ContinuationConfig,
) -> Result<ContinuationPopulation> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    if config.population_size == 0 {
        return Err(Error::InvalidInput("population_size must be >= 1".into()));
    }
    for (pos, s) in prefix.iter().enumerate() {
        if !clusters.alphabet.contains(s) {
            return Err(Error::InvalidInput(format!(
                "unknown symbol '{s}' at prefix position {pos}"
            )));
        }
    }

    // donor weights: cosine similarity between prefix and donor vectors,
    // uniform when the prefix is too short to vectorize
    let weights: Vec<f64> = if prefix.len() < config.n {
        vec![1.0; corpus.len()]
    } else {
        let prefix_seq = EventSequence::new("prefix", prefix.to_vec())?;
        let pv = extract_ngram_sets(&prefix_seq, config.n, &clusters.alphabet)?
            .normalize()
            .to_dense(&clusters.vocab);
        corpus
            .iter()
            .map(|donor| {
                let dv = extract_ngram_sets(donor, config.n, &clusters.alphabet)?
                    .normalize()
                    .to_dense(&clusters.vocab);
                Ok(cosine(&pv, &dv).max(0.0))
            })
            .collect::<Result<_>>()?
    };

    let best_donor = weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();

    let mut members = Vec::with_capacity(config.population_size);
    members.push(member(0, splice(prefix, &corpus[best_donor]))?);
    for i in 1..config.population_size {
        let mut r: ChaCha8Rng = rng::stream(config.seed, 0xc047, i as u64);
        let donor = &corpus[weighted_index(&mut r, &weights)];
        let mut symbols = splice(prefix, donor);
        mutate_suffix(
            &mut r,
            prefix.len(),
            &mut symbols,
            clusters,
            config.mutation_rate,
        );
        members.push(member(i, symbols)?);
    }

    let cluster_votes = count_votes(&members, clusters)?;
    Ok(ContinuationPopulation {
        observed_prefix: prefix.to_vec(),
        members,
        cluster_votes,
    })
}

/// Extend the observed prefix by one event. Filter mode keeps only members
/// whose next symbol matches; regenerate mode additionally refills to the
/// previous size by mutating survivors (or reseeds from scratch when no
/// member survives).
pub fn assimilate_event(
    pop: &ContinuationPopulation,
    event: &str,
    mode: AssimilationMode,
    clusters: &SequenceClusters,
    corpus: &[EventSequence],
    config: &ContinuationConfig,
) -> Result<ContinuationPopulation> {
    if !clusters.alphabet.contains(event) {
        return Err(Error::InvalidInput(format!("unknown event '{event}'")));
    }
    let mut prefix = pop.observed_prefix.clone();
    prefix.push(event.to_string());

    let survivors: Vec<&EventSequence> = pop
        .members
        .iter()
        .filter(|m| m.len() >= prefix.len() && m.symbols[..prefix.len()] == prefix[..])
        .collect();

    match mode {
        AssimilationMode::Filter => {
            if survivors.is_empty() {
                return Err(Error::PopulationExhausted(format!(
                    "no member continues with '{event}' at position {}",
                    prefix.len() - 1
                )));
            }
            let members: Vec<EventSequence> = survivors
                .into_iter()
                .enumerate()
                .map(|(i, m)| member(i, m.symbols.clone()))
                .collect::<Result<_>>()?;
            let cluster_votes = count_votes(&members, clusters)?;
            Ok(ContinuationPopulation {
                observed_prefix: prefix,
                members,
                cluster_votes,
            })
        }
        AssimilationMode::Regenerate => {
            if survivors.is_empty() {
                // nothing consistent left; reseed from the extended prefix
                let mut reseeded = ContinuationConfig {
                    seed: rng::stream(config.seed, 0xa551, prefix.len() as u64).gen(),
                    ..config.clone()
                };
                reseeded.population_size = pop.members.len().max(1);
                return generate_continuations(&prefix, clusters, corpus, &reseeded);
            }
            let target = pop.members.len();
            let mut members: Vec<EventSequence> = survivors
                .iter()
                .enumerate()
                .map(|(i, m)| member(i, m.symbols.clone()))
                .collect::<Result<_>>()?;
            for i in members.len()..target {
                let mut r: ChaCha8Rng =
                    rng::stream(config.seed, 0xa551 ^ ((prefix.len() as u64) << 8), i as u64);
                let parent = survivors[r.gen_range(0..survivors.len())];
                let mut symbols = parent.symbols.clone();
                mutate_suffix(&mut r, prefix.len(), &mut symbols, clusters, config.mutation_rate);
                members.push(member(i, symbols)?);
            }
            let cluster_votes = count_votes(&members, clusters)?;
            Ok(ContinuationPopulation {
                observed_prefix: prefix,
                members,
                cluster_votes,
            })
        }
    }
}
