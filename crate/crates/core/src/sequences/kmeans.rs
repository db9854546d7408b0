//! Seeded k-means (k-means++ initialization, Lloyd iteration) over dense
//! n-gram vectors.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::{extract_ngram_sets, vocabulary, Alphabet, EventSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each Lloyd iteration; non-increasing.
    pub inertia_trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn nearest_centroid(centroids: &[Vec<f64>], v: &[f64]) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, v);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Lloyd's algorithm with seeded k-means++ initialization. Stops on an
/// assignment fixpoint or after `max_iter` iterations. Empty clusters are
/// re-seeded from the point farthest from its assigned centroid.
pub fn kmeans(vectors: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<KMeansResult> {
    if max_iter < 1 {
        return Err(Error::InvalidInput("max_iter must be >= 1".into()));
    }
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for v in vectors {
        if !distinct.contains(&v) {
            distinct.push(v);
        }
    }
    if k == 0 || k > distinct.len() {
        return Err(Error::InvalidInput(format!(
            "k = {k} but only {} distinct vectors",
            distinct.len()
        )));
    }

    let mut r = rng::stream(seed, 0x4b4d, 0);

    // k-means++ over the distinct points
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(distinct[r.gen_range(0..distinct.len())].clone());
    while centroids.len() < k {
        let d2: Vec<f64> = distinct
            .iter()
            .map(|v| nearest_centroid(&centroids, v).1)
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // all remaining mass on existing centroids; pick any new point
            distinct
                .iter()
                .position(|v| !centroids.contains(v))
                .unwrap()
        } else {
            let mut target = r.gen::<f64>() * total;
            let mut idx = 0;
            for (i, d) in d2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    idx = i;
                    break;
                }
            }
            idx
        };
        centroids.push(distinct[next].clone());
    }

    let mut assignment: Vec<usize> = vectors
        .iter()
        .map(|v| nearest_centroid(&centroids, v).0)
        .collect();
    let mut inertia_trace = Vec::new();

    for _ in 0..max_iter {
        // update step
        let dim = vectors[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (v, &a) in vectors.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(v) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed from the farthest point
                let far = vectors
                    .iter()
                    .enumerate()
                    .max_by(|a, b| {
                        sq_dist(a.1, &centroids[assignment[a.0]])
                            .total_cmp(&sq_dist(b.1, &centroids[assignment[b.0]]))
                    })
                    .map(|(i, _)| i)
                    .unwrap();
                centroids[c] = vectors[far].clone();
            } else {
                for (ci, s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *ci = s / counts[c] as f64;
                }
            }
        }

        // assignment step
        let new_assignment: Vec<usize> = vectors
            .iter()
            .map(|v| nearest_centroid(&centroids, v).0)
            .collect();
        let inertia: f64 = vectors
            .iter()
            .zip(&new_assignment)
            .map(|(v, &a)| sq_dist(v, &centroids[a]))
            .sum();
        inertia_trace.push(inertia);
        let fixpoint = new_assignment == assignment;
        assignment = new_assignment;
        if fixpoint {
            break;
        }
    }

    let inertia = *inertia_trace.last().unwrap();
    Ok(KMeansResult {
        centroids,
        assignment,
        inertia,
        inertia_trace,
    })
}

/// Behavior clusters of a corpus: k-means over normalized sorted-n-gram
/// vectors, plus everything needed to position new sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceClusters {
    pub k: usize,
    pub n: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignment: BTreeMap<String, usize>,
    pub inertia: f64,
    pub vocab: Vec<String>,
    pub alphabet: Alphabet,
}

impl SequenceClusters {
    /// Normalized dense n-gram vector of an arbitrary symbol chain.
    pub fn vectorize(&self, seq: &EventSequence) -> Result<Vec<f64>> {
        let v = extract_ngram_sets(seq, self.n, &self.alphabet)?.normalize();
        Ok(v.to_dense(&self.vocab))
    }

    /// Cluster index of the nearest centroid.
    pub fn assign(&self, seq: &EventSequence) -> Result<usize> {
        Ok(nearest_centroid(&self.centroids, &self.vectorize(seq)?).0)
    }

    /// `case_id,cluster` CSV export.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("case_id,cluster\n");
        for (case, cluster) in &self.assignment {
            let _ = writeln!(out, "{case},{cluster}");
        }
        out
    }
}

/// Vectorize a corpus with sorted n-grams and cluster it.
pub fn cluster_sequences(
    corpus: &[EventSequence],
    n: usize,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<SequenceClusters> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    let alphabet = Alphabet::from_corpus(corpus)?;
    let vocab = vocabulary(&alphabet, n);
    let vectors: Vec<Vec<f64>> = corpus
        .iter()
        .map(|s| Ok(extract_ngram_sets(s, n, &alphabet)?.normalize().to_dense(&vocab)))
        .collect::<Result<_>>()?;
    let km = kmeans(&vectors, k, seed, max_iter)?;
    let assignment = corpus
        .iter()
        .zip(&km.assignment)
        .map(|(s, &a)| (s.case_id.clone(), a))
        .collect();
    Ok(SequenceClusters {
        k,
        n,
        centroids: km.centroids,
        assignment,
        inertia: km.inertia,
        vocab,
        alphabet,
    })
}
