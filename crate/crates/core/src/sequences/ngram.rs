//! Sorted n-gram ("n-set") vectorization: contiguous windows whose symbols
//! are sorted, turning each window into an order-free multiset key.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Alphabet, EventSequence};

/// Counts of sorted n-grams for one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGramVector {
    pub n: usize,
    pub counts: BTreeMap<String, f64>,
    pub normalized: bool,
}

impl NGramVector {
    /// Scale counts to sum to 1. Sequences shorter than n stay all-zero.
    pub fn normalize(mut self) -> NGramVector {
        let total: f64 = self.counts.values().sum();
        if total > 0.0 {
            for v in self.counts.values_mut() {
                *v /= total;
            }
        }
        self.normalized = true;
        self
    }

    pub fn total(&self) -> f64 {
        self.counts.values().sum()
    }

    /// Dense representation over an ordered vocabulary.
    pub fn to_dense(&self, vocab: &[String]) -> Vec<f64> {
        vocab
            .iter()
            .map(|k| self.counts.get(k).copied().unwrap_or(0.0))
            .collect()
    }
}

/// Multiset key for a window: symbols sorted, then concatenated
/// (single-character alphabets) or joined with '|'.
fn multiset_key(window: &[&str], single_char: bool) -> String {
    let mut sorted: Vec<&str> = window.to_vec();
    sorted.sort_unstable();
    if single_char {
        sorted.concat()
    } else {
        sorted.join("|")
    }
}

/// Slide a contiguous window of length `n` over the sequence, sorting each
/// window into its multiset key. Sequences shorter than `n` yield the
/// all-zero vector.
pub fn extract_ngram_sets(
    seq: &EventSequence,
    n: usize,
    alphabet: &Alphabet,
) -> Result<NGramVector> {
    if n < 1 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    for (pos, s) in seq.symbols.iter().enumerate() {
        if !alphabet.contains(s) {
            return Err(Error::InvalidInput(format!(
                "case '{}': unknown symbol '{s}' at position {pos}",
                seq.case_id
            )));
        }
    }
    let single = alphabet.single_char();
    let mut counts = BTreeMap::new();
    if seq.symbols.len() >= n {
        let refs: Vec<&str> = seq.symbols.iter().map(|s| s.as_str()).collect();
        for window in refs.windows(n) {
            *counts.entry(multiset_key(window, single)).or_insert(0.0) += 1.0;
        }
    }
    Ok(NGramVector {
        n,
        counts,
        normalized: false,
    })
}

/// All sorted n-multisets over the alphabet, in lexicographic order.
/// Size equals C(|alphabet| + n - 1, n).
pub fn vocabulary(alphabet: &Alphabet, n: usize) -> Vec<String> {
    let symbols = alphabet.symbols();
    let single = alphabet.single_char();
    let mut out = Vec::new();
    let mut indices = vec![0usize; n];
    loop {
        let window: Vec<&str> = indices.iter().map(|&i| symbols[i].as_str()).collect();
        out.push(multiset_key(&window, single));
        // advance non-decreasing index tuple
        let mut pos = n;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if indices[pos] + 1 < symbols.len() {
                let next = indices[pos] + 1;
                for idx in indices.iter_mut().skip(pos) {
                    *idx = next;
                }
                break;
            }
        }
    }
}
