//! Sequence and process mining: n-gram multiset vectors, behavior
//! clustering, process/proximity graphs, evolutionary pattern discovery,
//! and event-assimilating synthetic continuations.

mod continuation;
mod graph;
mod kmeans;
mod ngram;
mod patterns;
pub mod synthetic;

pub use continuation::{
    assimilate_event, fraction_in_cluster, generate_continuations, AssimilationMode,
    ContinuationConfig, ContinuationPopulation,
};
pub use graph::{
    build_process_graph, build_proximity_graph, build_proximity_graph_with, collapse_cycles,
    GraphEdge, ProcessGraph, ProximityGraph, SimilarityKind,
};
pub use kmeans::{cluster_sequences, kmeans, KMeansResult, SequenceClusters};
pub use ngram::{extract_ngram_sets, vocabulary, NGramVector};
pub use patterns::{
    discover_patterns_evolutionary, pattern_objectives, PatternConfig, PatternDiscovery,
    PatternGenRecord, PatternIndividual,
};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted, unique symbol set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let set: BTreeSet<String> = symbols.into_iter().map(Into::into).collect();
        if set.is_empty() {
            return Err(Error::InvalidInput("alphabet must be non-empty".into()));
        }
        Ok(Alphabet {
            symbols: set.into_iter().collect(),
        })
    }

    pub fn from_corpus(corpus: &[EventSequence]) -> Result<Self> {
        Alphabet::new(corpus.iter().flat_map(|s| s.symbols.iter().cloned()))
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.symbols.binary_search_by(|s| s.as_str().cmp(symbol)).is_ok()
    }

    /// True when every symbol is a single character, so n-gram keys can be
    /// concatenated without a separator.
    pub fn single_char(&self) -> bool {
        self.symbols.iter().all(|s| s.chars().count() == 1)
    }
}

/// One case: an ordered chain of symbols, optionally timestamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSequence {
    pub case_id: String,
    pub symbols: Vec<String>,
    pub timestamps: Option<Vec<i64>>,
}

impl EventSequence {
    pub fn new(case_id: &str, symbols: Vec<String>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidInput(format!(
                "case '{case_id}': symbol chain must be non-empty"
            )));
        }
        Ok(EventSequence {
            case_id: case_id.to_string(),
            symbols,
            timestamps: None,
        })
    }

    pub fn with_timestamps(mut self, timestamps: Vec<i64>) -> Result<Self> {
        if timestamps.len() != self.symbols.len() {
            return Err(Error::InvalidInput(format!(
                "case '{}': {} timestamps for {} symbols",
                self.case_id,
                timestamps.len(),
                self.symbols.len()
            )));
        }
        if timestamps.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput(format!(
                "case '{}': timestamps must be non-decreasing",
                self.case_id
            )));
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    /// Convenience for single-character symbols: "PRC" -> [P, R, C].
    pub fn from_str_symbols(case_id: &str, chain: &str) -> Result<Self> {
        EventSequence::new(case_id, chain.chars().map(|c| c.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Parse the corpus file format: one case per line, `case_id;S1,S2,...,Sk`.
pub fn parse_corpus(text: &str) -> Result<Vec<EventSequence>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (case_id, chain) = line.split_once(';').ok_or_else(|| {
            Error::Parse(format!("line {}: expected 'case_id;S1,S2,...'", i + 1))
        })?;
        let symbols: Vec<String> = chain
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        out.push(EventSequence::new(case_id.trim(), symbols)?);
    }
    if out.is_empty() {
        return Err(Error::Parse("empty corpus".into()));
    }
    Ok(out)
}

pub fn corpus_to_string(corpus: &[EventSequence]) -> String {
    let mut out = String::new();
    for seq in corpus {
        out.push_str(&seq.case_id);
        out.push(';');
        out.push_str(&seq.symbols.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_sorted_unique() {
        let a = Alphabet::new(["R", "P", "C", "P"]).unwrap();
        assert_eq!(a.symbols(), ["C", "P", "R"]);
        assert!(a.contains("P"));
        assert!(!a.contains("X"));
        assert!(a.single_char());
        assert!(Alphabet::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn corpus_format_round_trip() {
        let text = "u1;P,R,C\nu2;P,P\n";
        let corpus = parse_corpus(text).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus[0].case_id, "u1");
        assert_eq!(corpus[0].symbols, ["P", "R", "C"]);
        assert_eq!(corpus_to_string(&corpus), text);
        assert!(parse_corpus("no-separator\n").is_err());
        assert!(parse_corpus("").is_err());
    }

    #[test]
    fn timestamps_validated() {
        let seq = EventSequence::from_str_symbols("a", "PRC").unwrap();
        assert!(seq.clone().with_timestamps(vec![1, 1, 2]).is_ok());
        assert!(seq.clone().with_timestamps(vec![2, 1, 3]).is_err());
        assert!(seq.with_timestamps(vec![1]).is_err());
    }
}
