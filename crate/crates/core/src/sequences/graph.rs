//! Transition models of a corpus (process graphs, optionally with collapsed
//! cycles) and case-similarity graphs over n-gram vectors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{extract_ngram_sets, vocabulary, Alphabet, EventSequence};

pub const START: &str = "START";
pub const END: &str = "END";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    pub count: u64,
    pub probability: f64,
}

/// Directed symbol-transition graph with distinguished START and END nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<GraphEdge>,
    pub collapsed: bool,
    /// Mean run length per symbol, present only after cycle collapsing and
    /// only for symbols that actually repeat.
    pub annotations: BTreeMap<String, f64>,
}

impl ProcessGraph {
    pub fn edge(&self, from: &str, to: &str) -> Option<&GraphEdge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    /// Edge-list CSV: `from,to,count,probability`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("from,to,count,probability\n");
        for e in &self.edges {
            let _ = writeln!(out, "{},{},{},{}", e.from, e.to, e.count, e.probability);
        }
        out
    }

    /// DOT rendering for figures; annotated nodes show their mean run length.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph process {\n  rankdir=LR;\n");
        for node in &self.nodes {
            let label = match self.annotations.get(node) {
                Some(run) => format!("{node}\\nmean run {run:.2}"),
                None => node.clone(),
            };
            let _ = writeln!(out, "  \"{node}\" [label=\"{label}\"];");
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{} ({:.2})\"];",
                e.from, e.to, e.count, e.probability
            );
        }
        out.push_str("}\n");
        out
    }
}

fn tally_transitions(seqs: &[Vec<String>]) -> BTreeMap<(String, String), u64> {
    let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
    for symbols in seqs {
        let mut prev = START.to_string();
        for s in symbols {
            *counts.entry((prev, s.clone())).or_insert(0) += 1;
            prev = s.clone();
        }
        *counts.entry((prev, END.to_string())).or_insert(0) += 1;
    }
    counts
}

fn graph_from_counts(
    counts: BTreeMap<(String, String), u64>,
    collapsed: bool,
    annotations: BTreeMap<String, f64>,
) -> ProcessGraph {
    let mut out_totals: BTreeMap<&String, u64> = BTreeMap::new();
    for ((from, _), c) in &counts {
        *out_totals.entry(from).or_insert(0) += c;
    }
    let mut nodes: BTreeSet<String> = BTreeSet::new();
    for (from, to) in counts.keys() {
        nodes.insert(from.clone());
        nodes.insert(to.clone());
    }
    let edges = counts
        .iter()
        .map(|((from, to), &count)| GraphEdge {
            from: from.clone(),
            to: to.clone(),
            count,
            probability: count as f64 / out_totals[from] as f64,
        })
        .collect();
    ProcessGraph {
        nodes: nodes.into_iter().collect(),
        edges,
        collapsed,
        annotations,
    }
}

/// Expanded-cycle transition graph: START→first symbol, symbol→symbol
/// bigrams, last symbol→END, probabilities normalized per source node.
pub fn build_process_graph(corpus: &[EventSequence]) -> Result<ProcessGraph> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    let chains: Vec<Vec<String>> = corpus.iter().map(|s| s.symbols.clone()).collect();
    Ok(graph_from_counts(
        tally_transitions(&chains),
        false,
        BTreeMap::new(),
    ))
}

/// Run-length-encode each sequence (each maximal run of a repeated symbol
/// becomes one occurrence) before recounting the expanded graph's
/// transitions. Self-edges disappear; repeating symbols instead carry their
/// mean run length as an annotation.
pub fn collapse_cycles(g: &ProcessGraph, corpus: &[EventSequence]) -> Result<ProcessGraph> {
    if g.collapsed {
        return Err(Error::InvalidInput("graph is already collapsed".into()));
    }
    if corpus.is_empty() {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    let mut runs: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut chains = Vec::with_capacity(corpus.len());
    for seq in corpus {
        let mut rle: Vec<String> = Vec::new();
        let mut run_len = 0usize;
        for s in &seq.symbols {
            if rle.last().map(|l| l == s).unwrap_or(false) {
                run_len += 1;
            } else {
                if let Some(last) = rle.last() {
                    runs.entry(last.clone()).or_default().push(run_len);
                }
                rle.push(s.clone());
                run_len = 1;
            }
        }
        if let Some(last) = rle.last() {
            runs.entry(last.clone()).or_default().push(run_len);
        }
        chains.push(rle);
    }
    let annotations = runs
        .into_iter()
        .filter(|(_, lens)| lens.iter().any(|&l| l > 1))
        .map(|(sym, lens)| {
            let mean = lens.iter().sum::<usize>() as f64 / lens.len() as f64;
            (sym, mean)
        })
        .collect();
    Ok(graph_from_counts(tally_transitions(&chains), true, annotations))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    /// Cosine similarity of normalized sorted-n-gram vectors.
    Cosine,
    /// 1 − Levenshtein distance / max length, for sensitivity checks.
    Levenshtein,
}

/// Undirected case-similarity graph: an edge wherever similarity ≥ τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityGraph {
    pub nodes: Vec<String>,
    /// (index a, index b, similarity) with a < b.
    pub edges: Vec<(usize, usize, f64)>,
    pub threshold: f64,
    pub kind: SimilarityKind,
}

impl ProximityGraph {
    /// Connected components as sorted lists of node indices.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for &(a, b, _) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(i);
        }
        groups.into_values().collect()
    }
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

fn levenshtein(a: &[String], b: &[String]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, sa) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, sb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(sa != sb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn build_proximity_graph_with(
    corpus: &[EventSequence],
    n: usize,
    tau: f64,
    kind: SimilarityKind,
) -> Result<ProximityGraph> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidInput(format!("tau = {tau} not in (0, 1]")));
    }
    let vectors: Option<Vec<Vec<f64>>> = match kind {
        SimilarityKind::Cosine => {
            let alphabet = Alphabet::from_corpus(corpus)?;
            let vocab = vocabulary(&alphabet, n);
            Some(
                corpus
                    .iter()
                    .map(|s| {
                        Ok(extract_ngram_sets(s, n, &alphabet)?
                            .normalize()
                            .to_dense(&vocab))
                    })
                    .collect::<Result<_>>()?,
            )
        }
        SimilarityKind::Levenshtein => None,
    };
    let mut edges = Vec::new();
    for a in 0..corpus.len() {
        for b in a + 1..corpus.len() {
            let sim = match &vectors {
                Some(vs) => cosine(&vs[a], &vs[b]),
                None => {
                    let d = levenshtein(&corpus[a].symbols, &corpus[b].symbols);
                    let max = corpus[a].len().max(corpus[b].len());
                    1.0 - d as f64 / max as f64
                }
            };
            if sim >= tau {
                edges.push((a, b, sim));
            }
        }
    }
    Ok(ProximityGraph {
        nodes: corpus.iter().map(|s| s.case_id.clone()).collect(),
        edges,
        threshold: tau,
        kind,
    })
}

pub fn build_proximity_graph(
    corpus: &[EventSequence],
    n: usize,
    tau: f64,
) -> Result<ProximityGraph> {
    build_proximity_graph_with(corpus, n, tau, SimilarityKind::Cosine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn seq(id: &str, chain: &str) -> EventSequence {
        EventSequence::from_str_symbols(id, chain).unwrap()
    }

    #[test]
    fn single_sequence_chain() {
        let g = build_process_graph(&[seq("a", "PR")]).unwrap();
        assert_eq!(g.nodes, ["END", "P", "R", "START"]);
        for (from, to) in [("START", "P"), ("P", "R"), ("R", "END")] {
            let e = g.edge(from, to).unwrap();
            assert_eq!(e.count, 1);
            assert_eq!(e.probability, 1.0);
        }
        assert_eq!(g.edges.len(), 3);
        assert!(!g.collapsed);
    }

    #[test]
    fn self_edge_from_repeat() {
        let g = build_process_graph(&[seq("a", "PP")]).unwrap();
        let e = g.edge("P", "P").unwrap();
        assert_eq!(e.count, 1);
        assert!(g.edge("START", "P").is_some());
        assert!(g.edge("P", "END").is_some());
    }

    #[test]
    fn probabilities_sum_to_one_per_source() {
        let corpus = vec![seq("a", "PRCPR"), seq("b", "PPRR"), seq("c", "CRP")];
        for g in [
            build_process_graph(&corpus).unwrap(),
            collapse_cycles(&build_process_graph(&corpus).unwrap(), &corpus).unwrap(),
        ] {
            let mut by_source: BTreeMap<&str, f64> = BTreeMap::new();
            for e in &g.edges {
                *by_source.entry(e.from.as_str()).or_insert(0.0) += e.probability;
            }
            assert!(!by_source.contains_key("END"));
            for (node, total) in by_source {
                assert!((total - 1.0).abs() < 1e-9, "node {node}: {total}");
            }
        }
    }

    #[test]
    fn edge_counts_match_bigram_oracle() {
        let mut r = crate::rng::root(11, 0);
        let symbols = ["C", "P", "R"];
        let corpus: Vec<EventSequence> = (0..100)
            .map(|i| {
                let len = r.gen_range(1..15);
                let chain: Vec<String> = (0..len)
                    .map(|_| symbols[r.gen_range(0..3)].to_string())
                    .collect();
                EventSequence::new(&format!("c{i}"), chain).unwrap()
            })
            .collect();
        let g = build_process_graph(&corpus).unwrap();
        // independent tally including START/END sentinels
        let mut oracle: BTreeMap<(String, String), u64> = BTreeMap::new();
        for s in &corpus {
            let mut chain = vec![START.to_string()];
            chain.extend(s.symbols.clone());
            chain.push(END.to_string());
            for w in chain.windows(2) {
                *oracle.entry((w[0].clone(), w[1].clone())).or_insert(0) += 1;
            }
        }
        assert_eq!(g.edges.len(), oracle.len());
        for e in &g.edges {
            assert_eq!(oracle[&(e.from.clone(), e.to.clone())], e.count);
        }
        let total_edges: u64 = g.edges.iter().map(|e| e.count).sum();
        let total_transitions: usize = corpus.iter().map(|s| s.len() + 1).sum();
        assert_eq!(total_edges, total_transitions as u64);
    }

    #[test]
    fn collapse_replaces_runs_with_annotations() {
        let corpus = vec![seq("a", "PPPRC")];
        let expanded = build_process_graph(&corpus).unwrap();
        let g = collapse_cycles(&expanded, &corpus).unwrap();
        assert!(collapse_cycles(&g, &corpus).is_err());
        assert!(g.collapsed);
        assert!(g.edge("P", "P").is_none());
        assert!(g.edge("P", "R").is_some());
        assert!(g.edge("R", "C").is_some());
        assert_eq!(g.annotations["P"], 3.0);
        assert!(!g.annotations.contains_key("R"));
    }

    #[test]
    fn no_repeats_collapse_is_identity_modulo_flag() {
        let corpus = vec![seq("a", "PRC"), seq("b", "CRP")];
        let expanded = build_process_graph(&corpus).unwrap();
        let collapsed = collapse_cycles(&expanded, &corpus).unwrap();
        assert_eq!(expanded.edges, collapsed.edges);
        assert!(collapsed.annotations.is_empty());
    }

    #[test]
    fn collapsed_counts_match_rle_oracle() {
        let mut r = crate::rng::root(12, 0);
        let symbols = ["C", "P", "R"];
        let corpus: Vec<EventSequence> = (0..60)
            .map(|i| {
                let len = r.gen_range(1..20);
                let chain: Vec<String> = (0..len)
                    .map(|_| symbols[r.gen_range(0..3)].to_string())
                    .collect();
                EventSequence::new(&format!("c{i}"), chain).unwrap()
            })
            .collect();
        let g = collapse_cycles(&build_process_graph(&corpus).unwrap(), &corpus).unwrap();
        let mut oracle: BTreeMap<(String, String), u64> = BTreeMap::new();
        for s in &corpus {
            let mut rle = vec![START.to_string()];
            for sym in &s.symbols {
                if rle.last().unwrap() != sym {
                    rle.push(sym.clone());
                }
            }
            rle.push(END.to_string());
            for w in rle.windows(2) {
                *oracle.entry((w[0].clone(), w[1].clone())).or_insert(0) += 1;
            }
        }
        assert_eq!(g.edges.len(), oracle.len());
        for e in &g.edges {
            assert_eq!(oracle[&(e.from.clone(), e.to.clone())], e.count);
            assert_ne!(e.from, e.to, "collapsed graph kept self-edge {}", e.from);
        }
    }

    #[test]
    fn proximity_extremes() {
        let corpus = vec![
            seq("a", "PPRR"),
            seq("b", "PPRR"),
            seq("c", "CCCC"),
        ];
        let g = build_proximity_graph(&corpus, 3, 0.9).unwrap();
        // identical sequences connected with similarity 1
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].0, 0);
        assert_eq!(g.edges[0].1, 1);
        assert!((g.edges[0].2 - 1.0).abs() < 1e-12);
        // the disjoint-alphabet case stays isolated
        let comps = g.components();
        assert_eq!(comps, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn three_cluster_corpus_recovers_components() {
        let profiles = ["PPPPPPPP", "RRRRRRRR", "CCCCCCCC"];
        let mut corpus = Vec::new();
        let mut r = crate::rng::root(13, 0);
        let symbols = ["C", "P", "R"];
        for (p, profile) in profiles.iter().enumerate() {
            for i in 0..5 {
                // one random off-profile symbol per case
                let mut chain: Vec<String> =
                    profile.chars().map(|c| c.to_string()).collect();
                let pos = r.gen_range(0..chain.len());
                chain[pos] = symbols[r.gen_range(0..3)].to_string();
                corpus.push(EventSequence::new(&format!("p{p}-{i}"), chain).unwrap());
            }
        }
        let g = build_proximity_graph(&corpus, 3, 0.5).unwrap();
        let comps = g.components();
        assert_eq!(comps.len(), 3);
        for comp in comps {
            let prefixes: BTreeSet<char> = comp
                .iter()
                .map(|&i| g.nodes[i].chars().nth(1).unwrap())
                .collect();
            assert_eq!(prefixes.len(), 1, "component mixed generator labels");
        }
    }

    #[test]
    fn levenshtein_similarity_flag() {
        let corpus = vec![seq("a", "PRC"), seq("b", "PRC"), seq("c", "PRR")];
        let g =
            build_proximity_graph_with(&corpus, 3, 0.6, SimilarityKind::Levenshtein).unwrap();
        let exact = g.edges.iter().find(|e| e.0 == 0 && e.1 == 1).unwrap();
        assert_eq!(exact.2, 1.0);
        // one substitution in three symbols gives similarity 2/3 >= 0.6
        assert!(g.edges.iter().any(|e| e.0 == 0 && e.1 == 2));
    }

    #[test]
    fn invalid_tau_rejected() {
        let corpus = vec![seq("a", "PR")];
        assert!(build_proximity_graph(&corpus, 3, 0.0).is_err());
        assert!(build_proximity_graph(&corpus, 3, 1.5).is_err());
    }

    #[test]
    fn csv_and_dot_exports() {
        let corpus = vec![seq("a", "PPR")];
        let g = collapse_cycles(&build_process_graph(&corpus).unwrap(), &corpus).unwrap();
        let csv = g.to_csv();
        assert!(csv.starts_with("from,to,count,probability\n"));
        assert!(csv.contains("P,R,1,1"));
        let dot = g.to_dot();
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("mean run 2.00"));
        assert!(dot.contains("\"P\" -> \"R\""));
    }
}
