//! Data-driven supplementary functions: an inverse-distance-weighted
//! surrogate of the error landscape, surrogate-ranked candidate proposals,
//! and phase-space discovery (distance, proximity graph, positioner).
//!
//! Distances are computed in bound-normalized coordinates so heterogeneous
//! parameter scales cannot dominate.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ParameterSpace;
use crate::rng;
use crate::tags::OperatorTag;

/// One observed (genotype, error) sample of the quality landscape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub genotype: Vec<f64>,
    pub error: f64,
    pub source: OperatorTag,
}

impl EvaluationRecord {
    pub fn new(genotype: Vec<f64>, error: f64, source: OperatorTag) -> Result<Self> {
        if !error.is_finite() || error < 0.0 {
            return Err(Error::InvalidInput(format!(
                "record error must be finite and >= 0, got {error}"
            )));
        }
        Ok(EvaluationRecord {
            genotype,
            error,
            source,
        })
    }
}

/// Inverse-distance-weighted (power 2) interpolator over evaluation
/// records. Exactly interpolates at record points; predictions stay within
/// the [min, max] record error envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub records: Vec<EvaluationRecord>,
    pub kernel_width: f64,
    pub space: ParameterSpace,
}

/// Fit the surrogate. Duplicate genotypes keep the latest record.
pub fn fit_surrogate(
    records: Vec<EvaluationRecord>,
    space: &ParameterSpace,
    kernel_width: f64,
) -> Result<SurrogateModel> {
    if records.is_empty() {
        return Err(Error::InvalidInput("need at least one record".into()));
    }
    if !(kernel_width > 0.0) {
        return Err(Error::InvalidInput("kernel_width must be > 0".into()));
    }
    for r in &records {
        if !space.contains(&r.genotype) {
            return Err(Error::InvalidInput(format!(
                "record genotype {:?} outside bounds",
                r.genotype
            )));
        }
    }
    let mut deduped: Vec<EvaluationRecord> = Vec::with_capacity(records.len());
    for r in records {
        if let Some(existing) = deduped.iter_mut().find(|e| e.genotype == r.genotype) {
            if existing.error != r.error {
                log::warn!(
                    "duplicate genotype {:?} with conflicting errors {} vs {}; keeping latest",
                    r.genotype,
                    existing.error,
                    r.error
                );
            }
            *existing = r;
        } else {
            deduped.push(r);
        }
    }
    Ok(SurrogateModel {
        records: deduped,
        kernel_width,
        space: space.clone(),
    })
}

fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Interpolated error estimate at an in-bounds genotype.
pub fn predict_quality(s: &SurrogateModel, genotype: &[f64]) -> Result<f64> {
    if !s.space.contains(genotype) {
        return Err(Error::InvalidInput(format!(
            "genotype {genotype:?} outside bounds"
        )));
    }
    if s.records.len() == 1 {
        return Ok(s.records[0].error);
    }
    let q = s.space.normalize(genotype);
    let mut num = 0.0;
    let mut den = 0.0;
    for r in &s.records {
        let d2 = sq_distance(&q, &s.space.normalize(&r.genotype)) / (s.kernel_width * s.kernel_width);
        if d2 < 1e-24 {
            return Ok(r.error); // exact interpolation at record points
        }
        let w = 1.0 / d2;
        num += w * r.error;
        den += w;
    }
    Ok(num / den)
}

/// Sample `pool` uniform genotypes, rank them by predicted quality, return
/// the best `n`. Usable as a population seeder.
pub fn propose_candidates(
    s: &SurrogateModel,
    n: usize,
    pool: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if n < 1 || pool < n {
        return Err(Error::InvalidInput(format!(
            "need pool >= n >= 1, got n={n}, pool={pool}"
        )));
    }
    let mut r = rng::stream(seed, 0x600d, 0);
    let mut scored: Vec<(f64, Vec<f64>)> = (0..pool)
        .map(|_| {
            let g = s.space.sample_uniform(&mut r);
            let q = predict_quality(s, &g)?;
            Ok((q, g))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(scored.into_iter().take(n).map(|(_, g)| g).collect())
}

/// Phase-space description over a record set: normalized distance metric,
/// proximity graph under a threshold, and a nearest-record positioner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceMap {
    pub distance: String,
    pub records: Vec<EvaluationRecord>,
    /// Symmetric edges (i, j, distance) with i < j and distance < tau.
    pub edges: Vec<(usize, usize, f64)>,
    /// Connected components as sorted record index lists.
    pub components: Vec<Vec<usize>>,
    pub tau: f64,
    space: ParameterSpace,
}

impl SpaceMap {
    /// Nearest record to a genotype: (record index, normalized distance).
    /// Linear scan; matches brute force by construction.
    pub fn position(&self, genotype: &[f64]) -> (usize, f64) {
        let q = self.space.normalize(genotype);
        let mut best = (0usize, f64::INFINITY);
        for (i, r) in self.records.iter().enumerate() {
            let d = sq_distance(&q, &self.space.normalize(&r.genotype)).sqrt();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

/// Build the proximity structure over records at threshold `tau`
/// (normalized-coordinate Euclidean distance).
pub fn discover_space(
    records: Vec<EvaluationRecord>,
    space: &ParameterSpace,
    tau: f64,
) -> Result<SpaceMap> {
    if records.is_empty() {
        return Err(Error::InvalidInput("need at least one record".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidInput("tau must be > 0".into()));
    }
    let normalized: Vec<Vec<f64>> = records
        .iter()
        .map(|r| space.normalize(&r.genotype))
        .collect();
    let n = records.len();
    let mut edges = Vec::new();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sq_distance(&normalized[i], &normalized[j]).sqrt();
            if d < tau {
                edges.push((i, j, d));
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    Ok(SpaceMap {
        distance: "euclidean/bound-normalized".into(),
        records,
        edges,
        components: groups.into_values().collect(),
        tau,
        space: space.clone(),
    })
}

/// Render records as `param1,...,paramK,error` CSV.
pub fn records_to_csv(records: &[EvaluationRecord], space: &ParameterSpace) -> String {
    use std::fmt::Write as _;
    let mut out = space.names().join(",");
    out.push_str(",error\n");
    for r in records {
        let row: Vec<String> = r
            .genotype
            .iter()
            .chain(std::iter::once(&r.error))
            .map(|v| v.to_string())
            .collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Parse the record CSV; the header must match the space's parameter names.
pub fn records_from_csv(text: &str, space: &ParameterSpace) -> Result<Vec<EvaluationRecord>> {
    let mut lines = text.lines();
    let expected = format!("{},error", space.names().join(","));
    match lines.next() {
        Some(h) if h.trim() == expected => {}
        other => {
            return Err(Error::Parse(format!(
                "expected header '{expected}', got {other:?}"
            )))
        }
    }
    let tag = OperatorTag::parse("Γ_{D→M}^{Ξ}")?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", i + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if fields.len() != space.dim() + 1 {
            return Err(Error::Parse(format!(
                "row {}: expected {} fields, got {}",
                i + 2,
                space.dim() + 1,
                fields.len()
            )));
        }
        let (genotype, error) = (fields[..space.dim()].to_vec(), fields[space.dim()]);
        out.push(EvaluationRecord::new(genotype, error, tag)?);
    }
    Ok(out)
}

pub fn read_records(path: &Path, space: &ParameterSpace) -> Result<Vec<EvaluationRecord>> {
    records_from_csv(&std::fs::read_to_string(path)?, space)
}
