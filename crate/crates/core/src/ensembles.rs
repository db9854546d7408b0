//! Ensemble classes and least-squares weight estimation.
//!
//! Three ensemble kinds are supported: alternative models (one member per
//! forcing/implementation), parameter diversity (one model at many
//! parameter settings), and meta-ensemble (weights live in the genotype
//! and are evolved rather than fitted).
//!
//! Weights are plain unconstrained OLS without an intercept, solved by SVD
//! so rank-deficient systems get the minimum-norm solution. Because unit
//! weight vectors are feasible OLS points, the fitted ensemble can never
//! have a worse training residual than any single member.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Population;
use crate::models::{ModelEvaluator, ParameterSpace};
use crate::series::{StationSeries, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    AlternativeModels,
    ParameterDiversity,
    MetaEnsemble,
}

/// Fitted member weights plus a description of the window they were fit on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub weights: Vec<f64>,
    pub fitted_on: String,
    /// True when the stacked design matrix was rank-deficient and the
    /// minimum-norm solution was returned.
    pub rank_deficient: bool,
}

/// Fraction of ticks used as the default training window.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

/// Solve the no-intercept normal equations over all stations and ticks.
///
/// Member outputs and observations must share station keys and lengths.
/// Rank-deficient systems (e.g. duplicated members) are flagged and get
/// the minimum-norm solution.
pub fn fit_weights_ols(
    member_outputs: &[StationSeries],
    observations: &StationSeries,
) -> Result<EnsembleWeights> {
    if member_outputs.is_empty() {
        return Err(Error::InvalidInput("no ensemble members".into()));
    }
    let k = member_outputs.len();
    let stations: Vec<&String> = observations.keys().collect();
    let mut rows = 0usize;
    for s in &stations {
        rows += observations[*s].len();
    }
    if rows < k {
        return Err(Error::InvalidInput(format!(
            "need at least {k} samples to fit {k} weights, got {rows}"
        )));
    }

    let mut x = DMatrix::<f64>::zeros(rows, k);
    let mut y = DVector::<f64>::zeros(rows);
    let mut row = 0;
    for s in &stations {
        let obs = &observations[*s];
        for (j, member) in member_outputs.iter().enumerate() {
            let out = member.get(*s).ok_or_else(|| {
                Error::InvalidInput(format!("member {j} missing station '{s}'"))
            })?;
            if out.len() != obs.len() {
                return Err(Error::InvalidInput(format!(
                    "member {j}, station '{s}': length {} vs observed {}",
                    out.len(),
                    obs.len()
                )));
            }
            for (i, v) in out.values().iter().enumerate() {
                x[(row + i, j)] = *v;
            }
        }
        for (i, v) in obs.values().iter().enumerate() {
            y[row + i] = *v;
        }
        row += obs.len();
    }

    let svd = x.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = max_sv * 1e-10;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let rank_deficient = rank < k;
    if rank_deficient {
        log::warn!("OLS design matrix rank {rank} < {k}; returning minimum-norm solution");
    }
    let w = svd
        .solve(&y, tol)
        .map_err(|e| Error::Contract(format!("SVD solve failed: {e}")))?;

    Ok(EnsembleWeights {
        weights: w.iter().cloned().collect(),
        fitted_on: format!("{rows} samples over {} stations", stations.len()),
        rank_deficient,
    })
}

/// Pointwise weighted sum of member outputs.
pub fn weighted_sum(member_outputs: &[StationSeries], weights: &[f64]) -> Result<StationSeries> {
    if member_outputs.len() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "{} members vs {} weights",
            member_outputs.len(),
            weights.len()
        )));
    }
    let first = &member_outputs[0];
    let mut out = StationSeries::new();
    for (station, base) in first {
        let mut acc = vec![0.0; base.len()];
        for (member, w) in member_outputs.iter().zip(weights) {
            let series = member.get(station).ok_or_else(|| {
                Error::InvalidInput(format!("member missing station '{station}'"))
            })?;
            for (a, v) in acc.iter_mut().zip(series.values()) {
                *a += w * v;
            }
        }
        out.insert(station.clone(), TimeSeries::new(base.times().to_vec(), acc)?);
    }
    Ok(out)
}

/// A weighted combination of member models.
pub struct EnsembleModel<'a> {
    pub kind: EnsembleKind,
    /// (evaluator, genotype) per member.
    pub members: Vec<(&'a dyn ModelEvaluator, Vec<f64>)>,
    pub weights: Option<EnsembleWeights>,
}

impl<'a> EnsembleModel<'a> {
    pub fn new(kind: EnsembleKind, members: Vec<(&'a dyn ModelEvaluator, Vec<f64>)>) -> Result<Self> {
        if matches!(
            kind,
            EnsembleKind::AlternativeModels | EnsembleKind::ParameterDiversity
        ) && members.len() < 2
        {
            return Err(Error::InvalidInput(format!(
                "{kind:?} ensemble needs >= 2 members, got {}",
                members.len()
            )));
        }
        Ok(EnsembleModel {
            kind,
            members,
            weights: None,
        })
    }

    /// Evaluate every member on its own evaluator.
    pub fn member_outputs(&self) -> Result<Vec<StationSeries>> {
        self.members
            .iter()
            .map(|(eval, genotype)| eval.evaluate(genotype))
            .collect()
    }

    /// Fit OLS weights against observations (typically a training window).
    pub fn fit(&mut self, observations: &StationSeries) -> Result<&EnsembleWeights> {
        let outputs: Vec<StationSeries> = self
            .member_outputs()?
            .into_iter()
            .map(|m| restrict_to(&m, observations))
            .collect::<Result<_>>()?;
        self.weights = Some(fit_weights_ols(&outputs, observations)?);
        Ok(self.weights.as_ref().unwrap())
    }

    /// Weighted prediction on the members' full output.
    pub fn predict(&self) -> Result<StationSeries> {
        let weights = self
            .weights
            .as_ref()
            .ok_or_else(|| Error::Contract("ensemble weights not fitted".into()))?;
        weighted_sum(&self.member_outputs()?, &weights.weights)
    }

    /// JSON export: kind, member descriptors, weights, training window.
    pub fn weights_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Export<'b> {
            kind: &'b EnsembleKind,
            members: Vec<String>,
            weights: &'b [f64],
            fitted_on: &'b str,
            rank_deficient: bool,
        }
        let w = self
            .weights
            .as_ref()
            .ok_or_else(|| Error::Contract("ensemble weights not fitted".into()))?;
        let export = Export {
            kind: &self.kind,
            members: self
                .members
                .iter()
                .map(|(e, g)| format!("{} @ {g:?}", e.describe()))
                .collect(),
            weights: &w.weights,
            fitted_on: &w.fitted_on,
            rank_deficient: w.rank_deficient,
        };
        serde_json::to_string_pretty(&export).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Truncate member output to the window covered by `observations`.
fn restrict_to(member: &StationSeries, observations: &StationSeries) -> Result<StationSeries> {
    let mut out = StationSeries::new();
    for (station, obs) in observations {
        let m = member
            .get(station)
            .ok_or_else(|| Error::InvalidInput(format!("member missing station '{station}'")))?;
        if m.len() < obs.len() {
            return Err(Error::InvalidInput(format!(
                "member series shorter than observations at '{station}'"
            )));
        }
        out.insert(
            station.clone(),
            TimeSeries::new(m.times()[..obs.len()].to_vec(), m.values()[..obs.len()].to_vec())?,
        );
    }
    Ok(out)
}

/// Build a parameter-diversity ensemble from an evaluated population: same
/// model, one member per individual genotype, OLS weights.
pub fn build_parameter_diversity<'a>(
    pop: &Population,
    evaluator: &'a dyn ModelEvaluator,
    observations: &StationSeries,
) -> Result<EnsembleModel<'a>> {
    if pop.members.len() < 2 {
        return Err(Error::InvalidInput(
            "parameter-diversity ensemble needs a population of >= 2".into(),
        ));
    }
    if pop.members.iter().any(|m| m.objectives.is_empty()) {
        return Err(Error::Contract("population must be evaluated".into()));
    }
    let members = pop
        .members
        .iter()
        .map(|ind| (evaluator, ind.genotype.clone()))
        .collect();
    let mut ensemble = EnsembleModel::new(EnsembleKind::ParameterDiversity, members)?;
    ensemble.fit(observations)?;
    Ok(ensemble)
}

/// Extend a parameter space with one bounded weight gene per ensemble
/// member, making the weights evolvable (meta-ensemble).
pub fn extend_space_meta(
    space: &ParameterSpace,
    n_members: usize,
    weight_bounds: (f64, f64),
) -> Result<ParameterSpace> {
    let mut params: Vec<(String, f64, f64)> = space
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.lower, p.upper))
        .collect();
    for i in 0..n_members {
        params.push((format!("w{i}"), weight_bounds.0, weight_bounds.1));
    }
    let refs: Vec<(&str, f64, f64)> = params
        .iter()
        .map(|(n, l, u)| (n.as_str(), *l, *u))
        .collect();
    ParameterSpace::new(refs)
}

/// Split an extended meta-ensemble genotype into (model params, weights).
pub fn split_meta_genotype(genotype: &[f64], base_dim: usize) -> (&[f64], &[f64]) {
    genotype.split_at(base_dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::station_fitness;
    use crate::models::{generate_scenario, simulate};
    use crate::rng;

    fn single(station: &str, values: &[f64]) -> StationSeries {
        [(
            station.to_string(),
            TimeSeries::from_values(values.to_vec()).unwrap(),
        )]
        .into()
    }

    #[test]
    fn exact_member_gets_unit_weight() {
        let obs = single("a", &[1.0, 2.0, 3.0, 4.0]);
        let m0 = obs.clone();
        let m1 = single("a", &[0.3, -0.4, 1.0, 0.0]);
        let w = fit_weights_ols(&[m0.clone(), m1.clone()], &obs).unwrap();
        let pred = weighted_sum(&[m0, m1], &w.weights).unwrap();
        let resid = station_fitness(&pred, &obs).unwrap().value;
        assert!(resid < 1e-9, "residual {resid}");
        assert!((w.weights[0] - 1.0).abs() < 1e-9);
        assert!(w.weights[1].abs() < 1e-9);
    }

    #[test]
    fn single_member_matches_scalar_normal_equation() {
        let h = [1.0, 2.0, 0.5, -1.0];
        let y = [2.0, 3.5, 1.0, -2.5];
        let obs = single("a", &y);
        let member = single("a", &h);
        let w = fit_weights_ols(&[member], &obs).unwrap();
        let num: f64 = h.iter().zip(&y).map(|(a, b)| a * b).sum();
        let den: f64 = h.iter().map(|a| a * a).sum();
        assert!((w.weights[0] - num / den).abs() < 1e-12);
    }

    #[test]
    fn duplicate_members_flag_rank_deficiency() {
        let obs = single("a", &[1.0, 2.0, 3.0]);
        let m = single("a", &[1.0, 1.0, 1.0]);
        let w = fit_weights_ols(&[m.clone(), m], &obs).unwrap();
        assert!(w.rank_deficient);
        assert!(w.weights.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn all_zero_members_return_minimum_norm() {
        let obs = single("a", &[1.0, 2.0, 3.0]);
        let z = single("a", &[0.0, 0.0, 0.0]);
        let w = fit_weights_ols(&[z.clone(), z], &obs).unwrap();
        assert!(w.rank_deficient);
    }

    #[test]
    fn too_few_samples_rejected() {
        let obs = single("a", &[1.0]);
        let m = single("a", &[1.0]);
        assert!(fit_weights_ols(&[m.clone(), m], &obs).is_err());
    }

    #[test]
    fn weighted_sum_examples() {
        let m0 = single("a", &[1.0, 2.0, 3.0]);
        let m1 = single("a", &[4.0, 0.0, -2.0]);
        let picked = weighted_sum(&[m0.clone(), m1.clone()], &[1.0, 0.0]).unwrap();
        assert_eq!(picked, m0);
        let mixed = weighted_sum(&[m0.clone(), m0.clone()], &[0.5, 0.5]).unwrap();
        assert_eq!(mixed, m0);
        let hand = weighted_sum(&[m0, m1], &[2.0, -1.0]).unwrap();
        assert_eq!(hand["a"].values(), &[-2.0, 4.0, 8.0]);
    }

    #[test]
    fn predict_linear_in_weights() {
        let m0 = single("a", &[1.0, 2.0]);
        let m1 = single("a", &[3.0, -1.0]);
        let members = vec![m0, m1];
        let w1 = [0.3, 0.7];
        let w2 = [-0.5, 0.2];
        let sum_w: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a + b).collect();
        let p1 = weighted_sum(&members, &w1).unwrap();
        let p2 = weighted_sum(&members, &w2).unwrap();
        let p12 = weighted_sum(&members, &sum_w).unwrap();
        for (v, (a, b)) in p12["a"]
            .values()
            .iter()
            .zip(p1["a"].values().iter().zip(p2["a"].values()))
        {
            assert!((v - (a + b)).abs() < 1e-12);
        }
    }

    #[test]
    fn ols_dominates_members_in_sample() {
        // over many random scenarios, fitted ensemble training RMSE never
        // exceeds the best member's
        for seed in 0..25u64 {
            let sc = generate_scenario(seed, 2, 24, 0.1).unwrap();
            let mut r = rng::root(seed, 99);
            let g0 = sc.space.sample_uniform(&mut r);
            let g1 = sc.space.sample_uniform(&mut r);
            let m0 = simulate(&sc.space, &g0, &sc.forcings[0]).unwrap();
            let m1 = simulate(&sc.space, &g1, &sc.forcings[1]).unwrap();
            let w = fit_weights_ols(&[m0.clone(), m1.clone()], &sc.observations).unwrap();
            let pred = weighted_sum(&[m0.clone(), m1.clone()], &w.weights).unwrap();
            let ens = station_fitness(&pred, &sc.observations).unwrap().value;
            let e0 = station_fitness(&m0, &sc.observations).unwrap().value;
            let e1 = station_fitness(&m1, &sc.observations).unwrap().value;
            assert!(
                ens <= e0.min(e1) + 1e-9,
                "seed {seed}: ensemble {ens} > best member {}",
                e0.min(e1)
            );
        }
    }

    #[test]
    fn ols_matches_coarse_grid_search_two_members() {
        let obs = single("a", &[1.0, 2.0, 1.5, 0.5, 2.5]);
        let m0 = single("a", &[0.8, 1.7, 1.9, 0.2, 2.0]);
        let m1 = single("a", &[1.5, 2.5, 1.0, 1.0, 3.0]);
        let fitted = fit_weights_ols(&[m0.clone(), m1.clone()], &obs).unwrap();
        let fitted_err = {
            let p = weighted_sum(&[m0.clone(), m1.clone()], &fitted.weights).unwrap();
            station_fitness(&p, &obs).unwrap().value
        };
        // brute-force grid over weights
        let mut best = f64::INFINITY;
        let steps = 400;
        for i in 0..=steps {
            for j in 0..=steps {
                let w = [
                    -2.0 + 4.0 * i as f64 / steps as f64,
                    -2.0 + 4.0 * j as f64 / steps as f64,
                ];
                let p = weighted_sum(&[m0.clone(), m1.clone()], &w).unwrap();
                best = best.min(station_fitness(&p, &obs).unwrap().value);
            }
        }
        assert!(fitted_err <= best + 1e-6, "OLS {fitted_err} vs grid {best}");
    }

    #[test]
    fn meta_extension_arithmetic() {
        let space = crate::models::benchmark_space();
        let ext = extend_space_meta(&space, 2, (-2.0, 2.0)).unwrap();
        assert_eq!(ext.dim(), 4);
        assert_eq!(ext.names(), ["drag", "wcr", "w0", "w1"]);
        let genotype = [1.0, 0.5, 0.3, 0.7];
        let (params, weights) = split_meta_genotype(&genotype, 2);
        assert_eq!(params, &[1.0, 0.5]);
        assert_eq!(weights, &[0.3, 0.7]);
    }
}
