//! Model abstraction plus the synthetic pseudo-metocean benchmark and the
//! exhaustive grid-search oracle.
//!
//! The benchmark stands in for an expensive wave model driven by two
//! alternative wind reanalyses. Wave height at station `s` and tick `t` is
//!
//! ```text
//! h = c1_s * sqrt(drag) * w_s(t) * exp(-wcr * c2_s * w_s(t))
//! ```
//!
//! with fixed station constants `c1_s = 0.6 + 0.08 s` and
//! `c2_s = 0.12 + 0.04 s` (s = station index). The surface is smooth,
//! non-linear in both parameters, and has a unique interior optimum under
//! mild noise.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::station_fitness;
use crate::rng;
use crate::series::{self, StationSeries, TimeSeries};

/// Bounded, ordered parameter space. The ordering is the genotype layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    params: Vec<ParamDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl ParameterSpace {
    pub fn new(params: Vec<(&str, f64, f64)>) -> Result<Self> {
        let defs: Vec<ParamDef> = params
            .into_iter()
            .map(|(name, lower, upper)| ParamDef {
                name: name.to_string(),
                lower,
                upper,
            })
            .collect();
        let mut names: Vec<&str> = defs.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != defs.len() {
            return Err(Error::InvalidInput("duplicate parameter names".into()));
        }
        for p in &defs {
            if !(p.lower < p.upper) {
                return Err(Error::InvalidInput(format!(
                    "parameter '{}': lower {} must be < upper {}",
                    p.name, p.lower, p.upper
                )));
            }
        }
        Ok(ParameterSpace { params: defs })
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[ParamDef] {
        &self.params
    }

    pub fn names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn range(&self, i: usize) -> f64 {
        self.params[i].upper - self.params[i].lower
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        values.len() == self.dim()
            && values
                .iter()
                .zip(&self.params)
                .all(|(v, p)| v.is_finite() && *v >= p.lower && *v <= p.upper)
    }

    pub fn clamp(&self, values: &mut [f64]) {
        for (v, p) in values.iter_mut().zip(&self.params) {
            *v = v.clamp(p.lower, p.upper);
        }
    }

    /// Bound-normalized coordinates in [0,1] per dimension.
    pub fn normalize(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(&self.params)
            .map(|(v, p)| (v - p.lower) / (p.upper - p.lower))
            .collect()
    }

    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.params
            .iter()
            .map(|p| rng.gen_range(p.lower..=p.upper))
            .collect()
    }

    /// `resolution` evenly spaced nodes per axis, bounds inclusive.
    pub fn axis(&self, i: usize, resolution: usize) -> Vec<f64> {
        let p = &self.params[i];
        (0..resolution)
            .map(|k| p.lower + (p.upper - p.lower) * k as f64 / (resolution - 1) as f64)
            .collect()
    }

    pub fn vector(&self, values: Vec<f64>) -> Result<ParameterVector> {
        if !self.contains(&values) {
            return Err(Error::InvalidInput(format!(
                "values {values:?} outside space bounds"
            )));
        }
        Ok(ParameterVector { values })
    }
}

/// A point inside a [`ParameterSpace`], validated at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// The two-parameter benchmark space: drag and whitecapping rate.
pub fn benchmark_space() -> ParameterSpace {
    ParameterSpace::new(vec![("drag", 0.1, 3.0), ("wcr", 0.1, 3.0)]).unwrap()
}

/// Published station constants of the benchmark model.
pub fn station_constants(station_index: usize) -> (f64, f64) {
    let s = station_index as f64;
    (0.6 + 0.08 * s, 0.12 + 0.04 * s)
}

pub fn station_id(index: usize) -> String {
    format!("st{index:02}")
}

/// One named wind forcing (a synthetic stand-in for a reanalysis product).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingSeries {
    pub name: String,
    per_station: StationSeries,
}

impl ForcingSeries {
    pub fn new(name: &str, per_station: StationSeries) -> Result<Self> {
        let mut iter = per_station.values();
        if let Some(first) = iter.next() {
            for s in iter {
                if !first.same_timestamps(s) {
                    return Err(Error::InvalidInput(
                        "forcing stations must share timestamps".into(),
                    ));
                }
            }
        }
        if per_station
            .values()
            .any(|s| s.values().iter().any(|v| *v < 0.0))
        {
            return Err(Error::InvalidInput("wind values must be >= 0".into()));
        }
        Ok(ForcingSeries {
            name: name.to_string(),
            per_station,
        })
    }

    pub fn per_station(&self) -> &StationSeries {
        &self.per_station
    }

    pub fn stations(&self) -> Vec<&str> {
        self.per_station.keys().map(|s| s.as_str()).collect()
    }
}

/// Apply the benchmark model: genotype plus forcing to wave heights.
pub fn simulate(
    space: &ParameterSpace,
    genotype: &[f64],
    forcing: &ForcingSeries,
) -> Result<StationSeries> {
    if space.names() != ["drag", "wcr"] {
        return Err(Error::InvalidModel(format!(
            "benchmark expects parameters [drag, wcr], got {:?}",
            space.names()
        )));
    }
    if !space.contains(genotype) {
        return Err(Error::InvalidModel(format!(
            "genotype {genotype:?} outside benchmark bounds"
        )));
    }
    let (drag, wcr) = (genotype[0], genotype[1]);
    let mut out = StationSeries::new();
    for (idx, (station, wind)) in forcing.per_station.iter().enumerate() {
        let (c1, c2) = station_constants(idx);
        let values = wind
            .values()
            .iter()
            .map(|w| c1 * drag.sqrt() * w * (-wcr * c2 * w).exp())
            .collect();
        out.insert(
            station.clone(),
            TimeSeries::new(wind.times().to_vec(), values)?,
        );
    }
    Ok(out)
}

/// A synthetic calibration problem: two forcings, noisy observations, and
/// the hidden true parameters that generated them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub space: ParameterSpace,
    pub forcings: Vec<ForcingSeries>,
    pub observations: StationSeries,
    pub true_params: ParameterVector,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Scenario {
    /// Model evaluator bound to one forcing.
    pub fn evaluator(&self, forcing_index: usize) -> Result<BenchmarkEvaluator> {
        let forcing = self.forcings.get(forcing_index).ok_or_else(|| {
            Error::InvalidInput(format!(
                "forcing index {forcing_index} out of range ({} available)",
                self.forcings.len()
            ))
        })?;
        Ok(BenchmarkEvaluator {
            space: self.space.clone(),
            forcing: forcing.clone(),
        })
    }
}

/// Anything that can turn a genotype into simulated station data.
pub trait ModelEvaluator: Sync {
    fn space(&self) -> &ParameterSpace;
    fn evaluate(&self, genotype: &[f64]) -> Result<StationSeries>;
    fn describe(&self) -> String;
}

/// The benchmark model bound to one forcing.
#[derive(Debug, Clone)]
pub struct BenchmarkEvaluator {
    space: ParameterSpace,
    forcing: ForcingSeries,
}

impl ModelEvaluator for BenchmarkEvaluator {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn evaluate(&self, genotype: &[f64]) -> Result<StationSeries> {
        simulate(&self.space, genotype, &self.forcing)
    }

    fn describe(&self) -> String {
        format!("benchmark[{}]", self.forcing.name)
    }
}

/// Build a fully seeded synthetic scenario.
///
/// True parameters are drawn from the interior 60% of the bounds,
/// forcing-A is a smooth pseudo-random wind, forcing-B is forcing-A with a
/// seeded multiplicative perturbation, and observations are the true-model
/// output on forcing-A plus Gaussian noise.
pub fn generate_scenario(
    seed: u64,
    n_stations: usize,
    n_ticks: usize,
    noise_sigma: f64,
) -> Result<Scenario> {
    if n_stations < 1 {
        return Err(Error::InvalidInput("n_stations must be >= 1".into()));
    }
    if n_ticks < 2 {
        return Err(Error::InvalidInput("n_ticks must be >= 2".into()));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::InvalidInput("noise_sigma must be >= 0".into()));
    }

    let space = benchmark_space();
    let mut param_rng = rng::stream(seed, 0, 0);
    let true_values: Vec<f64> = space
        .params()
        .iter()
        .map(|p| {
            let u: f64 = param_rng.gen();
            p.lower + (0.2 + 0.6 * u) * (p.upper - p.lower)
        })
        .collect();
    let true_params = space.vector(true_values)?;

    let times: Vec<i64> = (0..n_ticks as i64).collect();
    let mut forcing_a = StationSeries::new();
    for s in 0..n_stations {
        let mut r = rng::stream(seed, 1, s as u64);
        let base: f64 = r.gen_range(3.0..6.0);
        let amp1: f64 = r.gen_range(0.5..1.5);
        let amp2: f64 = r.gen_range(0.3..1.0);
        let period1: f64 = r.gen_range(20.0..40.0);
        let period2: f64 = r.gen_range(5.0..15.0);
        let phase1: f64 = r.gen_range(0.0..std::f64::consts::TAU);
        let phase2: f64 = r.gen_range(0.0..std::f64::consts::TAU);
        let values: Vec<f64> = times
            .iter()
            .map(|&t| {
                let t = t as f64;
                let w = base
                    + amp1 * (std::f64::consts::TAU * t / period1 + phase1).sin()
                    + amp2 * (std::f64::consts::TAU * t / period2 + phase2).sin();
                w.max(0.0)
            })
            .collect();
        forcing_a.insert(station_id(s), TimeSeries::new(times.clone(), values)?);
    }
    let forcing_a = ForcingSeries::new("forcing-A", forcing_a)?;

    // forcing-B mimics a second reanalysis: same weather, biased and jittered.
    let mut forcing_b = StationSeries::new();
    for (s, (station, wind)) in forcing_a.per_station().iter().enumerate() {
        let mut r = rng::stream(seed, 2, s as u64);
        let bias: f64 = r.gen_range(0.03..0.10);
        let period: f64 = r.gen_range(10.0..30.0);
        let phase: f64 = r.gen_range(0.0..std::f64::consts::TAU);
        let jitter = Normal::new(0.0, 0.02).unwrap();
        let values: Vec<f64> = wind
            .values()
            .iter()
            .zip(wind.times())
            .map(|(w, &t)| {
                let factor = 1.0
                    + bias * (std::f64::consts::TAU * t as f64 / period + phase).sin()
                    + bias
                    + jitter.sample(&mut r);
                (w * factor).max(0.0)
            })
            .collect();
        forcing_b.insert(station.clone(), TimeSeries::new(wind.times().to_vec(), values)?);
    }
    let forcing_b = ForcingSeries::new("forcing-B", forcing_b)?;

    let clean = simulate(&space, true_params.values(), &forcing_a)?;
    let mut observations = StationSeries::new();
    for (s, (station, series)) in clean.iter().enumerate() {
        let mut r = rng::stream(seed, 3, s as u64);
        let values: Vec<f64> = if noise_sigma > 0.0 {
            let noise = Normal::new(0.0, noise_sigma).unwrap();
            series
                .values()
                .iter()
                .map(|v| v + noise.sample(&mut r))
                .collect()
        } else {
            series.values().to_vec()
        };
        observations.insert(
            station.clone(),
            TimeSeries::new(series.times().to_vec(), values)?,
        );
    }

    Ok(Scenario {
        space,
        forcings: vec![forcing_a, forcing_b],
        observations,
        true_params,
        noise_sigma,
        seed,
    })
}

/// Gridded error surface over the parameter space; the grid-search oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub space: ParameterSpace,
    pub resolution: Vec<usize>,
    /// Row-major over the axes (first axis outermost).
    pub errors: Vec<f64>,
    pub argmin_index: Vec<usize>,
    /// Grid node coordinates per axis.
    pub axes: Vec<Vec<f64>>,
}

impl Landscape {
    pub fn node_values(&self, index: &[usize]) -> Vec<f64> {
        index
            .iter()
            .zip(&self.axes)
            .map(|(&i, axis)| axis[i])
            .collect()
    }

    pub fn min_error(&self) -> f64 {
        let flat = self.flat_index(&self.argmin_index);
        self.errors[flat]
    }

    fn flat_index(&self, index: &[usize]) -> usize {
        let mut flat = 0;
        for (i, &r) in index.iter().zip(&self.resolution) {
            flat = flat * r + i;
        }
        flat
    }

    pub fn error_range(&self) -> f64 {
        let min = self.errors.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = self.errors.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max - min
    }
}

/// Evaluate the fitness of every node on a uniform resolution² grid over
/// (drag, wcr). Exactly `resolution * resolution` model evaluations.
pub fn grid_landscape(
    scenario: &Scenario,
    forcing_index: usize,
    resolution: usize,
) -> Result<Landscape> {
    if resolution < 2 {
        return Err(Error::InvalidInput("resolution must be >= 2".into()));
    }
    let evaluator = scenario.evaluator(forcing_index)?;
    let space = &scenario.space;
    let axes: Vec<Vec<f64>> = (0..space.dim()).map(|i| space.axis(i, resolution)).collect();

    let total = resolution * resolution;
    // parallel over nodes; index-addressed so order cannot matter
    let errors: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let (i, j) = (flat / resolution, flat % resolution);
            let genotype = vec![axes[0][i], axes[1][j]];
            let predictions = evaluator.evaluate(&genotype)?;
            Ok(station_fitness(&predictions, &scenario.observations)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;

    // first-in-row-major tie rule
    let mut argmin_flat = 0;
    for (k, e) in errors.iter().enumerate() {
        if *e < errors[argmin_flat] {
            argmin_flat = k;
        }
    }
    let argmin_index = vec![argmin_flat / resolution, argmin_flat % resolution];

    Ok(Landscape {
        space: space.clone(),
        resolution: vec![resolution, resolution],
        errors,
        argmin_index,
        axes,
    })
}

/// Parameter vector and error at the landscape minimum.
pub fn landscape_argmin(l: &Landscape) -> (ParameterVector, f64) {
    let values = l.node_values(&l.argmin_index);
    let v = l.space.vector(values).expect("grid nodes are in bounds");
    (v, l.min_error())
}

/// Render as `<name1>,<name2>,error` CSV, row-major over the grid.
pub fn landscape_to_csv(l: &Landscape) -> String {
    use std::fmt::Write as _;
    let names = l.space.names();
    let mut out = format!("{},{},error\n", names[0], names[1]);
    let (r0, r1) = (l.resolution[0], l.resolution[1]);
    for i in 0..r0 {
        for j in 0..r1 {
            let _ = writeln!(out, "{},{},{}", l.axes[0][i], l.axes[1][j], l.errors[i * r1 + j]);
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioSidecar {
    space: ParameterSpace,
    true_params: ParameterVector,
    seed: u64,
    noise_sigma: f64,
    forcing_names: Vec<String>,
}

/// Write a scenario as CSV series files plus a JSON sidecar.
pub fn save_scenario(dir: &Path, scenario: &Scenario) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    series::write_csv(&dir.join("observations.csv"), &scenario.observations)?;
    for f in &scenario.forcings {
        series::write_csv(&dir.join(format!("{}.csv", f.name)), f.per_station())?;
    }
    let sidecar = ScenarioSidecar {
        space: scenario.space.clone(),
        true_params: scenario.true_params.clone(),
        seed: scenario.seed,
        noise_sigma: scenario.noise_sigma,
        forcing_names: scenario.forcings.iter().map(|f| f.name.clone()).collect(),
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::Parse(format!("sidecar encode: {e}")))?;
    std::fs::write(dir.join("scenario.json"), json)?;
    Ok(())
}

pub fn load_scenario(dir: &Path) -> Result<Scenario> {
    let sidecar: ScenarioSidecar =
        serde_json::from_str(&std::fs::read_to_string(dir.join("scenario.json"))?)
            .map_err(|e| Error::Parse(format!("scenario.json: {e}")))?;
    let observations = series::read_csv(&dir.join("observations.csv"))?;
    let mut forcings = Vec::new();
    for name in &sidecar.forcing_names {
        let map = series::read_csv(&dir.join(format!("{name}.csv")))?;
        forcings.push(ForcingSeries::new(name, map)?);
    }
    Ok(Scenario {
        space: sidecar.space,
        forcings,
        observations,
        true_params: sidecar.true_params,
        noise_sigma: sidecar.noise_sigma,
        seed: sidecar.seed,
    })
}
