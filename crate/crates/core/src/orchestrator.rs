//! Config-driven pipeline: wires the modules into the four-step management
//! loop under the P1–P6 composition patterns, with reproducible run logs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ensembles::{
    build_parameter_diversity, extend_space_meta, split_meta_genotype, EnsembleKind,
    EnsembleModel,
};
use crate::error::{Error, Result};
use crate::evolution::{coevolve, evolve, evolve_with, EvolutionConfig, PairingStrategy};
use crate::metrics::station_fitness;
use crate::models::{
    benchmark_space, generate_scenario, grid_landscape, load_scenario, ModelEvaluator,
    ParameterSpace, Scenario,
};
use crate::rng;
use crate::sequences::{
    assimilate_event, cluster_sequences, fraction_in_cluster, generate_continuations,
    parse_corpus, AssimilationMode, ContinuationConfig,
};
use crate::series::StationSeries;
use crate::surrogate::{
    discover_space, fit_surrogate, propose_candidates, read_records, records_to_csv,
    EvaluationRecord,
};
use crate::tags::{Concept, Layer, OperatorTag};

/// Composition patterns of the management framework.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
}

impl Pattern {
    pub const ALL: [Pattern; 6] = [
        Pattern::P1,
        Pattern::P2,
        Pattern::P3,
        Pattern::P4,
        Pattern::P5,
        Pattern::P6,
    ];
}

/// Loop steps each pattern runs, in order. Step 4 (assimilation) is driven
/// by the config section, not the pattern.
pub fn pattern_steps(pattern: Pattern) -> &'static [u8] {
    match pattern {
        Pattern::P1 => &[3],
        Pattern::P2 => &[1, 2],
        Pattern::P3 => &[3],
        Pattern::P4 => &[1, 2, 3],
        Pattern::P5 => &[3],
        Pattern::P6 => &[1],
    }
}

pub fn tag_space_discovery() -> OperatorTag {
    OperatorTag::new(
        Layer::Data,
        Layer::Model,
        Concept::Structural,
        Concept::Structural,
    )
    .primed()
}

pub fn tag_surrogate_fit() -> OperatorTag {
    OperatorTag::new(
        Layer::Data,
        Layer::Model,
        Concept::Functional,
        Concept::Functional,
    )
    .primed()
}

pub fn tag_evolution() -> OperatorTag {
    OperatorTag::intra(Layer::Model, Concept::Quantitative)
}

pub fn tag_ensemble_fit() -> OperatorTag {
    OperatorTag::intra(Layer::Model, Concept::Functional)
}

pub fn tag_assimilation() -> OperatorTag {
    OperatorTag::new(
        Layer::Data,
        Layer::Model,
        Concept::Quantitative,
        Concept::Quantitative,
    )
    .primed()
}

/// Published pattern → tag table; the set of tags a single repetition of
/// each preset emits (step 4 excluded, it is config-driven).
pub fn pattern_tags(pattern: Pattern) -> Vec<OperatorTag> {
    match pattern {
        Pattern::P1 | Pattern::P5 => vec![tag_evolution()],
        Pattern::P2 => vec![tag_space_discovery(), tag_surrogate_fit()],
        Pattern::P3 => vec![tag_evolution(), tag_ensemble_fit()],
        Pattern::P4 => vec![tag_space_discovery(), tag_surrogate_fit(), tag_evolution()],
        Pattern::P6 => vec![tag_space_discovery()],
    }
}

/// Where the calibration scenario comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSource {
    Path {
        path: PathBuf,
    },
    Generate {
        seed: u64,
        n_stations: usize,
        n_ticks: usize,
        noise_sigma: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateSettings {
    /// Pre-computed evaluation records; required for P6 (zero evaluations).
    pub records_path: Option<PathBuf>,
    /// Uniform samples drawn (and evaluated) when no records file is given.
    pub samples: usize,
    pub kernel_width: f64,
    /// Proximity threshold of the discovered space map.
    pub tau: f64,
    /// Candidate pool ranked by the surrogate when seeding P4 evolution.
    pub pool: usize,
}

impl Default for SurrogateSettings {
    fn default() -> Self {
        SurrogateSettings {
            records_path: None,
            samples: 40,
            kernel_width: 0.25,
            tau: 0.35,
            pool: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSettings {
    pub kind: EnsembleKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssimilationSettings {
    pub corpus_path: PathBuf,
    pub prefix: Vec<String>,
    pub events: Vec<String>,
    pub mode: AssimilationMode,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_continuation_pop")]
    pub population_size: usize,
    #[serde(default = "default_mutation_rate")]
    pub mutation_rate: f64,
}

fn default_k() -> usize {
    3
}
fn default_n() -> usize {
    3
}
fn default_continuation_pop() -> usize {
    50
}
fn default_mutation_rate() -> f64 {
    0.2
}
fn default_repeats() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub pattern: Pattern,
    #[serde(default)]
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// "The steps can be repeated in various combination": how many times
    /// the pattern's step list is repeated, with decorrelated seeds.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub scenario: Option<ScenarioSource>,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub surrogate: Option<SurrogateSettings>,
    #[serde(default)]
    pub ensemble: Option<EnsembleSettings>,
    #[serde(default)]
    pub assimilation: Option<AssimilationSettings>,
}

/// Parse a TOML config; relative paths are resolved against the config
/// file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Validation(format!("cannot read config '{}': {e}", path.display()))
    })?;
    let mut config: RunConfig =
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let anchor = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&p);
        }
    };
    anchor(&mut config.output_dir);
    if let Some(ScenarioSource::Path { path }) = &mut config.scenario {
        anchor(path);
    }
    if let Some(s) = &mut config.surrogate {
        if let Some(p) = &mut s.records_path {
            anchor(p);
        }
    }
    if let Some(a) = &mut config.assimilation {
        anchor(&mut a.corpus_path);
    }
    Ok(config)
}

/// All validation happens here, before any output is created.
pub fn validate_config(config: &RunConfig) -> Result<()> {
    if config.repeats < 1 {
        return Err(Error::Validation("repeats must be >= 1".into()));
    }
    config.evolution.validate()?;

    let needs_scenario = matches!(
        config.pattern,
        Pattern::P1 | Pattern::P3 | Pattern::P4 | Pattern::P5
    );
    if needs_scenario && config.scenario.is_none() {
        return Err(Error::Validation(format!(
            "pattern {:?} requires a [scenario] section",
            config.pattern
        )));
    }
    match config.pattern {
        Pattern::P2 | Pattern::P4 | Pattern::P6 => {
            let s = config.surrogate.as_ref().ok_or_else(|| {
                Error::Validation(format!(
                    "pattern {:?} requires a [surrogate] section",
                    config.pattern
                ))
            })?;
            if !(s.kernel_width > 0.0) || !(s.tau > 0.0) {
                return Err(Error::Validation(
                    "surrogate kernel_width and tau must be > 0".into(),
                ));
            }
            if config.pattern == Pattern::P6 && s.records_path.is_none() {
                return Err(Error::Validation(
                    "P6 performs zero model evaluations; surrogate.records_path is required"
                        .into(),
                ));
            }
            if s.records_path.is_none() && config.scenario.is_none() {
                return Err(Error::Validation(
                    "sampling evaluation records requires a [scenario] section".into(),
                ));
            }
        }
        _ => {}
    }
    if config.pattern == Pattern::P3 && config.ensemble.is_none() {
        return Err(Error::Validation(
            "pattern P3 requires an [ensemble] section".into(),
        ));
    }

    // referenced paths must exist at validation time
    if let Some(ScenarioSource::Path { path }) = &config.scenario {
        if !path.is_dir() {
            return Err(Error::Validation(format!(
                "scenario path '{}' does not exist",
                path.display()
            )));
        }
    }
    if let Some(Some(p)) = config.surrogate.as_ref().map(|s| s.records_path.as_ref()) {
        if !p.is_file() {
            return Err(Error::Validation(format!(
                "surrogate records '{}' do not exist",
                p.display()
            )));
        }
    }
    if let Some(a) = &config.assimilation {
        if !a.corpus_path.is_file() {
            return Err(Error::Validation(format!(
                "corpus '{}' does not exist",
                a.corpus_path.display()
            )));
        }
        if a.k < 1 || a.n < 1 || a.population_size < 1 {
            return Err(Error::Validation(
                "assimilation k, n and population_size must be >= 1".into(),
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub repeat: usize,
    pub step: u8,
    pub name: String,
    pub tag: OperatorTag,
    pub artifacts: Vec<String>,
    /// Informational only; excluded from replay-determinism comparisons.
    pub wall_clock_ms: u64,
    pub details: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunLog {
    pub pattern: Pattern,
    pub master_seed: u64,
    pub config_echo: RunConfig,
    pub steps: Vec<StepRecord>,
    /// File names emitted into the output directory, in creation order.
    pub artifacts: Vec<String>,
}

/// Per-repetition working state threaded between steps.
struct RepState {
    seed: u64,
    prefix: String,
    records: Option<Vec<EvaluationRecord>>,
    seeder: Option<Vec<Vec<f64>>>,
}

struct Emitter<'a> {
    dir: &'a Path,
    artifacts: Vec<String>,
}

impl Emitter<'_> {
    fn write(&mut self, name: String, content: &str) -> Result<String> {
        fs::write(self.dir.join(&name), content)?;
        self.artifacts.push(name.clone());
        Ok(name)
    }
}

/// The benchmark space extended with one evolvable weight gene per forcing;
/// evaluation is the weighted sum of per-forcing model outputs.
struct MetaEvaluator {
    space: ParameterSpace,
    base_dim: usize,
    evaluators: Vec<Box<dyn ModelEvaluator>>,
}

impl ModelEvaluator for MetaEvaluator {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn evaluate(&self, genotype: &[f64]) -> Result<StationSeries> {
        let (base, weights) = split_meta_genotype(genotype, self.base_dim);
        let outputs: Vec<StationSeries> = self
            .evaluators
            .iter()
            .map(|e| e.evaluate(base))
            .collect::<Result<_>>()?;
        crate::ensembles::weighted_sum(&outputs, weights)
    }

    fn describe(&self) -> String {
        format!("meta-ensemble of {} members", self.evaluators.len())
    }
}

fn scenario_from_source(source: &ScenarioSource) -> Result<Scenario> {
    match source {
        ScenarioSource::Path { path } => load_scenario(path),
        ScenarioSource::Generate {
            seed,
            n_stations,
            n_ticks,
            noise_sigma,
        } => generate_scenario(*seed, *n_stations, *n_ticks, *noise_sigma),
    }
}

fn finish_step(
    steps: &mut Vec<StepRecord>,
    started: Instant,
    repeat: usize,
    step: u8,
    name: &str,
    tag: OperatorTag,
    artifacts: Vec<String>,
    details: BTreeMap<String, Value>,
) {
    steps.push(StepRecord {
        repeat,
        step,
        name: name.to_string(),
        tag,
        artifacts,
        wall_clock_ms: started.elapsed().as_millis() as u64,
        details,
    });
}

fn step_space_discovery(
    config: &RunConfig,
    scenario: Option<&Scenario>,
    state: &mut RepState,
    emitter: &mut Emitter,
    steps: &mut Vec<StepRecord>,
    repeat: usize,
) -> Result<()> {
    let started = Instant::now();
    let settings = config.surrogate.clone().unwrap_or_default();
    let space = scenario
        .map(|s| s.space.clone())
        .unwrap_or_else(benchmark_space);

    let mut evaluations = 0usize;
    let records: Vec<EvaluationRecord> = match &settings.records_path {
        Some(path) => read_records(path, &space)?,
        None => {
            let scenario = scenario.ok_or_else(|| {
                Error::Contract("sampling records requires a scenario".into())
            })?;
            let evaluator = scenario.evaluator(0)?;
            let mut r = rng::stream(state.seed, 0x5a3e, 0);
            (0..settings.samples)
                .map(|_| {
                    let g = space.sample_uniform(&mut r);
                    let predictions = evaluator.evaluate(&g)?;
                    let err = station_fitness(&predictions, &scenario.observations)?.value;
                    evaluations += 1;
                    EvaluationRecord::new(g, err, tag_space_discovery())
                })
                .collect::<Result<_>>()?
        }
    };

    let map = discover_space(records.clone(), &space, settings.tau)?;
    let mut artifacts = Vec::new();
    artifacts.push(emitter.write(
        format!("{}records.csv", state.prefix),
        &records_to_csv(&records, &space),
    )?);
    artifacts.push(emitter.write(
        format!("{}spacemap.json", state.prefix),
        &to_pretty_json(&map)?,
    )?);

    let details = BTreeMap::from([
        ("records".to_string(), json!(records.len())),
        ("components".to_string(), json!(map.components.len())),
        ("tau".to_string(), json!(settings.tau)),
        ("model_evaluations".to_string(), json!(evaluations)),
    ]);
    state.records = Some(records);
    finish_step(
        steps,
        started,
        repeat,
        1,
        "space discovery",
        tag_space_discovery(),
        artifacts,
        details,
    );
    Ok(())
}

fn step_surrogate_fit(
    config: &RunConfig,
    scenario: Option<&Scenario>,
    state: &mut RepState,
    emitter: &mut Emitter,
    steps: &mut Vec<StepRecord>,
    repeat: usize,
) -> Result<()> {
    let started = Instant::now();
    let settings = config.surrogate.clone().unwrap_or_default();
    let space = scenario
        .map(|s| s.space.clone())
        .unwrap_or_else(benchmark_space);
    let records = state
        .records
        .clone()
        .ok_or_else(|| Error::Contract("surrogate fit requires step 1 records".into()))?;
    let n_records = records.len();
    let surrogate = fit_surrogate(records, &space, settings.kernel_width)?;

    let mut details = BTreeMap::from([
        ("records".to_string(), json!(n_records)),
        ("kernel_width".to_string(), json!(settings.kernel_width)),
    ]);
    if config.pattern == Pattern::P4 {
        let pool = settings.pool.max(config.evolution.pop_size);
        let proposals =
            propose_candidates(&surrogate, config.evolution.pop_size, pool, state.seed)?;
        details.insert("proposals".to_string(), json!(proposals.len()));
        state.seeder = Some(proposals);
    }

    let artifacts = vec![emitter.write(
        format!("{}surrogate.json", state.prefix),
        &to_pretty_json(&surrogate)?,
    )?];
    finish_step(
        steps,
        started,
        repeat,
        2,
        "surrogate fit",
        tag_surrogate_fit(),
        artifacts,
        details,
    );
    Ok(())
}

fn step_evolution(
    config: &RunConfig,
    scenario: &Scenario,
    state: &mut RepState,
    emitter: &mut Emitter,
    steps: &mut Vec<StepRecord>,
    repeat: usize,
) -> Result<()> {
    let started = Instant::now();
    let ec = EvolutionConfig {
        master_seed: state.seed,
        ..config.evolution.clone()
    };

    if config.pattern == Pattern::P3 {
        return step_evolution_with_ensemble(config, scenario, state, emitter, steps, repeat, &ec);
    }

    let evaluator = scenario.evaluator(0)?;
    let result = evolve_with(
        &evaluator,
        &scenario.observations,
        &ec,
        state.seeder.as_deref(),
    )?;
    let artifacts = vec![
        emitter.write(
            format!("{}convergence.csv", state.prefix),
            &result.log.to_csv(),
        )?,
        emitter.write(
            format!("{}best.json", state.prefix),
            &to_pretty_json(&json!({
                "genotype": result.best.genotype,
                "error": result.best.primary(),
            }))?,
        )?,
    ];
    let details = BTreeMap::from([
        ("best_error".to_string(), json!(result.best.primary())),
        (
            "evaluations".to_string(),
            json!(result.log.total_evaluations()),
        ),
        (
            "surrogate_seeded".to_string(),
            json!(state.seeder.is_some()),
        ),
    ]);
    finish_step(
        steps,
        started,
        repeat,
        3,
        "evolutionary calibration",
        tag_evolution(),
        artifacts,
        details,
    );
    Ok(())
}

fn step_evolution_with_ensemble(
    config: &RunConfig,
    scenario: &Scenario,
    state: &mut RepState,
    emitter: &mut Emitter,
    steps: &mut Vec<StepRecord>,
    repeat: usize,
    ec: &EvolutionConfig,
) -> Result<()> {
    let kind = config.ensemble.as_ref().map(|e| e.kind).unwrap_or(EnsembleKind::AlternativeModels);
    let started = Instant::now();

    match kind {
        EnsembleKind::AlternativeModels => {
            let mut artifacts = Vec::new();
            let mut bests = Vec::new();
            let mut evaluations = 0usize;
            for f in 0..scenario.forcings.len() {
                let result = evolve(scenario, f, ec)?;
                evaluations += result.log.total_evaluations();
                artifacts.push(emitter.write(
                    format!("{}convergence-f{f}.csv", state.prefix),
                    &result.log.to_csv(),
                )?);
                bests.push(result.best.genotype.clone());
            }
            let details = BTreeMap::from([
                ("members".to_string(), json!(bests.len())),
                ("evaluations".to_string(), json!(evaluations)),
            ]);
            finish_step(
                steps,
                started,
                repeat,
                3,
                "evolutionary calibration",
                tag_evolution(),
                artifacts,
                details,
            );

            let started = Instant::now();
            let evaluators: Vec<_> = (0..scenario.forcings.len())
                .map(|f| scenario.evaluator(f))
                .collect::<Result<Vec<_>>>()?;
            let members: Vec<(&dyn ModelEvaluator, Vec<f64>)> = evaluators
                .iter()
                .zip(&bests)
                .map(|(e, g)| (e as &dyn ModelEvaluator, g.clone()))
                .collect();
            let mut ensemble = EnsembleModel::new(kind, members)?;
            ensemble.fit(&scenario.observations)?;
            let prediction = ensemble.predict()?;
            let err = station_fitness(&prediction, &scenario.observations)?.value;
            let artifacts = vec![emitter.write(
                format!("{}weights.json", state.prefix),
                &ensemble.weights_json()?,
            )?];
            let details = BTreeMap::from([("ensemble_error".to_string(), json!(err))]);
            finish_step(
                steps,
                started,
                repeat,
                3,
                "ensemble fit",
                tag_ensemble_fit(),
                artifacts,
                details,
            );
        }
        EnsembleKind::ParameterDiversity => {
            let evaluator = scenario.evaluator(0)?;
            let result = evolve_with(&evaluator, &scenario.observations, ec, None)?;
            let artifacts = vec![emitter.write(
                format!("{}convergence.csv", state.prefix),
                &result.log.to_csv(),
            )?];
            let details = BTreeMap::from([
                ("best_error".to_string(), json!(result.best.primary())),
                (
                    "evaluations".to_string(),
                    json!(result.log.total_evaluations()),
                ),
            ]);
            finish_step(
                steps,
                started,
                repeat,
                3,
                "evolutionary calibration",
                tag_evolution(),
                artifacts,
                details,
            );

            let started = Instant::now();
            let ensemble = build_parameter_diversity(
                &result.population,
                &evaluator,
                &scenario.observations,
            )?;
            let prediction = ensemble.predict()?;
            let err = station_fitness(&prediction, &scenario.observations)?.value;
            let artifacts = vec![emitter.write(
                format!("{}weights.json", state.prefix),
                &ensemble.weights_json()?,
            )?];
            let details = BTreeMap::from([("ensemble_error".to_string(), json!(err))]);
            finish_step(
                steps,
                started,
                repeat,
                3,
                "ensemble fit",
                tag_ensemble_fit(),
                artifacts,
                details,
            );
        }
        EnsembleKind::MetaEnsemble => {
            let base_dim = scenario.space.dim();
            let n_members = scenario.forcings.len();
            let meta = MetaEvaluator {
                space: extend_space_meta(&scenario.space, n_members, (-1.0, 2.0))?,
                base_dim,
                evaluators: (0..n_members)
                    .map(|f| {
                        scenario
                            .evaluator(f)
                            .map(|e| Box::new(e) as Box<dyn ModelEvaluator>)
                    })
                    .collect::<Result<_>>()?,
            };
            let result = evolve_with(&meta, &scenario.observations, ec, None)?;
            let artifacts = vec![emitter.write(
                format!("{}convergence.csv", state.prefix),
                &result.log.to_csv(),
            )?];
            let details = BTreeMap::from([
                ("best_error".to_string(), json!(result.best.primary())),
                (
                    "evaluations".to_string(),
                    json!(result.log.total_evaluations()),
                ),
            ]);
            finish_step(
                steps,
                started,
                repeat,
                3,
                "evolutionary calibration",
                tag_evolution(),
                artifacts,
                details,
            );

            let started = Instant::now();
            let (base, weights) = split_meta_genotype(&result.best.genotype, base_dim);
            let artifacts = vec![emitter.write(
                format!("{}weights.json", state.prefix),
                &to_pretty_json(&json!({
                    "kind": kind,
                    "params": base,
                    "weights": weights,
                    "error": result.best.primary(),
                }))?,
            )?];
            let details =
                BTreeMap::from([("ensemble_error".to_string(), json!(result.best.primary()))]);
            finish_step(
                steps,
                started,
                repeat,
                3,
                "ensemble fit",
                tag_ensemble_fit(),
                artifacts,
                details,
            );
        }
    }
    Ok(())
}

fn step_assimilation(
    config: &RunConfig,
    state: &mut RepState,
    emitter: &mut Emitter,
    steps: &mut Vec<StepRecord>,
    repeat: usize,
) -> Result<()> {
    let started = Instant::now();
    let settings = config.assimilation.as_ref().unwrap();
    let corpus = parse_corpus(&fs::read_to_string(&settings.corpus_path)?)?;
    let clusters = cluster_sequences(&corpus, settings.n, settings.k, state.seed, 100)?;
    let continuation = ContinuationConfig {
        population_size: settings.population_size,
        mutation_rate: settings.mutation_rate,
        n: settings.n,
        seed: state.seed,
    };

    let mut pop = generate_continuations(&settings.prefix, &clusters, &corpus, &continuation)?;
    let mut trace = vec![json!({
        "event": Value::Null,
        "size": pop.len(),
        "votes": pop.cluster_votes,
    })];
    let mut exhausted = false;
    for event in &settings.events {
        match assimilate_event(&pop, event, settings.mode, &clusters, &corpus, &continuation) {
            Ok(next) => {
                pop = next;
                trace.push(json!({
                    "event": event,
                    "size": pop.len(),
                    "votes": pop.cluster_votes,
                }));
            }
            Err(Error::PopulationExhausted(_)) => {
                exhausted = true;
                trace.push(json!({
                    "event": event,
                    "size": 0,
                    "votes": {},
                }));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let fractions: BTreeMap<usize, f64> = (0..settings.k)
        .map(|c| (c, fraction_in_cluster(&pop, c)))
        .collect();

    let artifacts = vec![emitter.write(
        format!("{}assimilation.json", state.prefix),
        &to_pretty_json(&json!({
            "prefix": settings.prefix,
            "mode": settings.mode,
            "trace": trace,
            "exhausted": exhausted,
            "final_fractions": fractions,
        }))?,
    )?];
    let details = BTreeMap::from([
        ("events".to_string(), json!(settings.events.len())),
        ("final_size".to_string(), json!(pop.len())),
        ("exhausted".to_string(), json!(exhausted)),
    ]);
    finish_step(
        steps,
        started,
        repeat,
        4,
        "event assimilation",
        tag_assimilation(),
        artifacts,
        details,
    );
    Ok(())
}

fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))
}

/// Validate, then execute the pattern's steps (plus assimilation when
/// configured), emitting artifacts and `runlog.json` into the output
/// directory.
pub fn run_pipeline(config: &RunConfig) -> Result<RunLog> {
    validate_config(config)?;
    fs::create_dir_all(&config.output_dir)?;

    let scenario = config
        .scenario
        .as_ref()
        .map(scenario_from_source)
        .transpose()?;

    let mut emitter = Emitter {
        dir: &config.output_dir,
        artifacts: Vec::new(),
    };
    let mut steps = Vec::new();

    for repeat in 0..config.repeats {
        let mut state = RepState {
            seed: config.master_seed.wrapping_add(repeat as u64),
            prefix: if config.repeats > 1 {
                format!("rep{repeat}-")
            } else {
                String::new()
            },
            records: None,
            seeder: None,
        };
        for &step in pattern_steps(config.pattern) {
            match step {
                1 => step_space_discovery(
                    config,
                    scenario.as_ref(),
                    &mut state,
                    &mut emitter,
                    &mut steps,
                    repeat,
                )?,
                2 => step_surrogate_fit(
                    config,
                    scenario.as_ref(),
                    &mut state,
                    &mut emitter,
                    &mut steps,
                    repeat,
                )?,
                3 => {
                    let scenario = scenario
                        .as_ref()
                        .ok_or_else(|| Error::Contract("step 3 requires a scenario".into()))?;
                    step_evolution(config, scenario, &mut state, &mut emitter, &mut steps, repeat)?
                }
                other => {
                    return Err(Error::Contract(format!("unknown step {other}")));
                }
            }
        }
        if config.assimilation.is_some() {
            step_assimilation(config, &mut state, &mut emitter, &mut steps, repeat)?;
        }
    }

    let mut log = RunLog {
        pattern: config.pattern,
        master_seed: config.master_seed,
        config_echo: config.clone(),
        steps,
        artifacts: emitter.artifacts,
    };
    let runlog = to_pretty_json(&log)?;
    fs::write(config.output_dir.join("runlog.json"), runlog)?;
    log.artifacts.push("runlog.json".to_string());
    Ok(log)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodReport {
    pub name: String,
    pub evaluations: usize,
    pub best_error: f64,
    /// Informational; hardware-dependent, never asserted.
    pub wall_clock_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetReport {
    pub methods: Vec<MethodReport>,
    /// Grid evaluations over actual single-run EC evaluations.
    pub grid_to_ec_ratio: f64,
    /// Grid evaluations over the nominal EC budget pop_size * (generations
    /// + 1); the counting convention behind the headline budget figures.
    pub grid_to_ec_budget_ratio: f64,
}

/// Run the grid oracle, one evolution per forcing, and co-evolution under
/// identical bounds, reporting evaluation counts and best errors.
pub fn compare_budgets(
    scenario: &Scenario,
    config: &EvolutionConfig,
    resolution: usize,
) -> Result<BudgetReport> {
    config.validate()?;
    let mut methods = Vec::new();

    let started = Instant::now();
    let landscape = grid_landscape(scenario, 0, resolution)?;
    methods.push(MethodReport {
        name: format!("grid {resolution}x{resolution}"),
        evaluations: resolution * resolution,
        best_error: landscape.min_error(),
        wall_clock_ms: started.elapsed().as_millis() as u64,
    });

    let mut single_evaluations = 0usize;
    let mut single_best = f64::INFINITY;
    let started = Instant::now();
    for f in 0..scenario.forcings.len() {
        let result = evolve(scenario, f, config)?;
        single_evaluations += result.log.total_evaluations();
        single_best = single_best.min(result.best.primary());
    }
    let single_ms = started.elapsed().as_millis() as u64;
    let per_run = single_evaluations / scenario.forcings.len().max(1);
    methods.push(MethodReport {
        name: format!("evolution x{}", scenario.forcings.len()),
        evaluations: single_evaluations,
        best_error: single_best,
        wall_clock_ms: single_ms,
    });

    if scenario.forcings.len() >= 2 {
        let started = Instant::now();
        let co = coevolve(scenario, config, PairingStrategy::BestOfPrevious)?;
        methods.push(MethodReport {
            name: "coevolution".to_string(),
            evaluations: co.total_evaluations,
            best_error: co.best_ensemble_error,
            wall_clock_ms: started.elapsed().as_millis() as u64,
        });
    }

    let grid = (resolution * resolution) as f64;
    Ok(BudgetReport {
        methods,
        grid_to_ec_ratio: grid / per_run.max(1) as f64,
        grid_to_ec_budget_ratio: grid / (config.pop_size * (config.generations + 1)) as f64,
    })
}
