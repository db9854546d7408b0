use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cmm_core::ensembles::EnsembleKind;
use cmm_core::error::{Error, Result};
use cmm_core::evolution::{coevolve, evolve, EvolutionConfig, PairingStrategy};
use cmm_core::models::{
    generate_scenario, grid_landscape, landscape_to_csv, load_scenario, save_scenario, Scenario,
};
use cmm_core::orchestrator::{
    compare_budgets, load_config, run_pipeline, EnsembleSettings, Pattern, RunConfig,
    ScenarioSource,
};
use cmm_core::sequences::{
    assimilate_event, build_process_graph, cluster_sequences, collapse_cycles,
    discover_patterns_evolutionary, extract_ngram_sets, fraction_in_cluster,
    generate_continuations, parse_corpus, vocabulary, Alphabet, AssimilationMode,
    ContinuationConfig, EventSequence, PatternConfig,
};
use cmm_core::surrogate::{fit_surrogate, propose_candidates, read_records};

#[derive(Parser)]
#[command(
    name = "cmm",
    version,
    about = "Composite model management: calibration, ensembles, surrogates, sequence mining"
)]
struct Cli {
    /// Master seed for every randomized operation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output directory for emitted artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scenario management.
    Scenario {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
    /// Evaluate the full grid-search error landscape.
    Landscape {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        resolution: usize,
        #[arg(long, default_value_t = 0)]
        forcing: usize,
    },
    /// Calibrate the model on one forcing with the evolutionary engine.
    Evolve {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        forcing: usize,
        #[arg(long, default_value_t = 10)]
        pop: usize,
        #[arg(long, default_value_t = 5)]
        generations: usize,
    },
    /// Co-evolve one population per forcing into a weighted ensemble.
    Coevolve {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        pop: usize,
        #[arg(long, default_value_t = 5)]
        generations: usize,
    },
    /// Ensemble operations.
    Ensemble {
        #[command(subcommand)]
        command: EnsembleCommand,
    },
    /// Surrogate operations over evaluation records.
    Surrogate {
        #[command(subcommand)]
        command: SurrogateCommand,
    },
    /// Sequence and process mining.
    Seq {
        #[command(subcommand)]
        command: SeqCommand,
    },
    /// Run a configured pattern pipeline.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare grid search, evolution, and co-evolution budgets.
    Compare {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        resolution: usize,
        #[arg(long, default_value_t = 10)]
        pop: usize,
        #[arg(long, default_value_t = 5)]
        generations: usize,
    },
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Generate a synthetic calibration scenario.
    Gen {
        #[arg(long, default_value_t = 3)]
        stations: usize,
        #[arg(long, default_value_t = 48)]
        ticks: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Alternative,
    Diversity,
    Meta,
}

impl From<KindArg> for EnsembleKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Alternative => EnsembleKind::AlternativeModels,
            KindArg::Diversity => EnsembleKind::ParameterDiversity,
            KindArg::Meta => EnsembleKind::MetaEnsemble,
        }
    }
}

#[derive(Subcommand)]
enum EnsembleCommand {
    /// Evolve members and fit combination weights.
    Fit {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = KindArg::Alternative)]
        kind: KindArg,
    },
}

#[derive(Subcommand)]
enum SurrogateCommand {
    /// Fit an IDW surrogate on an evaluation-record CSV.
    Fit {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        kernel_width: f64,
    },
    /// Rank random candidates by predicted quality.
    Propose {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        kernel_width: f64,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        pool: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Filter,
    Regenerate,
}

impl From<ModeArg> for AssimilationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Filter => AssimilationMode::Filter,
            ModeArg::Regenerate => AssimilationMode::Regenerate,
        }
    }
}

#[derive(Subcommand)]
enum SeqCommand {
    /// Emit normalized sorted-n-gram vectors per case.
    Vectorize {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        n: usize,
    },
    /// k-means behavior clusters over n-gram vectors.
    Cluster {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Process graph (expanded or collapsed cycles) as CSV and DOT.
    Graph {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        collapse: bool,
    },
    /// Evolutionary Pareto pattern discovery against one cluster.
    Discover {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        cluster: usize,
        #[arg(long, default_value_t = 40)]
        pop: usize,
        #[arg(long, default_value_t = 30)]
        generations: usize,
    },
    /// Generate continuations of a prefix and assimilate an event stream.
    Assimilate {
        #[arg(long)]
        corpus: PathBuf,
        /// Comma-separated observed prefix, e.g. "P,P,R".
        #[arg(long)]
        prefix: String,
        /// Comma-separated event stream to assimilate.
        #[arg(long, default_value = "")]
        events: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Filter)]
        mode: ModeArg,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 50)]
        pop: usize,
    },
}

fn write_artifact(out: &Path, name: &str, content: &str) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join(name), content)?;
    Ok(())
}

fn emit_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let line = serde_json::to_string(value).map_err(|e| Error::Parse(e.to_string()))?;
    println!("{line}");
    Ok(())
}

/// Load the scenario directory, or generate the default benchmark scenario
/// from the master seed.
fn resolve_scenario(path: &Option<PathBuf>, seed: u64) -> Result<Scenario> {
    match path {
        Some(dir) => load_scenario(dir),
        None => generate_scenario(seed, 3, 48, 0.05),
    }
}

fn load_corpus(path: &Path) -> Result<Vec<EventSequence>> {
    parse_corpus(&fs::read_to_string(path)?)
}

fn split_symbols(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn ec_config(pop: usize, generations: usize, seed: u64) -> EvolutionConfig {
    EvolutionConfig {
        pop_size: pop,
        generations,
        master_seed: seed,
        ..EvolutionConfig::default()
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    let out = cli.out.clone();
    match cli.command {
        Command::Scenario { command } => match command {
            ScenarioCommand::Gen {
                stations,
                ticks,
                noise,
            } => {
                let scenario = generate_scenario(seed, stations, ticks, noise)?;
                save_scenario(&out, &scenario)?;
                emit_json(&serde_json::json!({
                    "scenario": out,
                    "stations": stations,
                    "ticks": ticks,
                    "true_params": scenario.true_params.values(),
                }))
            }
        },
        Command::Landscape {
            scenario,
            resolution,
            forcing,
        } => {
            let scenario = resolve_scenario(&scenario, seed)?;
            let landscape = grid_landscape(&scenario, forcing, resolution)?;
            write_artifact(&out, "landscape.csv", &landscape_to_csv(&landscape))?;
            emit_json(&serde_json::json!({
                "artifact": out.join("landscape.csv"),
                "evaluations": resolution * resolution,
                "min_error": landscape.min_error(),
                "argmin": landscape.node_values(&landscape.argmin_index),
            }))
        }
        Command::Evolve {
            scenario,
            forcing,
            pop,
            generations,
        } => {
            let scenario = resolve_scenario(&scenario, seed)?;
            let result = evolve(&scenario, forcing, &ec_config(pop, generations, seed))?;
            write_artifact(&out, "convergence.csv", &result.log.to_csv())?;
            emit_json(&serde_json::json!({
                "artifact": out.join("convergence.csv"),
                "best_genotype": result.best.genotype,
                "best_error": result.best.primary(),
                "evaluations": result.log.total_evaluations(),
            }))
        }
        Command::Coevolve {
            scenario,
            pop,
            generations,
        } => {
            let scenario = resolve_scenario(&scenario, seed)?;
            let result = coevolve(
                &scenario,
                &ec_config(pop, generations, seed),
                PairingStrategy::BestOfPrevious,
            )?;
            write_artifact(&out, "archive.csv", &result.archive.to_csv())?;
            for (f, log) in result.logs.iter().enumerate() {
                write_artifact(&out, &format!("convergence-f{f}.csv"), &log.to_csv())?;
            }
            emit_json(&serde_json::json!({
                "artifacts": [out.join("archive.csv")],
                "best_ensemble_error": result.best_ensemble_error,
                "best_weights": result.best_weights.weights,
                "evaluations": result.total_evaluations,
            }))
        }
        Command::Ensemble { command } => match command {
            EnsembleCommand::Fit { scenario, kind } => {
                let config = RunConfig {
                    pattern: Pattern::P3,
                    master_seed: seed,
                    output_dir: out.clone(),
                    repeats: 1,
                    scenario: Some(match scenario {
                        Some(path) => ScenarioSource::Path { path },
                        None => ScenarioSource::Generate {
                            seed,
                            n_stations: 3,
                            n_ticks: 48,
                            noise_sigma: 0.05,
                        },
                    }),
                    evolution: EvolutionConfig::default(),
                    surrogate: None,
                    ensemble: Some(EnsembleSettings { kind: kind.into() }),
                    assimilation: None,
                };
                let log = run_pipeline(&config)?;
                let fit = log.steps.last().unwrap();
                emit_json(&serde_json::json!({
                    "artifacts": log.artifacts,
                    "ensemble_error": fit.details["ensemble_error"],
                }))
            }
        },
        Command::Surrogate { command } => match command {
            SurrogateCommand::Fit {
                records,
                kernel_width,
            } => {
                let space = cmm_core::models::benchmark_space();
                let records = read_records(&records, &space)?;
                let n_records = records.len();
                let surrogate = fit_surrogate(records, &space, kernel_width)?;
                let json = serde_json::to_string_pretty(&surrogate)
                    .map_err(|e| Error::Parse(e.to_string()))?;
                write_artifact(&out, "surrogate.json", &json)?;
                emit_json(&serde_json::json!({
                    "artifact": out.join("surrogate.json"),
                    "records": n_records,
                }))
            }
            SurrogateCommand::Propose {
                records,
                kernel_width,
                n,
                pool,
            } => {
                let space = cmm_core::models::benchmark_space();
                let records = read_records(&records, &space)?;
                let surrogate = fit_surrogate(records, &space, kernel_width)?;
                let proposals = propose_candidates(&surrogate, n, pool, seed)?;
                emit_json(&serde_json::json!({ "proposals": proposals }))
            }
        },
        Command::Seq { command } => run_seq(command, seed, &out),
        Command::Pipeline { config, output } => {
            let mut config = load_config(&config)?;
            if let Some(dir) = output {
                config.output_dir = dir;
            }
            let log = run_pipeline(&config)?;
            emit_json(&serde_json::json!({
                "output_dir": config.output_dir,
                "steps": log.steps.len(),
                "artifacts": log.artifacts,
            }))
        }
        Command::Compare {
            scenario,
            resolution,
            pop,
            generations,
        } => {
            let scenario = resolve_scenario(&scenario, seed)?;
            let report = compare_budgets(&scenario, &ec_config(pop, generations, seed), resolution)?;
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Parse(e.to_string()))?;
            write_artifact(&out, "budget_report.json", &json)?;
            emit_json(&report)
        }
    }
}

fn run_seq(command: SeqCommand, seed: u64, out: &Path) -> Result<()> {
    match command {
        SeqCommand::Vectorize { corpus, n } => {
            let corpus = load_corpus(&corpus)?;
            let alphabet = Alphabet::from_corpus(&corpus)?;
            let vocab = vocabulary(&alphabet, n);
            let mut csv = format!("case_id,{}\n", vocab.join(","));
            for seq in &corpus {
                let dense = extract_ngram_sets(seq, n, &alphabet)?
                    .normalize()
                    .to_dense(&vocab);
                let row: Vec<String> = dense.iter().map(|v| v.to_string()).collect();
                csv.push_str(&format!("{},{}\n", seq.case_id, row.join(",")));
            }
            write_artifact(out, "vectors.csv", &csv)?;
            emit_json(&serde_json::json!({
                "artifact": out.join("vectors.csv"),
                "cases": corpus.len(),
                "vocabulary": vocab.len(),
            }))
        }
        SeqCommand::Cluster { corpus, n, k } => {
            let corpus = load_corpus(&corpus)?;
            let clusters = cluster_sequences(&corpus, n, k, seed, 100)?;
            write_artifact(out, "clusters.csv", &clusters.to_csv())?;
            emit_json(&serde_json::json!({
                "artifact": out.join("clusters.csv"),
                "k": k,
                "inertia": clusters.inertia,
            }))
        }
        SeqCommand::Graph { corpus, collapse } => {
            let corpus = load_corpus(&corpus)?;
            let mut graph = build_process_graph(&corpus)?;
            if collapse {
                graph = collapse_cycles(&graph, &corpus)?;
            }
            write_artifact(out, "process_graph.csv", &graph.to_csv())?;
            write_artifact(out, "process_graph.dot", &graph.to_dot())?;
            emit_json(&serde_json::json!({
                "artifacts": [out.join("process_graph.csv"), out.join("process_graph.dot")],
                "nodes": graph.nodes.len(),
                "edges": graph.edges.len(),
                "collapsed": graph.collapsed,
            }))
        }
        SeqCommand::Discover {
            corpus,
            n,
            k,
            cluster,
            pop,
            generations,
        } => {
            let corpus = load_corpus(&corpus)?;
            let clusters = cluster_sequences(&corpus, n, k, seed, 100)?;
            let config = PatternConfig {
                population_size: pop,
                generations,
                target_cluster: cluster,
                seed,
                ..PatternConfig::default()
            };
            let result = discover_patterns_evolutionary(&corpus, &clusters, &config)?;
            let mut csv = String::from("pattern,support,discriminative_length\n");
            for p in &result.archive {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    p.pattern.join("|"),
                    p.objectives[0],
                    p.objectives[1]
                ));
            }
            write_artifact(out, "patterns.csv", &csv)?;
            emit_json(&serde_json::json!({
                "artifact": out.join("patterns.csv"),
                "archive_size": result.archive.len(),
            }))
        }
        SeqCommand::Assimilate {
            corpus,
            prefix,
            events,
            mode,
            n,
            k,
            pop,
        } => {
            let corpus = load_corpus(&corpus)?;
            let clusters = cluster_sequences(&corpus, n, k, seed, 100)?;
            let config = ContinuationConfig {
                population_size: pop,
                n,
                seed,
                ..ContinuationConfig::default()
            };
            let prefix = split_symbols(&prefix);
            let events = split_symbols(&events);
            let mode: AssimilationMode = mode.into();
            let mut population = generate_continuations(&prefix, &clusters, &corpus, &config)?;
            let mut sizes = vec![population.len()];
            for event in &events {
                population =
                    assimilate_event(&population, event, mode, &clusters, &corpus, &config)?;
                sizes.push(population.len());
            }
            let fractions: Vec<f64> = (0..k)
                .map(|c| fraction_in_cluster(&population, c))
                .collect();
            let summary = serde_json::json!({
                "sizes": sizes,
                "cluster_votes": population.cluster_votes,
                "fractions": fractions,
            });
            let json =
                serde_json::to_string_pretty(&summary).map_err(|e| Error::Parse(e.to_string()))?;
            write_artifact(out, "assimilation.json", &json)?;
            emit_json(&summary)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            let line = serde_json::json!({ "error": e.to_string(), "code": code });
            eprintln!("{line}");
            ExitCode::from(code as u8)
        }
    }
}
