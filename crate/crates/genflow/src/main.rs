use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use genflow::engine::{outcome_json, Engine, EngineError, CONFIG_ENV, DATA_DIR_ENV};
use genflow::http::{router, AppState};
use genflow_core::agents::ExploreStatus;
use genflow_core::assets::{Mode, TimingTable};
use genflow_core::config::Config;
use genflow_core::merge::combine_elements;
use genflow_core::pilot::{FallbackSignal, PilotQuery};
use genflow_core::workflow::parse_workflow;
use genflow_core::DetectedElement;

#[derive(Parser)]
#[command(name = "genflow", version, about = "Workflow retrieval, resolution and execution")]
struct Cli {
    /// Managed data directory (index, local database, installed assets).
    #[arg(long, env = DATA_DIR_ENV, default_value = "genflow-data", global = true)]
    data_dir: PathBuf,
    /// Config file of `key = value` lines.
    #[arg(long, env = CONFIG_ENV, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set explore.enabled=true`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Index a corpus file, a workflow document or a directory of them.
    Ingest { path: PathBuf },
    /// Search stored workflows by description.
    Search {
        query: String,
        #[arg(short, long)]
        k: Option<usize>,
    },
    /// Execute a workflow document.
    Run {
        workflow: PathBuf,
        /// Resolve and install missing dependencies first.
        #[arg(long)]
        install: bool,
        #[arg(long)]
        threads: Option<usize>,
        /// Copy a file into the workspace: `name=path`.
        #[arg(long = "input", value_name = "NAME=PATH")]
        inputs: Vec<String>,
        /// Workspace name under the data directory.
        #[arg(long, default_value = "cli-run")]
        run_id: String,
    },
    /// Report (and optionally install) a workflow's missing dependencies,
    /// with per-operation timings.
    Resolve {
        workflow: PathBuf,
        #[arg(long, default_value = "local")]
        mode: Mode,
        #[arg(long)]
        install: bool,
        /// Print the full outcome as JSON after the table.
        #[arg(long)]
        json: bool,
    },
    /// Fuse two element-detection lists.
    MergeElements {
        #[arg(long)]
        w: PathBuf,
        #[arg(long)]
        o: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Run the exploration agents on a simulated site.
    Explore {
        #[arg(long)]
        query: String,
        #[arg(long)]
        site: Option<PathBuf>,
        #[arg(long)]
        budget: Option<usize>,
        /// Store and index the discovered workflow.
        #[arg(long)]
        ingest: bool,
    },
    /// Record every asset of a catalog file in the local database.
    SeedRegistry { catalog: PathBuf },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Engine(Box<EngineError>),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {cause}")]
    Io { path: String, cause: String },
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        Self::Engine(Box::new(e))
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        cause: e.to_string(),
    })
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p).map_err(EngineError::from)?,
        None => Config::default(),
    };
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {o:?}")))?;
        config.set(k.trim(), v.trim()).map_err(EngineError::from)?;
    }
    Ok(config)
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = load_config(&cli)?;
    match cli.command {
        Command::MergeElements { w, o, tau } => {
            let parse = |p: &Path| -> Result<Vec<DetectedElement>, CliError> {
                serde_json::from_slice(&read(p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
            };
            let tau = tau.unwrap_or(config.merge_tau);
            print_json(&combine_elements(&parse(&w)?, &parse(&o)?, tau));
            Ok(())
        }
        Command::Ingest { path } => {
            let engine = Engine::open(&cli.data_dir, config)?;
            let s = engine.ingest_path(&path)?;
            println!(
                "ingested {} documents and {} workflows; index holds {}",
                s.documents,
                s.workflows,
                engine.index().len()
            );
            Ok(())
        }
        Command::Search { query, k } => {
            let engine = Engine::open(&cli.data_dir, config)?;
            let response = engine.search(&PilotQuery { text: query, k })?;
            if let Some(info) = &response.explored {
                println!("explored: {} actions, found {:?}", info.trace.len(), info.workflow_id);
            }
            for r in &response.results {
                println!(
                    "{}. {} [{}] score={:.4} sim={:.4} likes={}\n   {}",
                    r.rank, r.name, r.workflow_id, r.score, r.similarity, r.likes, r.snippet
                );
            }
            Ok(())
        }
        Command::Run {
            workflow,
            install,
            threads,
            inputs,
            run_id,
        } => {
            if let Some(t) = threads {
                config.exec_threads = t;
            }
            let engine = Engine::open(&cli.data_dir, config)?;
            let wf = parse_workflow(&read(&workflow)?).map_err(EngineError::from)?;
            let mut files = BTreeMap::new();
            for spec in &inputs {
                let (name, path) = spec
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("--input expects NAME=PATH, got {spec:?}")))?;
                files.insert(name.to_string(), read(Path::new(path))?);
            }
            if engine.readiness(&wf, install)?.needs_install() {
                let run = engine.resolve_and_install(&wf)?;
                for s in run.local.statuses.iter().chain(run.remote.iter().flat_map(|r| &r.statuses)) {
                    println!("install {}: {:?}", s.name, s.outcome);
                }
            }
            let report = engine.run(&wf, &files, &run_id)?;
            println!("order: {}", report.order.join(" -> "));
            for (k, v) in &report.texts {
                println!("{k} = {v:?}");
            }
            for a in &report.artifacts {
                println!("artifact {} {} ({} bytes, {})", a.id, a.name, a.size, a.content_type);
            }
            Ok(())
        }
        Command::Resolve {
            workflow,
            mode,
            install,
            json,
        } => {
            let engine = Engine::open(&cli.data_dir, config)?;
            let wf = parse_workflow(&read(&workflow)?).map_err(EngineError::from)?;
            let outcome = engine.resolve(&wf, mode, install)?;
            println!("missing node types: {:?}", outcome.before.missing_node_types);
            println!("missing models: {:?}", outcome.before.missing_models);
            let runs = [outcome.samples.clone()];
            let table = match mode {
                Mode::Local => TimingTable::from_runs(&runs, &[]),
                Mode::Remote => TimingTable::from_runs(&[], &runs),
            };
            print!("{table}");
            if !outcome.unresolved.is_empty() {
                println!("unresolved: {:?}", outcome.unresolved);
            }
            if json {
                print_json(&outcome_json(&outcome));
            }
            Ok(())
        }
        Command::Explore {
            query,
            site,
            budget,
            ingest,
        } => {
            if site.is_some() {
                config.explore_site = site;
            }
            let budget = budget.unwrap_or(config.explore_budget);
            let engine = Engine::open(&cli.data_dir, config)?;
            let goal = FallbackSignal {
                clean_query: engine.preprocessor().clean(&query).joined(),
                query,
            };
            let result = engine.explore(&goal, budget)?;
            for t in &result.trace {
                println!("{:>3} {} {} -> {}", t.step, t.agent, t.action, t.observation);
            }
            match result.status {
                ExploreStatus::Success => println!("status: success"),
                ExploreStatus::Failure(r) => println!("status: failure ({})", serde_json::to_string(&r).unwrap()),
            }
            if let (true, Some(wf)) = (ingest, &result.workflow) {
                engine.add_workflow(wf, "explore")?;
                println!("ingested workflow {}", wf.id);
            }
            Ok(())
        }
        Command::SeedRegistry { catalog } => {
            let engine = Engine::open(&cli.data_dir, config)?;
            let n = engine.seed_catalog(&catalog)?;
            println!("seeded {n} assets into {}", engine.db().dir.display());
            Ok(())
        }
        Command::Serve { port, host } => {
            let engine = Arc::new(Engine::open(&cli.data_dir, config)?);
            let state = AppState::new(engine);
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Usage(e.to_string()))?;
            rt.block_on(async move {
                let addr = format!("{host}:{port}");
                let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| CliError::Io {
                    path: addr.clone(),
                    cause: e.to_string(),
                })?;
                log::info!("listening on {addr}");
                println!("listening on http://{addr}");
                axum::serve(listener, router(state)).await.map_err(|e| CliError::Io {
                    path: addr,
                    cause: e.to_string(),
                })
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
