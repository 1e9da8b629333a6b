//! The engine a server or CLI process holds: persistent stores under one
//! managed root plus the configured embedder, fetcher and exploration site.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use genflow_core::agents::{
    orchestrate, AgentError, ExploreContext, ExploreStatus, OrchestrationResult, SimAsset, SimSite, SiteError,
    TraceEntry,
};
use genflow_core::assets::{
    extract_dependencies, timed_resolve_and_install, DependencyReport, Fetcher, HttpFetcher, InstallOutcome,
    LocalDatabase, Mode, RemoteDirectory, ResolveEnv, ResolveError, ResolveOutcome, SimulatedFetcher,
};
use genflow_core::config::{Config, ConfigError, FetchMode};
use genflow_core::embedding::{EmbedError, Embedder, LocalEmbedder, RemoteEmbedder};
use genflow_core::index::IndexFileError;
use genflow_core::ingest::{ingest_record, IngestError, Preprocessor, RawDocument};
use genflow_core::pilot::{DefaultCurator, FallbackSignal, Pilot, PilotError, PilotOutcome, PilotQuery};
use genflow_core::workflow::{
    execute_with, parse_workflow, validate, CatalogError, ExecEnv, ExecError, Finding, NodeCatalog, ParseError, Value,
    Workflow,
};
use genflow_core::{RankedResult, VectorIndex};
use serde::Serialize;
use thiserror::Error;

use crate::artifacts::{ArtifactError, ArtifactMeta, ArtifactStore};

pub const DATA_DIR_ENV: &str = "GENFLOW_DATA_DIR";
pub const CONFIG_ENV: &str = "GENFLOW_CONFIG";
pub const INDEX_FILE: &str = "index.gfix";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error on {path}: {cause}")]
    Io { path: String, cause: String },
    #[error(transparent)]
    Index(#[from] IndexFileError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("query is empty after cleaning")]
    EmptyQuery,
    #[error("no stored workflow matches the query")]
    NoResults { explored: Option<Box<ExploreInfo>> },
    #[error("exploration is not configured")]
    NoSite,
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("workflow has blocking findings")]
    Invalid(Vec<Finding>),
    #[error("workflow has missing dependencies and install is disabled")]
    Unsatisfied(DependencyReport),
    #[error("unknown workflow {0:?}")]
    UnknownWorkflow(String),
    #[error("invalid input file name {0:?}")]
    BadFileName(String),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error("dependencies still missing after install: {0:?}")]
    StillMissing(DependencyReport),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Site(#[from] SiteError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EngineError + '_ {
    move |e| EngineError::Io {
        path: path.display().to_string(),
        cause: e.to_string(),
    }
}

impl From<PilotError> for EngineError {
    fn from(e: PilotError) -> Self {
        match e {
            PilotError::EmptyQueryAfterCleaning => EngineError::EmptyQuery,
            PilotError::Embed(e) => EngineError::Embed(e),
        }
    }
}

/// What an exploration did, for responses and logs.
#[derive(Debug, Clone, Serialize)]
pub struct ExploreInfo {
    pub status: ExploreStatus,
    pub workflow_id: Option<String>,
    pub captured: Vec<String>,
    pub trace: Vec<TraceEntry>,
}

impl ExploreInfo {
    fn of(result: &OrchestrationResult) -> Self {
        Self {
            status: result.status,
            workflow_id: result.workflow.as_ref().map(|w| w.id.clone()),
            captured: result.captured.iter().map(|d| d.name.clone()).collect(),
            trace: result.trace.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchResponse {
    pub results: Vec<RankedResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explored: Option<ExploreInfo>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestSummary {
    pub documents: usize,
    pub workflows: usize,
}

/// Outcome of checking a workflow before execution.
#[derive(Debug, Clone)]
pub struct Readiness {
    pub dependencies: DependencyReport,
}

impl Readiness {
    pub fn needs_install(&self) -> bool {
        !self.dependencies.is_satisfied()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub workflow_id: String,
    pub order: Vec<String>,
    pub texts: BTreeMap<String, String>,
    pub artifacts: Vec<ArtifactMeta>,
}

/// A resolve attempt in local mode, followed by a remote one if anything
/// was left over.
#[derive(Debug, Clone)]
pub struct ResolveRun {
    pub local: ResolveOutcome,
    pub remote: Option<ResolveOutcome>,
}

impl ResolveRun {
    pub fn last(&self) -> &ResolveOutcome {
        self.remote.as_ref().unwrap_or(&self.local)
    }
}

pub struct Engine {
    config: Config,
    root: PathBuf,
    preprocessor: Preprocessor,
    embedder: Box<dyn Embedder<f64>>,
    index: VectorIndex,
    index_path: PathBuf,
    db: LocalDatabase,
    site: Option<SimSite>,
    fetcher: Box<dyn Fetcher>,
    remote: RemoteDirectory,
    artifacts: ArtifactStore,
    save_lock: Mutex<()>,
    explore_lock: Mutex<()>,
}

fn load_sim_assets(path: &Path) -> Result<Vec<SimAsset>, EngineError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let mut assets: Vec<SimAsset> = serde_json::from_slice(&bytes).map_err(|e| SiteError::Malformed(e.to_string()))?;
    for a in &mut assets {
        if a.descriptor.checksum.is_empty() {
            a.descriptor.checksum = genflow_core::assets::sha256_hex(&a.bytes()?);
        }
    }
    Ok(assets)
}

fn simulated_remote(config: &Config, site: Option<&SimSite>, dir: &RemoteDirectory) -> Result<SimulatedFetcher, EngineError> {
    let fetcher = SimulatedFetcher::new(config.fetch_latency());
    let mut assets = Vec::new();
    if let Some(path) = &config.fetch_simulated_catalog {
        assets.extend(load_sim_assets(path)?);
    }
    if let Some(site) = site {
        assets.extend(site.assets.iter().cloned());
    }
    for a in &assets {
        fetcher.publish_asset(dir, &a.descriptor, a.bytes()?);
    }
    if let Some(wf_dir) = &config.fetch_simulated_workflows {
        for path in flow_files(wf_dir)? {
            let bytes = std::fs::read(&path).map_err(io_err(&path))?;
            let wf = parse_workflow(&bytes)?;
            fetcher.publish_workflow(dir, &wf.id, bytes);
        }
    }
    Ok(fetcher)
}

fn flow_files(dir: &Path) -> Result<Vec<PathBuf>, EngineError> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".flow.json"))
        .collect();
    out.sort();
    Ok(out)
}

fn valid_file_name(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && !name.contains(['/', '\\', '\0'])
}

impl Engine {
    /// Open (creating as needed) the stores under `root`.
    pub fn open(root: &Path, config: Config) -> Result<Self, EngineError> {
        std::fs::create_dir_all(root).map_err(io_err(root))?;
        let preprocessor = match &config.ingest_stopwords_path {
            Some(p) => Preprocessor::from_stopword_file(p)?,
            None => Preprocessor::default(),
        };
        let embedder: Box<dyn Embedder<f64>> = match config.remote_embedder()? {
            Some(remote) => Box::new(RemoteEmbedder::new(remote)?),
            None => Box::new(LocalEmbedder::new(config.embed_dimension)),
        };
        let index_path = root.join(INDEX_FILE);
        let index = VectorIndex::open_or_new(&index_path, config.embed_dimension)?;
        let db = LocalDatabase::open(&root.join("db"))?;
        let site = config.explore_site.as_deref().map(SimSite::load).transpose()?;
        let remote = RemoteDirectory::new(config.fetch_remote_base.clone());
        let fetcher: Box<dyn Fetcher> = match config.fetch_mode {
            FetchMode::Simulated => Box::new(simulated_remote(&config, site.as_ref(), &remote)?),
            FetchMode::Http => Box::new(
                HttpFetcher::new(std::time::Duration::from_millis(config.embed_remote_timeout_ms))
                    .map_err(|e| ResolveError::Io(std::io::Error::other(e.to_string())))?,
            ),
        };
        let artifacts = ArtifactStore::open(&root.join("artifacts"))?;
        Ok(Self {
            config,
            root: root.to_path_buf(),
            preprocessor,
            embedder,
            index,
            index_path,
            db,
            site,
            fetcher,
            remote,
            artifacts,
            save_lock: Mutex::new(()),
            explore_lock: Mutex::new(()),
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn db(&self) -> &LocalDatabase {
        &self.db
    }

    pub fn fetcher(&self) -> &dyn Fetcher {
        self.fetcher.as_ref()
    }

    pub fn artifacts(&self) -> &ArtifactStore {
        &self.artifacts
    }

    pub fn site(&self) -> Option<&SimSite> {
        self.site.as_ref()
    }

    pub fn preprocessor(&self) -> &Preprocessor {
        &self.preprocessor
    }

    /// Built-in node types plus every pack installed under the root.
    pub fn catalog(&self) -> Result<NodeCatalog, EngineError> {
        Ok(NodeCatalog::with_installed_packs(&self.root)?)
    }

    fn save_index(&self) -> Result<(), EngineError> {
        let _guard = self.save_lock.lock().unwrap_or_else(|e| e.into_inner());
        self.index.save(&self.index_path)?;
        Ok(())
    }

    /// Record every asset of a catalog file (site asset format) in the local
    /// database. Returns the number of assets seeded.
    pub fn seed_catalog(&self, path: &Path) -> Result<usize, EngineError> {
        let assets = load_sim_assets(path)?;
        for a in &assets {
            self.db.seed_asset(&a.descriptor, &a.bytes()?)?;
        }
        Ok(assets.len())
    }

    /// Store a workflow document and index its description.
    pub fn add_workflow(&self, workflow: &Workflow, source: &str) -> Result<(), EngineError> {
        self.db.workflows.put(workflow)?;
        ingest_record(
            &RawDocument::from_workflow(workflow, source),
            &self.preprocessor,
            self.embedder.as_ref(),
            &self.index,
        )?;
        self.save_index()
    }

    pub fn workflow(&self, id: &str) -> Option<Workflow> {
        self.db.workflows.get(id)
    }

    pub fn workflows(&self) -> Vec<Workflow> {
        self.db.workflows.ids().iter().filter_map(|id| self.db.workflows.get(id)).collect()
    }

    /// Ingest a file or every JSON file below a directory. Workflow
    /// documents (`*.flow.json`) are stored and indexed; other `*.json`
    /// files are corpus records.
    pub fn ingest_path(&self, path: &Path) -> Result<IngestSummary, EngineError> {
        let mut files = Vec::new();
        if path.is_dir() {
            let mut stack = vec![path.to_path_buf()];
            while let Some(dir) = stack.pop() {
                for entry in std::fs::read_dir(&dir).map_err(io_err(&dir))? {
                    let p = entry.map_err(io_err(&dir))?.path();
                    if p.is_dir() {
                        stack.push(p);
                    } else if p.extension().is_some_and(|e| e == "json") {
                        files.push(p);
                    }
                }
            }
            files.sort();
        } else {
            files.push(path.to_path_buf());
        }
        let mut summary = IngestSummary::default();
        for file in files {
            let bytes = std::fs::read(&file).map_err(io_err(&file))?;
            if file.to_string_lossy().ends_with(".flow.json") {
                let wf = parse_workflow(&bytes)?;
                self.db.workflows.put(&wf)?;
                ingest_record(
                    &RawDocument::from_workflow(&wf, "local"),
                    &self.preprocessor,
                    self.embedder.as_ref(),
                    &self.index,
                )?;
                summary.workflows += 1;
            } else {
                let doc = RawDocument::parse(&bytes)?;
                ingest_record(&doc, &self.preprocessor, self.embedder.as_ref(), &self.index)?;
                summary.documents += 1;
            }
        }
        self.save_index()?;
        Ok(summary)
    }

    fn pilot_search(&self, query: &PilotQuery) -> Result<PilotOutcome<f64>, EngineError> {
        let pilot = Pilot {
            preprocessor: &self.preprocessor,
            embedder: self.embedder.as_ref(),
            index: &self.index,
            curator: &DefaultCurator,
            config: self.config.pilot_config(),
        };
        match pilot.search(query)? {
            PilotOutcome::Results(r) if r.is_empty() => Ok(PilotOutcome::Fallback(FallbackSignal {
                query: query.text.clone(),
                clean_query: self.preprocessor.clean(&query.text).joined(),
            })),
            other => Ok(other),
        }
    }

    /// Search the index; when nothing matches and exploration is enabled,
    /// explore the configured site, ingest what was found and search again.
    pub fn search(&self, query: &PilotQuery) -> Result<SearchResponse, EngineError> {
        let signal = match self.pilot_search(query)? {
            PilotOutcome::Results(results) => return Ok(SearchResponse { results, explored: None }),
            PilotOutcome::Fallback(signal) => signal,
        };
        if !self.config.explore_enabled || self.site.is_none() {
            return Err(EngineError::NoResults { explored: None });
        }
        let _guard = self.explore_lock.lock().unwrap_or_else(|e| e.into_inner());
        // Another request may have explored while this one waited.
        if let PilotOutcome::Results(results) = self.pilot_search(query)? {
            return Ok(SearchResponse { results, explored: None });
        }
        let result = self.explore(&signal, self.config.explore_budget)?;
        let info = ExploreInfo::of(&result);
        let Some(wf) = result.workflow.filter(|_| result.status == ExploreStatus::Success) else {
            return Err(EngineError::NoResults {
                explored: Some(Box::new(info)),
            });
        };
        self.add_workflow(&wf, "explore")?;
        match self.pilot_search(query)? {
            PilotOutcome::Results(results) => Ok(SearchResponse {
                results,
                explored: Some(info),
            }),
            PilotOutcome::Fallback(_) => Err(EngineError::NoResults {
                explored: Some(Box::new(info)),
            }),
        }
    }

    /// Run the agents on the configured site. Captured install metadata is
    /// recorded in the local database; nothing is ingested.
    pub fn explore(&self, goal: &FallbackSignal, budget: usize) -> Result<OrchestrationResult, EngineError> {
        let site = self.site.as_ref().ok_or(EngineError::NoSite)?;
        let catalog = self.catalog()?;
        let ctx = ExploreContext::new(&catalog, &self.preprocessor)
            .with_merge(self.config.merge_config())
            .with_root(&self.root)
            .with_db(&self.db);
        Ok(orchestrate(goal, site, budget, &ctx)?)
    }

    /// Check a workflow before running it. Findings other than unknown
    /// types always block; unknown types and missing models block unless
    /// `install` is set.
    pub fn readiness(&self, workflow: &Workflow, install: bool) -> Result<Readiness, EngineError> {
        let catalog = self.catalog()?;
        let report = validate(workflow, &catalog);
        let blocking: Vec<Finding> = report.blocking().cloned().collect();
        if !blocking.is_empty() {
            return Err(EngineError::Invalid(blocking));
        }
        let dependencies = extract_dependencies(workflow, &catalog, Some(&self.root));
        if !dependencies.is_satisfied() && !install {
            return Err(EngineError::Unsatisfied(dependencies));
        }
        Ok(Readiness { dependencies })
    }

    pub fn resolve(&self, workflow: &Workflow, mode: Mode, install: bool) -> Result<ResolveOutcome, EngineError> {
        let catalog = self.catalog()?;
        let env = ResolveEnv {
            root: &self.root,
            catalog: &catalog,
            db: &self.db,
            fetcher: self.fetcher.as_ref(),
            remote: self.remote.clone(),
            install,
        };
        Ok(timed_resolve_and_install(workflow, mode, &env)?)
    }

    /// Resolve and install from the local database, falling back to the
    /// remote for whatever is left.
    pub fn resolve_and_install(&self, workflow: &Workflow) -> Result<ResolveRun, EngineError> {
        let local = self.resolve(workflow, Mode::Local, true)?;
        let remote = if local.after.is_satisfied() {
            None
        } else {
            Some(self.resolve(workflow, Mode::Remote, true)?)
        };
        let run = ResolveRun { local, remote };
        let after = &run.last().after;
        if !after.is_satisfied() {
            return Err(EngineError::StillMissing(after.clone()));
        }
        Ok(run)
    }

    /// Execute in a fresh workspace named by `run_id`, writing `files` into
    /// it first, and store every file the workflow saved as an artifact.
    pub fn run(
        &self,
        workflow: &Workflow,
        files: &BTreeMap<String, Vec<u8>>,
        run_id: &str,
    ) -> Result<RunReport, EngineError> {
        if !valid_file_name(run_id) {
            return Err(EngineError::BadFileName(run_id.to_string()));
        }
        let workspace = self.root.join("jobs").join(run_id);
        std::fs::create_dir_all(&workspace).map_err(io_err(&workspace))?;
        for (name, bytes) in files {
            if !valid_file_name(name) {
                return Err(EngineError::BadFileName(name.clone()));
            }
            let path = workspace.join(name);
            std::fs::write(&path, bytes).map_err(io_err(&path))?;
        }
        let catalog = self.catalog()?;
        let threads = match self.config.exec_threads {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            n => n,
        };
        let env = ExecEnv::new(&workspace).with_model_root(&self.root).with_threads(threads);
        let result = execute_with(workflow, &catalog, &env)?;
        let mut texts = BTreeMap::new();
        let mut artifacts = Vec::new();
        for node_id in &result.order {
            let node = &result.nodes[node_id];
            for (port, value) in &node.outputs {
                if let Value::Text(t) = value {
                    texts.insert(format!("{node_id}.{port}"), t.clone());
                }
            }
            for rel in &node.files {
                let path = workspace.join(rel);
                let bytes = std::fs::read(&path).map_err(io_err(&path))?;
                let name = rel.to_string_lossy().into_owned();
                artifacts.push(self.artifacts.put(&bytes, &name, &workflow.id, run_id, node_id)?);
            }
        }
        Ok(RunReport {
            workflow_id: workflow.id.clone(),
            order: result.order,
            texts,
            artifacts,
        })
    }
}

/// JSON view of a resolve outcome.
pub fn outcome_json(o: &ResolveOutcome) -> serde_json::Value {
    let statuses: Vec<serde_json::Value> = o
        .statuses
        .iter()
        .map(|s| match &s.outcome {
            Ok(InstallOutcome::Installed(p)) => {
                serde_json::json!({"name": s.name, "kind": s.kind, "installed": p})
            }
            Ok(InstallOutcome::AlreadyPresent(p)) => {
                serde_json::json!({"name": s.name, "kind": s.kind, "already_present": p})
            }
            Err(e) => serde_json::json!({"name": s.name, "kind": s.kind, "error": e.to_string()}),
        })
        .collect();
    serde_json::json!({
        "mode": o.mode,
        "workflow_found": o.workflow_found,
        "before": o.before,
        "after": o.after,
        "samples": o.samples.iter().map(|s| serde_json::json!({
            "operation": s.operation.label(),
            "mode": s.mode,
            "seconds": s.duration.as_secs_f64(),
        })).collect::<Vec<_>>(),
        "statuses": statuses,
        "unresolved": o.unresolved,
        "total_seconds": o.total().as_secs_f64(),
    })
}
