use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::install::{install, AssetStatus, BlobCache, FetcherSource};
use super::{extract_dependencies, AssetDescriptor, AssetKind, DependencyReport, Fetcher, RemoteDirectory};
use super::{Registry, RegistryError};
use crate::workflow::{parse_workflow, NodeCatalog, Workflow};

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid workflow id {0:?}")]
    InvalidId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    SearchWorkflow,
    InstallMissingNodes,
    InstallMissingModels,
}

impl Operation {
    pub const ALL: [Operation; 3] = [
        Operation::SearchWorkflow,
        Operation::InstallMissingNodes,
        Operation::InstallMissingModels,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Operation::SearchWorkflow => "Search Workflow",
            Operation::InstallMissingNodes => "Install Missing Nodes",
            Operation::InstallMissingModels => "Install Missing Models",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingSample {
    pub operation: Operation,
    pub mode: Mode,
    pub duration: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Metadata and blobs from the local database; no outbound calls.
    Local,
    /// Metadata and blobs through the fetcher.
    Remote,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local" => Ok(Mode::Local),
            "remote" => Ok(Mode::Remote),
            other => Err(format!("unknown mode {other:?} (expected local or remote)")),
        }
    }
}

/// Workflow documents stored as `<id>.flow.json`.
#[derive(Debug, Clone)]
pub struct WorkflowStore {
    dir: PathBuf,
}

fn check_id(id: &str) -> Result<(), ResolveError> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(ResolveError::InvalidId(id.to_string()))
    }
}

impl WorkflowStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn put(&self, workflow: &Workflow) -> Result<PathBuf, ResolveError> {
        check_id(&workflow.id)?;
        std::fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(format!("{}.flow.json", workflow.id));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        std::io::Write::write_all(&mut tmp, workflow.to_json().as_bytes())?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(path)
    }

    pub fn get(&self, id: &str) -> Option<Workflow> {
        check_id(id).ok()?;
        let bytes = std::fs::read(self.dir.join(format!("{id}.flow.json"))).ok()?;
        parse_workflow(&bytes).ok()
    }

    /// Stored ids in ascending order.
    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = std::fs::read_dir(&self.dir)
            .into_iter()
            .flatten()
            .filter_map(Result::ok)
            .filter_map(|e| e.file_name().to_str()?.strip_suffix(".flow.json").map(String::from))
            .collect();
        ids.sort();
        ids
    }
}

/// The local database: asset registry, blob cache and workflow store under
/// one directory.
#[derive(Debug)]
pub struct LocalDatabase {
    pub dir: PathBuf,
    pub registry: Registry,
    pub blobs: BlobCache,
    pub workflows: WorkflowStore,
}

impl LocalDatabase {
    pub fn open(dir: &Path) -> Result<Self, ResolveError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            registry: Registry::open(&dir.join("registry.jsonl"))?,
            blobs: BlobCache::new(dir.join("blobs")),
            workflows: WorkflowStore::new(dir.join("workflows")),
        })
    }

    /// Record an asset's metadata and bytes.
    pub fn seed_asset(&self, descriptor: &AssetDescriptor, bytes: &[u8]) -> Result<(), ResolveError> {
        self.blobs.put(bytes)?;
        self.registry.record(descriptor.clone())?;
        Ok(())
    }
}

pub struct ResolveEnv<'a> {
    /// Managed root receiving installs.
    pub root: &'a Path,
    pub catalog: &'a NodeCatalog,
    pub db: &'a LocalDatabase,
    pub fetcher: &'a dyn Fetcher,
    pub remote: RemoteDirectory,
    /// When false, only look metadata up.
    pub install: bool,
}

#[derive(Debug, Clone)]
pub struct ResolveOutcome {
    pub mode: Mode,
    pub workflow_found: bool,
    pub before: DependencyReport,
    pub after: DependencyReport,
    pub samples: Vec<TimingSample>,
    pub statuses: Vec<AssetStatus>,
    /// Dependencies for which no install metadata was found.
    pub unresolved: Vec<String>,
}

impl ResolveOutcome {
    pub fn duration(&self, op: Operation) -> Duration {
        self.samples.iter().filter(|s| s.operation == op).map(|s| s.duration).sum()
    }

    pub fn total(&self) -> Duration {
        self.samples.iter().map(|s| s.duration).sum()
    }
}

fn lookup(
    mode: Mode,
    env: &ResolveEnv<'_>,
    kind: AssetKind,
    name: &str,
    unresolved: &mut Vec<String>,
) -> Option<AssetDescriptor> {
    let found = match mode {
        Mode::Local => match kind {
            AssetKind::NodePack => env.db.registry.lookup_node_type(name),
            AssetKind::Model => env.db.registry.lookup(name, kind),
        },
        Mode::Remote => {
            let url = match kind {
                AssetKind::NodePack => env.remote.node_type_url(name),
                AssetKind::Model => env.remote.asset_url(kind, name),
            };
            match env.fetcher.fetch(&url) {
                Ok(bytes) => serde_json::from_slice(&bytes)
                    .map_err(|e| log::warn!("bad descriptor at {url}: {e}"))
                    .ok(),
                Err(e) => {
                    log::debug!("{e}");
                    None
                }
            }
        }
    };
    if found.is_none() {
        unresolved.push(format!("{kind}:{name}"));
    }
    found
}

fn model_file_name(reference: &str) -> &str {
    Path::new(reference).file_name().and_then(|n| n.to_str()).unwrap_or(reference)
}

/// Look the workflow up, compute its missing dependencies, and resolve (and
/// optionally install) them, timing each of the three operations. In
/// [`Mode::Local`] everything comes from the local database; in
/// [`Mode::Remote`] metadata and bytes come through the fetcher, and what is
/// retrieved is recorded in the local database.
pub fn timed_resolve_and_install(
    workflow: &Workflow,
    mode: Mode,
    env: &ResolveEnv<'_>,
) -> Result<ResolveOutcome, ResolveError> {
    let mut samples = Vec::new();
    let mut statuses = Vec::new();
    let mut unresolved = Vec::new();

    let start = Instant::now();
    let workflow_found = match mode {
        Mode::Local => env.db.workflows.get(&workflow.id).is_some(),
        Mode::Remote => match env.fetcher.fetch(&env.remote.workflow_url(&workflow.id)) {
            Ok(bytes) => match parse_workflow(&bytes) {
                Ok(wf) => {
                    env.db.workflows.put(&wf)?;
                    true
                }
                Err(e) => {
                    log::warn!("remote workflow {}: {e}", workflow.id);
                    false
                }
            },
            Err(_) => false,
        },
    };
    samples.push(TimingSample {
        operation: Operation::SearchWorkflow,
        mode,
        duration: start.elapsed(),
    });

    let before = extract_dependencies(workflow, env.catalog, Some(env.root));

    let plans = [
        (Operation::InstallMissingNodes, AssetKind::NodePack, &before.missing_node_types),
        (Operation::InstallMissingModels, AssetKind::Model, &before.missing_models),
    ];
    for (operation, kind, missing) in plans {
        let start = Instant::now();
        let mut plan: BTreeMap<String, AssetDescriptor> = BTreeMap::new();
        for name in missing {
            let key = match kind {
                AssetKind::NodePack => name.as_str(),
                AssetKind::Model => model_file_name(name),
            };
            if let Some(d) = lookup(mode, env, kind, key, &mut unresolved) {
                plan.insert(d.name.clone(), d);
            }
        }
        if env.install {
            let plan: Vec<_> = plan.into_values().collect();
            let result = match mode {
                Mode::Local => install(&plan, &env.db.blobs, env.root, Some(env.db)),
                Mode::Remote => install(&plan, &FetcherSource(env.fetcher), env.root, Some(env.db)),
            };
            statuses.extend(result.statuses);
        }
        samples.push(TimingSample {
            operation,
            mode,
            duration: start.elapsed(),
        });
    }

    let after = extract_dependencies(workflow, env.catalog, Some(env.root));
    Ok(ResolveOutcome {
        mode,
        workflow_found,
        before,
        after,
        samples,
        statuses,
        unresolved,
    })
}

/// Mean per-operation durations for the two modes, with a total row.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingTable {
    pub rows: Vec<(String, Option<Duration>, Option<Duration>)>,
}

fn mean_by_operation(runs: &[Vec<TimingSample>]) -> Option<BTreeMap<Operation, Duration>> {
    if runs.is_empty() {
        return None;
    }
    let mut sums: BTreeMap<Operation, Duration> = Operation::ALL.iter().map(|&op| (op, Duration::ZERO)).collect();
    for run in runs {
        for s in run {
            *sums.entry(s.operation).or_default() += s.duration;
        }
    }
    Some(sums.into_iter().map(|(op, d)| (op, d / runs.len() as u32)).collect())
}

impl TimingTable {
    /// Each run is the sample list of one resolution; operations are summed
    /// within a run and averaged across runs.
    pub fn from_runs(local: &[Vec<TimingSample>], remote: &[Vec<TimingSample>]) -> Self {
        let local = mean_by_operation(local);
        let remote = mean_by_operation(remote);
        let mut rows: Vec<_> = Operation::ALL
            .iter()
            .map(|op| {
                (
                    op.label().to_string(),
                    local.as_ref().map(|m| m[op]),
                    remote.as_ref().map(|m| m[op]),
                )
            })
            .collect();
        let total = |col: &Option<BTreeMap<Operation, Duration>>| col.as_ref().map(|m| m.values().sum());
        rows.push(("Total".to_string(), total(&local), total(&remote)));
        Self { rows }
    }

    pub fn total(&self) -> (Option<Duration>, Option<Duration>) {
        let last = self.rows.last().expect("table has a total row");
        (last.1, last.2)
    }
}

impl fmt::Display for TimingTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell = |d: &Option<Duration>| match d {
            Some(d) => format!("{:.3} s", d.as_secs_f64()),
            None => "-".to_string(),
        };
        writeln!(f, "{:<24}{:>18}{:>26}", "Operation", "Local Database", "Without Local Database")?;
        for (label, local, remote) in &self.rows {
            writeln!(f, "{:<24}{:>18}{:>26}", label, cell(local), cell(remote))?;
        }
        Ok(())
    }
}
