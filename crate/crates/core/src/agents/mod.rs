//! Supervised exploration over a simulated web: an orchestrator delegates to
//! a web-search worker and a file-parsing worker, every agent keeps an
//! append-only memory, and a run can be replayed from those memories.

mod file;
mod site;
mod web;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::assets::{AssetDescriptor, AssetKind, DependencyReport, LocalDatabase};
use crate::ingest::{CleanText, Preprocessor};
use crate::merge::MergeConfig;
use crate::pilot::FallbackSignal;
use crate::workflow::{NodeCatalog, Workflow};

pub use file::{file_agent_run, parse_error_cause, FileReport, WorkflowSummary};
pub use site::{SimAsset, SimPage, SimSite, SiteError};
pub use web::{element_overlap, web_agent_step, WebAction, WebAgentState, TARGET_KEY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentId {
    Orchestrator,
    WebSurfer,
    FileSurfer,
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentId::Orchestrator => "orchestrator",
            AgentId::WebSurfer => "web_surfer",
            AgentId::FileSurfer => "file_surfer",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageKind {
    TaskAssign,
    Observation,
    Result,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMessage {
    pub from: AgentId,
    pub to: AgentId,
    pub kind: MessageKind,
    pub payload: Map<String, Value>,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub step: u64,
    pub action: Value,
    pub observation: Value,
}

/// Append-only action log of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMemory {
    agent: AgentId,
    entries: Vec<MemoryEntry>,
}

impl AgentMemory {
    pub fn new(agent: AgentId) -> Self {
        Self {
            agent,
            entries: Vec::new(),
        }
    }

    pub fn agent(&self) -> AgentId {
        self.agent
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    fn record(&mut self, entry: MemoryEntry) {
        self.entries.push(entry);
    }
}

/// One worker action, in execution order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: u64,
    pub agent: AgentId,
    pub action: Value,
    pub observation: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    NotFound,
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum ExploreStatus {
    Success,
    Failure(FailureReason),
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("site has no page {0:?}")]
    MissingPage(String),
    #[error("replay diverged: {0}")]
    ReplayDiverged(String),
}

/// Everything the workers need besides the site.
#[derive(Clone)]
pub struct ExploreContext<'a> {
    pub catalog: &'a NodeCatalog,
    pub preprocessor: &'a Preprocessor,
    pub merge: MergeConfig<f64>,
    /// Managed root consulted when computing missing dependencies.
    pub root: Option<&'a Path>,
    /// Captured install metadata and bytes are recorded here.
    pub db: Option<&'a LocalDatabase>,
}

impl<'a> ExploreContext<'a> {
    pub fn new(catalog: &'a NodeCatalog, preprocessor: &'a Preprocessor) -> Self {
        Self {
            catalog,
            preprocessor,
            merge: MergeConfig::default(),
            root: None,
            db: None,
        }
    }

    pub fn with_merge(mut self, merge: MergeConfig<f64>) -> Self {
        self.merge = merge;
        self
    }

    pub fn with_root(mut self, root: &'a Path) -> Self {
        self.root = Some(root);
        self
    }

    pub fn with_db(mut self, db: &'a LocalDatabase) -> Self {
        self.db = Some(db);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrchestrationResult {
    pub status: ExploreStatus,
    pub workflow: Option<Workflow>,
    pub summary: Option<WorkflowSummary>,
    pub report: Option<DependencyReport>,
    pub captured: Vec<AssetDescriptor>,
    pub trace: Vec<TraceEntry>,
    pub messages: Vec<AgentMessage>,
    pub memories: Vec<AgentMemory>,
}

impl OrchestrationResult {
    pub fn succeeded(&self) -> bool {
        self.status == ExploreStatus::Success
    }

    pub fn delegations(&self) -> usize {
        self.messages.iter().filter(|m| m.kind == MessageKind::TaskAssign).count()
    }

    pub fn memory(&self, agent: AgentId) -> Option<&AgentMemory> {
        self.memories.iter().find(|m| m.agent == agent)
    }

    /// Pages entered by clicks, in order.
    pub fn clicked_pages(&self) -> Vec<String> {
        self.trace
            .iter()
            .filter_map(|t| serde_json::from_value::<WebAction>(t.action.clone()).ok())
            .filter_map(|a| match a {
                WebAction::Click { to, .. } => Some(to),
                _ => None,
            })
            .collect()
    }
}

struct Conversation {
    step: u64,
    budget: usize,
    messages: Vec<AgentMessage>,
    trace: Vec<TraceEntry>,
    memories: BTreeMap<AgentId, AgentMemory>,
}

impl Conversation {
    fn new(budget: usize) -> Self {
        let memories = [AgentId::Orchestrator, AgentId::WebSurfer, AgentId::FileSurfer]
            .into_iter()
            .map(|a| (a, AgentMemory::new(a)))
            .collect();
        Self {
            step: 0,
            budget,
            messages: Vec::new(),
            trace: Vec::new(),
            memories,
        }
    }

    fn next_step(&mut self) -> u64 {
        self.step += 1;
        self.step
    }

    fn exhausted(&self) -> bool {
        self.trace.len() >= self.budget
    }

    fn send(&mut self, from: AgentId, to: AgentId, kind: MessageKind, payload: Value) {
        let payload = match payload {
            Value::Object(map) => map,
            other => Map::from_iter([("value".to_string(), other)]),
        };
        let step = self.next_step();
        self.messages.push(AgentMessage {
            from,
            to,
            kind,
            payload,
            step,
        });
    }

    fn remember(&mut self, agent: AgentId, action: Value, observation: Value) -> u64 {
        let step = self.next_step();
        self.memories.get_mut(&agent).expect("known agent").record(MemoryEntry {
            step,
            action,
            observation,
        });
        step
    }

    /// A worker action: logged to the worker's memory and to the trace.
    fn act(&mut self, agent: AgentId, action: Value, observation: Value) {
        let step = self.remember(agent, action.clone(), observation.clone());
        self.trace.push(TraceEntry {
            step,
            agent,
            action,
            observation,
        });
    }

    fn delegate(&mut self, to: AgentId, task: &str, payload: Value) {
        self.remember(AgentId::Orchestrator, json!({"action": "delegate", "task": task, "to": to}), Value::Null);
        let mut payload = match payload {
            Value::Object(map) => map,
            _ => Map::new(),
        };
        payload.insert("task".into(), Value::String(task.into()));
        self.send(AgentId::Orchestrator, to, MessageKind::TaskAssign, Value::Object(payload));
    }

    fn worker_failure(&mut self, from: AgentId, reason: FailureReason) {
        self.send(from, AgentId::Orchestrator, MessageKind::Failure, json!({"reason": reason}));
        self.remember(AgentId::Orchestrator, json!({"action": "finish"}), json!({"failure": reason}));
    }
}

enum WebPolicy {
    Live,
    Scripted(VecDeque<WebAction>),
}

impl WebPolicy {
    fn next(
        &mut self,
        state: &WebAgentState,
        page_id: &str,
        page: &SimPage,
        query: &CleanText,
        ctx: &ExploreContext<'_>,
    ) -> Result<WebAction, AgentError> {
        match self {
            WebPolicy::Live => Ok(web_agent_step(state, page_id, page, query, &ctx.merge, ctx.preprocessor)),
            WebPolicy::Scripted(actions) => {
                let action = actions
                    .pop_front()
                    .ok_or_else(|| AgentError::ReplayDiverged("memory has no further actions".into()))?;
                let on_page = match &action {
                    WebAction::Click { page, .. } | WebAction::Download { page, .. } | WebAction::GiveUp { page } => page,
                };
                if on_page != page_id {
                    return Err(AgentError::ReplayDiverged(format!(
                        "recorded action on {on_page:?} while on {page_id:?}"
                    )));
                }
                Ok(action)
            }
        }
    }
}

fn capture_assets(
    report: &DependencyReport,
    site: &SimSite,
    db: Option<&LocalDatabase>,
) -> (Vec<AssetDescriptor>, Vec<String>) {
    let wanted = report
        .missing_node_types
        .iter()
        .map(|t| (AssetKind::NodePack, t.as_str()))
        .chain(report.missing_models.iter().map(|m| {
            let file = Path::new(m).file_name().and_then(|n| n.to_str()).unwrap_or(m);
            (AssetKind::Model, file)
        }));
    let mut captured: Vec<AssetDescriptor> = Vec::new();
    let mut unresolved = Vec::new();
    for (kind, name) in wanted {
        let Some(asset) = site.assets.iter().find(|a| a.satisfies(kind, name)) else {
            unresolved.push(format!("{kind}:{name}"));
            continue;
        };
        if captured.contains(&asset.descriptor) {
            continue;
        }
        if let Some(db) = db {
            let stored = asset
                .bytes()
                .map_err(|e| e.to_string())
                .and_then(|bytes| db.seed_asset(&asset.descriptor, &bytes).map_err(|e| e.to_string()));
            if let Err(e) = stored {
                log::warn!("cannot record asset {}: {e}", asset.descriptor.name);
                unresolved.push(format!("{kind}:{name}"));
                continue;
            }
        }
        captured.push(asset.descriptor.clone());
    }
    (captured, unresolved)
}

struct Found {
    workflow: Option<Workflow>,
    summary: Option<WorkflowSummary>,
    report: Option<DependencyReport>,
    captured: Vec<AssetDescriptor>,
}

fn run(
    goal: &FallbackSignal,
    site: &SimSite,
    budget: usize,
    ctx: &ExploreContext<'_>,
    mut policy: WebPolicy,
) -> Result<OrchestrationResult, AgentError> {
    if budget == 0 {
        return Err(AgentError::ZeroBudget);
    }
    let query = CleanText::from_joined(&goal.clean_query);
    let mut conv = Conversation::new(budget);
    let mut web = WebAgentState::new(&site.start);
    let mut found = Found {
        workflow: None,
        summary: None,
        report: None,
        captured: Vec::new(),
    };

    conv.delegate(AgentId::WebSurfer, "web_search", json!({"query": goal.query}));
    let status = 'plan: loop {
        let download = loop {
            let Some(page_id) = web.current().map(str::to_string) else {
                break None;
            };
            if conv.exhausted() {
                conv.worker_failure(AgentId::WebSurfer, FailureReason::BudgetExhausted);
                break 'plan ExploreStatus::Failure(FailureReason::BudgetExhausted);
            }
            let page = site.page(&page_id).ok_or_else(|| AgentError::MissingPage(page_id.clone()))?;
            let action = policy.next(&web, &page_id, page, &query, ctx)?;
            let (observation, fetched) = match &action {
                WebAction::Click { to, .. } => (json!({"landed": to}), None),
                WebAction::Download { target, .. } => {
                    let bytes = page.download_bytes(target).unwrap_or_default();
                    (json!({"bytes": bytes.len()}), Some((target.clone(), bytes)))
                }
                WebAction::GiveUp { .. } => {
                    let back = web.path.len().checked_sub(2).map(|i| web.path[i].clone());
                    (json!({"back_to": back}), None)
                }
            };
            conv.act(
                AgentId::WebSurfer,
                serde_json::to_value(&action).expect("action serializes"),
                observation,
            );
            web.apply(&action);
            if let Some((target, bytes)) = fetched {
                break Some((page_id, target, bytes));
            }
        };

        let Some((page_id, target, bytes)) = download else {
            conv.worker_failure(AgentId::WebSurfer, FailureReason::NotFound);
            break ExploreStatus::Failure(FailureReason::NotFound);
        };
        let source = format!("{page_id}/{target}");
        conv.send(
            AgentId::WebSurfer,
            AgentId::Orchestrator,
            MessageKind::Result,
            json!({"source": source, "document": String::from_utf8_lossy(&bytes)}),
        );

        conv.delegate(AgentId::FileSurfer, "parse_file", json!({"source": source}));
        if conv.exhausted() {
            conv.worker_failure(AgentId::FileSurfer, FailureReason::BudgetExhausted);
            break ExploreStatus::Failure(FailureReason::BudgetExhausted);
        }
        let report = match file_agent_run(&bytes, ctx.catalog, ctx.root) {
            Ok(report) => report,
            Err(e) => {
                let cause = parse_error_cause(&e);
                conv.act(
                    AgentId::FileSurfer,
                    json!({"action": "parse", "source": source}),
                    json!({"error": cause}),
                );
                conv.send(
                    AgentId::FileSurfer,
                    AgentId::Orchestrator,
                    MessageKind::Failure,
                    json!({"cause": cause, "detail": e.to_string()}),
                );
                conv.delegate(AgentId::WebSurfer, "resume_web_search", json!({}));
                continue;
            }
        };
        conv.act(
            AgentId::FileSurfer,
            json!({"action": "parse", "source": source}),
            json!({"summary": report.summary}),
        );
        conv.send(
            AgentId::FileSurfer,
            AgentId::Orchestrator,
            MessageKind::Result,
            json!({"summary": report.summary, "dependencies": report.dependencies}),
        );
        found.workflow = Some(report.workflow);
        found.summary = Some(report.summary);

        conv.delegate(
            AgentId::WebSurfer,
            "capture_install_metadata",
            json!({
                "missing_node_types": report.dependencies.missing_node_types,
                "missing_models": report.dependencies.missing_models,
            }),
        );
        if conv.exhausted() {
            found.report = Some(report.dependencies);
            conv.worker_failure(AgentId::WebSurfer, FailureReason::BudgetExhausted);
            break ExploreStatus::Failure(FailureReason::BudgetExhausted);
        }
        let (captured, unresolved) = capture_assets(&report.dependencies, site, ctx.db);
        let names: Vec<&str> = captured.iter().map(|d| d.name.as_str()).collect();
        conv.act(
            AgentId::WebSurfer,
            json!({"action": "capture", "missing": report.dependencies.missing_node_types.len() + report.dependencies.missing_models.len()}),
            json!({"captured": names, "unresolved": unresolved}),
        );
        conv.send(
            AgentId::WebSurfer,
            AgentId::Orchestrator,
            MessageKind::Result,
            json!({"descriptors": captured}),
        );
        conv.remember(AgentId::Orchestrator, json!({"action": "finish"}), json!({"success": true}));
        found.report = Some(report.dependencies);
        found.captured = captured;
        break ExploreStatus::Success;
    };

    Ok(OrchestrationResult {
        status,
        workflow: found.workflow,
        summary: found.summary,
        report: found.report,
        captured: found.captured,
        trace: conv.trace,
        messages: conv.messages,
        memories: conv.memories.into_values().collect(),
    })
}

/// Run the fixed delegation plan: web search, then file parsing of a
/// download, then capture of install metadata for whatever the workflow is
/// missing. A malformed download sends the web worker back to searching.
/// `budget` bounds the number of worker actions.
pub fn orchestrate(
    goal: &FallbackSignal,
    site: &SimSite,
    budget: usize,
    ctx: &ExploreContext<'_>,
) -> Result<OrchestrationResult, AgentError> {
    run(goal, site, budget, ctx, WebPolicy::Live)
}

/// Re-run a conversation with the web worker's choices taken from its
/// recorded memory instead of being recomputed.
pub fn replay(
    goal: &FallbackSignal,
    site: &SimSite,
    budget: usize,
    ctx: &ExploreContext<'_>,
    memories: &[AgentMemory],
) -> Result<OrchestrationResult, AgentError> {
    let web = memories
        .iter()
        .find(|m| m.agent == AgentId::WebSurfer)
        .ok_or_else(|| AgentError::ReplayDiverged("no web worker memory".into()))?;
    let actions = web
        .entries
        .iter()
        .filter_map(|e| serde_json::from_value::<WebAction>(e.action.clone()).ok())
        .collect();
    run(goal, site, budget, ctx, WebPolicy::Scripted(actions))
}

/// Check that every message passes through the orchestrator and that steps
/// strictly increase.
pub fn check_supervision(messages: &[AgentMessage]) -> Result<(), String> {
    let mut last = 0;
    for m in messages {
        if m.from == m.to {
            return Err(format!("step {}: {} messaged itself", m.step, m.from));
        }
        if m.from != AgentId::Orchestrator && m.to != AgentId::Orchestrator {
            return Err(format!("step {}: {} messaged {} directly", m.step, m.from, m.to));
        }
        if m.step <= last {
            return Err(format!("step {} does not follow {last}", m.step));
        }
        last = m.step;
    }
    Ok(())
}

/// True when no two clicks land on the same page and none returns to the
/// start page.
pub fn no_revisits(result: &OrchestrationResult, start: &str) -> bool {
    let mut seen = BTreeSet::from([start.to_string()]);
    result.clicked_pages().into_iter().all(|p| seen.insert(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::preprocess_text;

    fn goal(q: &str) -> FallbackSignal {
        FallbackSignal {
            query: q.into(),
            clean_query: preprocess_text(q).joined(),
        }
    }

    fn site(json: &str) -> SimSite {
        SimSite::parse(json.as_bytes()).unwrap()
    }

    const DOC: &str = r#"{"version":1,"id":"found","nodes":[{"id":"p","type":"text_prompt","params":{"text":"hi"}}]}"#;

    fn one_page() -> SimSite {
        site(&format!(
            r#"{{"start":"home","pages":{{"home":{{
                "w_elements":[{{"bbox":[0,0,10,10],"source":"W","properties":{{"target":"dl","caption":"face swap workflow"}}}}],
                "downloads":{{"dl":{DOC}}}}}}}}}"#
        ))
    }

    fn two_hop() -> SimSite {
        site(&format!(
            r#"{{"start":"a","pages":{{
                "a":{{"w_elements":[{{"bbox":[0,0,10,10],"source":"W","properties":{{"target":"n","caption":"face swap"}}}}],"links":{{"n":"b"}}}},
                "b":{{"w_elements":[{{"bbox":[0,0,10,10],"source":"W","properties":{{"target":"n","caption":"face swap"}}}}],"links":{{"n":"c"}}}},
                "c":{{"w_elements":[{{"bbox":[0,0,10,10],"source":"W","properties":{{"target":"dl","caption":"face swap"}}}}],"downloads":{{"dl":{DOC}}}}}}}}}"#
        ))
    }

    fn run_on(s: &SimSite, q: &str, budget: usize) -> OrchestrationResult {
        let catalog = NodeCatalog::builtin();
        let pre = Preprocessor::default();
        orchestrate(&goal(q), s, budget, &ExploreContext::new(&catalog, &pre)).unwrap()
    }

    #[test]
    fn one_page_site_takes_three_delegations() {
        let r = run_on(&one_page(), "face swap", 20);
        assert!(r.succeeded());
        assert_eq!(r.delegations(), 3);
        assert_eq!(r.trace.len(), 3);
        assert_eq!(r.summary.unwrap().node_count, 1);
        check_supervision(&r.messages).unwrap();
    }

    #[test]
    fn no_match_is_not_found() {
        let r = run_on(&one_page(), "landscape painting", 20);
        assert_eq!(r.status, ExploreStatus::Failure(FailureReason::NotFound));
        assert!(r.workflow.is_none());
    }

    #[test]
    fn budget_one_on_two_hops() {
        let r = run_on(&two_hop(), "face swap", 1);
        assert_eq!(r.status, ExploreStatus::Failure(FailureReason::BudgetExhausted));
        assert_eq!(r.trace.len(), 1);
        assert!(run_on(&two_hop(), "face swap", 20).succeeded());
    }

    #[test]
    fn zero_budget_rejected() {
        let catalog = NodeCatalog::builtin();
        let pre = Preprocessor::default();
        assert!(matches!(
            orchestrate(&goal("x"), &one_page(), 0, &ExploreContext::new(&catalog, &pre)),
            Err(AgentError::ZeroBudget)
        ));
    }

    #[test]
    fn malformed_download_resumes_search() {
        let s = site(&format!(
            r#"{{"start":"home","pages":{{"home":{{
                "w_elements":[
                    {{"bbox":[0,0,10,10],"source":"W","properties":{{"target":"bad","caption":"face swap face"}}}},
                    {{"bbox":[20,0,30,10],"source":"W","properties":{{"target":"good","caption":"face"}}}}],
                "downloads":{{"bad":"{{oops","good":{DOC}}}}}}}}}"#
        ));
        let r = run_on(&s, "face swap", 20);
        assert!(r.succeeded());
        let failures = r.messages.iter().filter(|m| m.kind == MessageKind::Failure).count();
        assert_eq!(failures, 1);
        assert_eq!(r.trace[1].observation, json!({"error": "MalformedDocument"}));
    }

    #[test]
    fn replay_matches_and_memories_precede_messages() {
        let s = two_hop();
        let catalog = NodeCatalog::builtin();
        let pre = Preprocessor::default();
        let ctx = ExploreContext::new(&catalog, &pre);
        let r = orchestrate(&goal("face swap"), &s, 20, &ctx).unwrap();
        let again = replay(&goal("face swap"), &s, 20, &ctx, &r.memories).unwrap();
        assert_eq!(again.trace, r.trace);
        assert_eq!(again.messages, r.messages);
        assert!(no_revisits(&r, &s.start));

        for t in &r.trace {
            let mem = r.memory(t.agent).unwrap();
            assert!(mem.entries().iter().any(|e| e.step == t.step && e.action == t.action));
        }
    }

    #[test]
    fn supervision_check_flags_direct_messages() {
        let m = |from, to, step| AgentMessage {
            from,
            to,
            kind: MessageKind::Observation,
            payload: Map::new(),
            step,
        };
        assert!(check_supervision(&[m(AgentId::Orchestrator, AgentId::WebSurfer, 1)]).is_ok());
        assert!(check_supervision(&[m(AgentId::WebSurfer, AgentId::FileSurfer, 1)]).is_err());
        assert!(check_supervision(&[
            m(AgentId::Orchestrator, AgentId::WebSurfer, 2),
            m(AgentId::WebSurfer, AgentId::Orchestrator, 2)
        ])
        .is_err());
    }
}
