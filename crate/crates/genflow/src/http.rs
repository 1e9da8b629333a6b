//! JSON-over-HTTP facade.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use genflow_core::assets::Mode;
use genflow_core::embedding::EmbedError;
use genflow_core::pilot::PilotQuery;
use genflow_core::workflow::{parse_workflow, Workflow};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::engine::{outcome_json, Engine, EngineError};
use crate::jobs::{JobKind, JobManager};

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    pub jobs: Arc<JobManager>,
}

impl AppState {
    pub fn new(engine: Arc<Engine>) -> Self {
        let jobs = JobManager::new(engine.config().service_workers);
        Self { engine, jobs }
    }
}

pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn with(mut self, key: &str, value: Value) -> Self {
        self.body[key] = value;
        self
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let msg = e.to_string();
        match e {
            EngineError::EmptyQuery | EngineError::Parse(_) | EngineError::BadFileName(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, msg)
            }
            EngineError::Embed(EmbedError::EmbedderUnavailable(_)) => {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, msg)
            }
            EngineError::NoResults { explored } => ApiError::new(StatusCode::NOT_FOUND, msg)
                .with("results", json!([]))
                .with("explored", json!(explored)),
            EngineError::Invalid(findings) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, msg).with("findings", json!(findings))
            }
            EngineError::Unsatisfied(report) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, msg).with("dependencies", json!(report))
            }
            EngineError::UnknownWorkflow(_) => ApiError::new(StatusCode::NOT_FOUND, msg),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, msg),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, EngineError> + Send + 'static) -> ApiResult<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/pilot/search", post(search))
        .route("/api/workflows", get(list_workflows).post(create_workflow))
        .route("/api/workflows/{id}", get(get_workflow))
        .route("/api/execute", post(execute))
        .route("/api/jobs/{id}", get(get_job))
        .route("/api/artifacts/{id}", get(get_artifact))
        .route("/api/nodes", get(nodes))
        .route("/api/gallery", get(gallery))
        .route("/api/resolve", post(resolve))
        .with_state(state)
}

#[derive(Deserialize)]
struct SearchRequest {
    query: String,
    #[serde(default)]
    k: Option<usize>,
}

async fn search(State(s): State<AppState>, Json(req): Json<SearchRequest>) -> ApiResult<Json<Value>> {
    let query = PilotQuery { text: req.query, k: req.k };
    let engine = Arc::clone(&s.engine);
    let response = blocking(move || engine.search(&query)).await?;
    Ok(Json(json!(response)))
}

fn workflow_entry(w: &Workflow) -> Value {
    json!({
        "id": w.id,
        "name": w.name,
        "description": w.description,
        "likes": w.likes,
        "node_count": w.nodes.len(),
    })
}

async fn list_workflows(State(s): State<AppState>) -> Json<Value> {
    let list: Vec<Value> = s.engine.workflows().iter().map(workflow_entry).collect();
    Json(json!(list))
}

async fn create_workflow(State(s): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let engine = Arc::clone(&s.engine);
    let wf = blocking(move || {
        let wf = parse_workflow(&body)?;
        engine.add_workflow(&wf, "upload")?;
        Ok(wf)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(workflow_entry(&wf))))
}

async fn get_workflow(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Workflow>> {
    s.engine
        .workflow(&id)
        .map(Json)
        .ok_or_else(|| EngineError::UnknownWorkflow(id).into())
}

/// A workflow given inline or by stored id.
#[derive(Debug, Deserialize)]
pub struct WorkflowRef {
    #[serde(default)]
    pub workflow: Option<Value>,
    #[serde(default)]
    pub id: Option<String>,
}

impl WorkflowRef {
    fn load(self, engine: &Engine) -> Result<Workflow, EngineError> {
        match (self.workflow, self.id) {
            (Some(doc), _) => Ok(parse_workflow(doc.to_string().as_bytes())?),
            (None, Some(id)) => engine.workflow(&id).ok_or(EngineError::UnknownWorkflow(id)),
            (None, None) => Err(EngineError::Parse(genflow_core::workflow::ParseError::SchemaViolation(
                "request needs `workflow` or `id`".into(),
            ))),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct ExecuteRequest {
    #[serde(flatten)]
    pub target: WorkflowRef,
    /// Input files for the workspace, base64-encoded, keyed by file name.
    #[serde(default)]
    pub files: BTreeMap<String, String>,
    #[serde(default)]
    pub install: bool,
}

async fn execute(State(s): State<AppState>, Json(req): Json<ExecuteRequest>) -> ApiResult<(StatusCode, Json<Value>)> {
    let mut files = BTreeMap::new();
    for (name, b64) in &req.files {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(b64)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("file {name:?}: {e}")))?;
        files.insert(name.clone(), bytes);
    }
    let engine = Arc::clone(&s.engine);
    let install = req.install;
    let target = req.target;
    let (wf, readiness) = blocking(move || {
        let wf = target.load(&engine)?;
        let readiness = engine.readiness(&wf, install)?;
        Ok((wf, readiness))
    })
    .await?;

    let resolve_id = readiness
        .needs_install()
        .then(|| s.jobs.create(JobKind::ResolveInstall, None));
    let exec_id = s.jobs.create(JobKind::Execute, resolve_id.clone());
    let (engine, jobs) = (Arc::clone(&s.engine), Arc::clone(&s.jobs));
    let (rid, eid) = (resolve_id.clone(), exec_id.clone());
    s.jobs.submit(move || {
        if let Some(rid) = rid {
            jobs.start(&rid);
            match engine.resolve_and_install(&wf) {
                Ok(run) => {
                    let mut result = json!({ "local": outcome_json(&run.local) });
                    if let Some(remote) = &run.remote {
                        result["remote"] = outcome_json(remote);
                    }
                    jobs.finish(&rid, result);
                }
                Err(e) => {
                    jobs.fail(&rid, e.to_string());
                    jobs.fail(&eid, format!("dependency resolution failed: {e}"));
                    return;
                }
            }
        }
        jobs.start(&eid);
        match engine.run(&wf, &files, &eid) {
            Ok(report) => jobs.finish(&eid, json!(report)),
            Err(e) => jobs.fail(&eid, e.to_string()),
        };
    });
    let mut body = json!({ "job_id": exec_id });
    if let Some(rid) = resolve_id {
        body["resolve_job_id"] = json!(rid);
    }
    Ok((StatusCode::ACCEPTED, Json(body)))
}

async fn get_job(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    s.jobs
        .get(&id)
        .map(|j| Json(json!(j)))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown job {id:?}")))
}

async fn get_artifact(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let engine = Arc::clone(&s.engine);
    let found = blocking(move || {
        let meta = engine.artifacts().meta(&id)?;
        Ok(meta.zip(engine.artifacts().bytes(&id)))
    })
    .await?;
    let (meta, bytes) = found.ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown artifact"))?;
    Ok(([(header::CONTENT_TYPE, meta.content_type)], bytes).into_response())
}

async fn nodes(State(s): State<AppState>) -> ApiResult<Json<Value>> {
    let engine = Arc::clone(&s.engine);
    let catalog = blocking(move || engine.catalog()).await?;
    let list: Vec<Value> = catalog
        .iter()
        .map(|(name, spec)| {
            let mut v = json!(spec);
            v["type"] = json!(name);
            v
        })
        .collect();
    Ok(Json(json!(list)))
}

async fn gallery(State(s): State<AppState>) -> ApiResult<Json<Value>> {
    let engine = Arc::clone(&s.engine);
    let list = blocking(move || Ok(engine.artifacts().gallery()?)).await?;
    Ok(Json(json!(list)))
}

#[derive(Debug, Deserialize)]
pub struct ResolveRequest {
    #[serde(flatten)]
    pub target: WorkflowRef,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub install: bool,
}

/// Without `install`, report what is missing and where it would come from.
/// With `install`, start a resolve_install job.
async fn resolve(State(s): State<AppState>, Json(req): Json<ResolveRequest>) -> ApiResult<(StatusCode, Json<Value>)> {
    let engine = Arc::clone(&s.engine);
    let target = req.target;
    let wf = blocking(move || target.load(&engine)).await?;
    if !req.install {
        let engine = Arc::clone(&s.engine);
        let mode = req.mode.unwrap_or(Mode::Local);
        let outcome = blocking(move || engine.resolve(&wf, mode, false)).await?;
        return Ok((StatusCode::OK, Json(outcome_json(&outcome))));
    }
    let id = s.jobs.create(JobKind::ResolveInstall, None);
    let (engine, jobs, jid, mode) = (Arc::clone(&s.engine), Arc::clone(&s.jobs), id.clone(), req.mode);
    s.jobs.submit(move || {
        jobs.start(&jid);
        let result = match mode {
            Some(mode) => engine.resolve(&wf, mode, true).map(|o| outcome_json(&o)),
            None => engine.resolve_and_install(&wf).map(|run| {
                let mut v = json!({ "local": outcome_json(&run.local) });
                if let Some(r) = &run.remote {
                    v["remote"] = outcome_json(r);
                }
                v
            }),
        };
        match result {
            Ok(v) => jobs.finish(&jid, v),
            Err(e) => jobs.fail(&jid, e.to_string()),
        };
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": id }))))
}
