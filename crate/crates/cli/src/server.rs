//! HTTP JSON API over a single campaign. Mutations are serialized through one
//! mutex; CPU-heavy handlers run on the blocking pool.

use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hitl_core::acquisition::{CandidateBatch, ReviewStatus, Strategy};
use hitl_core::campaign::{BoundaryPlane, Campaign, CandidateRef, IterationReport, Phase};
use hitl_core::dataset::{load_dataset, ExperimentRecord, Feature, Target};
use hitl_core::sampling::{ConditionPoint, SurrogateSpaceSpec};
use hitl_core::surrogate::Prediction;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Header carrying the campaign version a client last saw. When present on a
/// mutating request and stale, the request is refused with 409.
pub const VERSION_HEADER: &str = "x-campaign-version";

#[derive(Clone)]
pub struct AppState {
    campaign: Arc<Mutex<Campaign>>,
}

impl AppState {
    pub fn new(campaign: Campaign) -> Self {
        Self {
            campaign: Arc::new(Mutex::new(campaign)),
        }
    }

    fn lock(&self) -> MutexGuard<'_, Campaign> {
        // a panicking handler leaves the campaign as it was before the
        // failed command, so the poison flag carries no information
        self.campaign.lock().unwrap_or_else(|e| e.into_inner())
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.to_string(),
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid", message)
    }
}

impl From<hitl_core::Error> for ApiError {
    fn from(e: hitl_core::Error) -> Self {
        let code = e.code();
        let status = match code {
            "not_found" => StatusCode::NOT_FOUND,
            "invalid_state" | "degenerate_labels" | "insufficient_data" | "integrity_error" => StatusCode::CONFLICT,
            "constraint_violation" | "infeasible" | "conditioning" | "degenerate_feature" => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            "io_error" => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "code": self.code, "message": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn check_version(headers: &HeaderMap, campaign: &Campaign) -> Result<(), ApiError> {
    let Some(v) = headers.get(VERSION_HEADER) else {
        return Ok(());
    };
    let expected: u64 = v
        .to_str()
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| ApiError::bad_request(format!("{VERSION_HEADER} must be an integer")))?;
    let current = campaign.state().version();
    if expected != current {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "version_conflict",
            format!("campaign is at version {current}, request was made against {expected}"),
        ));
    }
    Ok(())
}

/// Runs `f` on the blocking pool with the campaign locked.
async fn with_campaign<T, F>(app: &AppState, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut Campaign) -> Result<T, ApiError> + Send + 'static,
{
    let app = app.clone();
    tokio::task::spawn_blocking(move || f(&mut app.lock()))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/campaign", get(campaign_summary))
        .route("/phase", post(set_phase))
        .route("/records", get(list_records).post(ingest_record))
        .route("/records/import", post(import_csv))
        .route("/spaces", get(list_spaces).post(save_space))
        .route("/spaces/{id}/activate", post(activate_space))
        .route("/iterations", post(run_iteration))
        .route("/iterations/{i}/report", get(iteration_report))
        .route("/batches", get(list_batches))
        .route("/batches/manual", post(queue_manual))
        .route("/batches/{id}/candidates/{j}/review", post(review))
        .route("/batches/{id}/candidates/{j}/abandon", post(abandon))
        .route("/models/{iteration}/{target}/predict", get(predict).post(predict))
        .route("/analysis/{iteration}", get(analysis))
        .route("/boundary-plane", get(boundary_plane))
        .with_state(app)
}

#[derive(Serialize)]
struct Summary {
    version: u64,
    phase: Phase,
    iteration: usize,
    active_space: String,
    n_records: usize,
    n_batches: usize,
    open_candidates: Vec<CandidateRef>,
    has_both_classes: bool,
}

async fn campaign_summary(State(app): State<AppState>) -> ApiResult<Summary> {
    let c = app.lock();
    let s = c.state();
    Ok(Json(Summary {
        version: s.version(),
        phase: s.phase,
        iteration: s.iteration,
        active_space: s.active_space.clone(),
        n_records: s.records.len(),
        n_batches: s.batches.len(),
        open_candidates: s.open_candidates(),
        has_both_classes: s.has_both_classes(),
    }))
}

#[derive(Deserialize)]
struct PhaseBody {
    phase: Phase,
}

async fn set_phase(State(app): State<AppState>, headers: HeaderMap, Json(body): Json<PhaseBody>) -> ApiResult<Value> {
    let mut c = app.lock();
    check_version(&headers, &c)?;
    c.set_phase(body.phase)?;
    Ok(Json(json!({ "phase": body.phase, "version": c.state().version() })))
}

async fn list_records(State(app): State<AppState>) -> ApiResult<Vec<ExperimentRecord>> {
    Ok(Json(app.lock().state().records.clone()))
}

#[derive(Deserialize)]
struct IngestBody {
    record: ExperimentRecord,
    #[serde(default)]
    candidate: Option<CandidateRef>,
}

async fn ingest_record(
    State(app): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<IngestBody>,
) -> Result<(StatusCode, Json<ExperimentRecord>), ApiError> {
    let mut c = app.lock();
    check_version(&headers, &c)?;
    c.ingest(&body.record, body.candidate)?;
    let stored = c.state().records.last().cloned().expect("record just ingested");
    Ok((StatusCode::CREATED, Json(stored)))
}

async fn import_csv(State(app): State<AppState>, headers: HeaderMap, body: String) -> ApiResult<Value> {
    let records = load_dataset(body.as_bytes())?;
    let mut c = app.lock();
    check_version(&headers, &c)?;
    c.import_records(&records)?;
    Ok(Json(json!({ "imported": records.len(), "version": c.state().version() })))
}

async fn list_spaces(State(app): State<AppState>) -> ApiResult<Value> {
    let c = app.lock();
    let s = c.state();
    Ok(Json(json!({ "active": s.active_space, "spaces": s.spaces })))
}

#[derive(Deserialize)]
struct SpaceBody {
    spec: SurrogateSpaceSpec,
    #[serde(default)]
    activate: bool,
}

async fn save_space(
    State(app): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<SpaceBody>,
) -> Result<(StatusCode, Json<SurrogateSpaceSpec>), ApiError> {
    let mut c = app.lock();
    check_version(&headers, &c)?;
    let label = body.spec.label.clone();
    c.save_space(body.spec, body.activate)?;
    Ok((StatusCode::CREATED, Json(c.state().space(&label)?.clone())))
}

async fn activate_space(State(app): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult<Value> {
    let mut c = app.lock();
    check_version(&headers, &c)?;
    c.activate_space(&id)?;
    Ok(Json(json!({ "active": id, "version": c.state().version() })))
}

#[derive(Deserialize)]
struct IterationQuery {
    strategy: String,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize)]
struct IterationOutput {
    batch: CandidateBatch,
    report: IterationReport,
}

async fn run_iteration(
    State(app): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<IterationQuery>,
) -> Result<(StatusCode, Json<IterationOutput>), ApiError> {
    let strategy = Strategy::from_name(&q.strategy)
        .filter(|s| *s != Strategy::Manual)
        .ok_or_else(|| ApiError::bad_request(format!("unknown strategy `{}`; use pareto, walk, midpoint or ucb", q.strategy)))?;
    let out = with_campaign(&app, move |c| {
        check_version(&headers, c)?;
        let (batch, report) = c.run_iteration(strategy, q.seed)?;
        Ok(IterationOutput { batch, report })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(out)))
}

async fn iteration_report(State(app): State<AppState>, Path(i): Path<usize>) -> ApiResult<IterationReport> {
    Ok(Json(app.lock().state().iteration_record(i)?.report.clone()))
}

async fn list_batches(State(app): State<AppState>) -> ApiResult<Vec<CandidateBatch>> {
    Ok(Json(app.lock().state().batches.clone()))
}

#[derive(Deserialize)]
struct ReviewBody {
    decision: ReviewStatus,
    #[serde(default)]
    edited_point: Option<ConditionPoint>,
}

async fn review(
    State(app): State<AppState>,
    headers: HeaderMap,
    Path((id, j)): Path<(usize, usize)>,
    Json(body): Json<ReviewBody>,
) -> ApiResult<Value> {
    let mut c = app.lock();
    check_version(&headers, &c)?;
    let cref = CandidateRef {
        batch_id: id,
        candidate_id: j,
    };
    c.review(cref, body.decision, body.edited_point)?;
    Ok(Json(json!({ "candidate": c.state().candidate(cref)?, "version": c.state().version() })))
}

#[derive(Deserialize)]
struct AbandonBody {
    reason: String,
}

async fn abandon(
    State(app): State<AppState>,
    headers: HeaderMap,
    Path((id, j)): Path<(usize, usize)>,
    Json(body): Json<AbandonBody>,
) -> ApiResult<Value> {
    let mut c = app.lock();
    check_version(&headers, &c)?;
    c.abandon(
        CandidateRef {
            batch_id: id,
            candidate_id: j,
        },
        &body.reason,
    )?;
    Ok(Json(json!({ "version": c.state().version() })))
}

async fn queue_manual(
    State(app): State<AppState>,
    headers: HeaderMap,
    Json(point): Json<ConditionPoint>,
) -> Result<(StatusCode, Json<CandidateBatch>), ApiError> {
    let mut c = app.lock();
    check_version(&headers, &c)?;
    let r = c.queue_manual(point)?;
    Ok((StatusCode::CREATED, Json(c.state().batch(r.batch_id)?.clone())))
}

#[derive(Deserialize)]
struct PredictBody {
    points: Vec<ConditionPoint>,
}

async fn predict(
    State(app): State<AppState>,
    Path((iteration, target)): Path<(usize, String)>,
    Json(body): Json<PredictBody>,
) -> ApiResult<Vec<Prediction>> {
    let target = Target::from_name(&target).ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no model for target `{target}`")))?;
    let c = app.lock();
    Ok(Json(c.predict(iteration, target, &body.points)?))
}

async fn analysis(State(app): State<AppState>, Path(i): Path<usize>) -> ApiResult<Value> {
    let c = app.lock();
    let r = &c.state().iteration_record(i)?.report;
    Ok(Json(json!({
        "iteration": r.iteration,
        "source": r.analysis_source,
        "analysis": r.analysis,
        "flags": r.flags,
        "negative_predictions": r.negative_predictions,
    })))
}

#[derive(Deserialize)]
struct PlaneQuery {
    #[serde(default = "default_x")]
    x: String,
    #[serde(default = "default_y")]
    y: String,
    #[serde(default = "default_grid")]
    grid: usize,
    #[serde(default)]
    seed: u64,
}

fn default_x() -> String {
    Feature::InitMg.name().into()
}
fn default_y() -> String {
    Feature::TCold.name().into()
}
fn default_grid() -> usize {
    64
}

async fn boundary_plane(State(app): State<AppState>, Query(q): Query<PlaneQuery>) -> ApiResult<BoundaryPlane> {
    let feature = |n: &str| Feature::from_name(n).ok_or_else(|| ApiError::bad_request(format!("unknown feature `{n}`")));
    let (x, y) = (feature(&q.x)?, feature(&q.y)?);
    let plane = with_campaign(&app, move |c| Ok(c.boundary_plane(x, y, q.grid, q.seed)?)).await?;
    Ok(Json(plane))
}

pub async fn serve(campaign: Campaign, addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "serving campaign");
    axum::serve(listener, router(AppState::new(campaign))).await?;
    Ok(())
}
