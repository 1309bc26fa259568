//! JSON-over-HTTP service: dataset registry, estimate paths, tail
//! estimates, goodness of fit and asynchronous simulation jobs.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use tailforge_core::{
    ingest_csv, run_experiment, Column, CurveSet, Dataset, ExperimentSpec, IngestOptions, Sample, TailError,
};

use crate::docs::{gof_doc, path_doc, tail_doc, Document, FitQuery, GofQuery};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("unknown {what} '{id}'"))
    }
}

impl From<TailError> for ApiError {
    fn from(e: TailError) -> Self {
        let (status, code) = match &e {
            TailError::InvalidParameter(_) => (StatusCode::BAD_REQUEST, "invalid_parameter"),
            TailError::OutOfRange(_) => (StatusCode::BAD_REQUEST, "out_of_range"),
            TailError::Parse { .. } => (StatusCode::BAD_REQUEST, "parse_error"),
            TailError::InsufficientData(_) => (StatusCode::UNPROCESSABLE_ENTITY, "insufficient_data"),
            TailError::Degenerate(_) => (StatusCode::UNPROCESSABLE_ENTITY, "degenerate"),
            TailError::Infeasible(_) => (StatusCode::UNPROCESSABLE_ENTITY, "infeasible"),
            TailError::NotApplicable(_) => (StatusCode::UNPROCESSABLE_ENTITY, "not_applicable"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_query", e.body_text())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_body", e.body_text())
    }
}

#[derive(Serialize)]
struct ErrorDoc {
    error: ErrorBody,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Document::new(ErrorDoc { error: ErrorBody { code: self.code.into(), message: self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<Document<T>>, ApiError>;

fn ok<T>(body: T) -> ApiResult<T> {
    Ok(Json(Document::new(body)))
}

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done { result: CurveSet },
    Failed { error: ErrorBody },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobDoc {
    pub id: String,
    #[serde(flatten)]
    pub state: JobState,
}

pub struct AppState {
    datasets: RwLock<BTreeMap<String, Arc<Dataset>>>,
    jobs: Mutex<Vec<JobState>>,
    slots: Arc<Semaphore>,
}

impl AppState {
    /// `max_jobs` simulations run at once; later ones wait in the queue.
    pub fn new(max_jobs: usize) -> Self {
        Self {
            datasets: RwLock::new(BTreeMap::new()),
            jobs: Mutex::new(Vec::new()),
            slots: Arc::new(Semaphore::new(max_jobs.max(1))),
        }
    }

    /// Adds a dataset; fails when the id is taken.
    pub fn register(&self, ds: Dataset) -> Result<Arc<Dataset>, ApiError> {
        let mut map = self.datasets.write().expect("registry lock");
        if map.contains_key(&ds.id) {
            return Err(ApiError::new(StatusCode::CONFLICT, "duplicate_id", format!("dataset '{}' already exists", ds.id)));
        }
        let ds = Arc::new(ds);
        map.insert(ds.id.clone(), ds.clone());
        Ok(ds)
    }

    fn dataset(&self, id: &str) -> Result<Arc<Dataset>, ApiError> {
        self.datasets.read().expect("registry lock").get(id).cloned().ok_or_else(|| ApiError::not_found("dataset", id))
    }

    fn set_job(&self, i: usize, s: JobState) {
        self.jobs.lock().expect("job lock")[i] = s;
    }
}

/// Synthetic heavy-tailed demo data: 500 draws from Burr(1, 2) scaled by
/// 1000, fixed seed.
pub fn demo_dataset() -> Dataset {
    let s = tailforge_core::DistributionSpec::burr(1.0, 2.0).expect("valid").sample(500, 2024).expect("sample");
    let sample = s.scaled(1000.0);
    let text: String = sample.values().iter().map(|v| format!("{v:?}\n")).collect();
    Dataset {
        id: "demo".into(),
        name: "synthetic Burr(1,2) claims".into(),
        sample,
        checksum: tailforge_core::dataset::checksum(text.as_bytes()),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/datasets", post(upload).get(list))
        .route("/datasets/{id}", get(show))
        .route("/datasets/{id}/path", get(path))
        .route("/datasets/{id}/tail", get(tail))
        .route("/datasets/{id}/gof", get(gof))
        .route("/simulate", post(simulate))
        .route("/jobs/{id}", get(job))
        .with_state(state)
}

// ---------------------------------------------------------------------------
// Handlers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub id: String,
    pub name: String,
    pub n: usize,
    pub checksum: String,
    pub min: f64,
    pub max: f64,
}

impl From<&Dataset> for DatasetSummary {
    fn from(d: &Dataset) -> Self {
        Self {
            id: d.id.clone(),
            name: d.name.clone(),
            n: d.sample.len(),
            checksum: d.checksum.clone(),
            min: d.sample.min(),
            max: d.sample.max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadDoc {
    pub dataset: DatasetSummary,
    pub rows: usize,
    pub rejected: Vec<usize>,
}

#[derive(Debug, Default, Deserialize)]
struct UploadQuery {
    id: Option<String>,
    name: Option<String>,
    /// Column index (0-based) or header name.
    column: Option<String>,
    header: Option<bool>,
}

async fn upload(
    State(st): State<Arc<AppState>>,
    q: Result<Query<UploadQuery>, QueryRejection>,
    body: Bytes,
) -> ApiResult<UploadDoc> {
    let Query(q) = q?;
    let column = match q.column {
        None => Column::default(),
        Some(c) => c.parse::<usize>().map(Column::Index).unwrap_or(Column::Name(c)),
    };
    let opts = IngestOptions { column, header: q.header, id: q.id, name: q.name };
    let rep = ingest_csv(&body, &opts)?;
    let ds = st.register(rep.dataset)?;
    ok(UploadDoc { dataset: DatasetSummary::from(ds.as_ref()), rows: rep.rows, rejected: rep.rejected })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetList {
    pub datasets: Vec<DatasetSummary>,
}

async fn list(State(st): State<Arc<AppState>>) -> ApiResult<DatasetList> {
    let map = st.datasets.read().expect("registry lock");
    ok(DatasetList { datasets: map.values().map(|d| DatasetSummary::from(d.as_ref())).collect() })
}

async fn show(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<DatasetSummary> {
    let ds = st.dataset(&id)?;
    ok(DatasetSummary::from(ds.as_ref()))
}

/// Runs a CPU-bound computation off the async workers.
async fn compute<T: Send + 'static>(
    st: &AppState,
    id: &str,
    f: impl FnOnce(&Sample) -> tailforge_core::Result<T> + Send + 'static,
) -> Result<T, ApiError> {
    let ds = st.dataset(id)?;
    tokio::task::spawn_blocking(move || f(&ds.sample))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

async fn path(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    q: Result<Query<FitQuery>, QueryRejection>,
) -> ApiResult<crate::docs::PathDoc> {
    let Query(q) = q?;
    ok(compute(&st, &id, move |s| path_doc(s, &q)).await?)
}

async fn tail(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    q: Result<Query<FitQuery>, QueryRejection>,
) -> ApiResult<crate::docs::TailDoc> {
    let Query(q) = q?;
    ok(compute(&st, &id, move |s| tail_doc(s, &q)).await?)
}

async fn gof(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    q: Result<Query<GofQuery>, QueryRejection>,
) -> ApiResult<crate::docs::GofDoc> {
    let Query(q) = q?;
    ok(compute(&st, &id, move |s| gof_doc(s, &q)).await?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobCreated {
    pub id: String,
}

async fn simulate(
    State(st): State<Arc<AppState>>,
    spec: Result<Json<ExperimentSpec>, JsonRejection>,
) -> Result<(StatusCode, Json<Document<JobCreated>>), ApiError> {
    let Json(spec) = spec?;
    spec.validate()?;
    let index = {
        let mut jobs = st.jobs.lock().expect("job lock");
        jobs.push(JobState::Queued);
        jobs.len() - 1
    };
    let worker = st.clone();
    tokio::spawn(async move {
        let _permit = worker.slots.clone().acquire_owned().await.expect("semaphore open");
        worker.set_job(index, JobState::Running);
        let out = tokio::task::spawn_blocking(move || run_experiment(&spec)).await;
        let state = match out {
            Ok(Ok(result)) => JobState::Done { result },
            Ok(Err(e)) => {
                let e = ApiError::from(e);
                JobState::Failed { error: ErrorBody { code: e.code.into(), message: e.message } }
            }
            Err(e) => JobState::Failed { error: ErrorBody { code: "internal".into(), message: e.to_string() } },
        };
        worker.set_job(index, state);
    });
    Ok((StatusCode::ACCEPTED, Json(Document::new(JobCreated { id: format!("job-{index}") }))))
}

async fn job(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<JobDoc> {
    let index = id.strip_prefix("job-").and_then(|s| s.parse::<usize>().ok());
    let jobs = st.jobs.lock().expect("job lock");
    let state = index.and_then(|i| jobs.get(i)).cloned().ok_or_else(|| ApiError::not_found("job", &id))?;
    ok(JobDoc { id, state })
}
