//! HTTP routes.

use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cometa_core::corpus::CorpusStore;
use cometa_core::pipeline::{self, BundleStore, PipelineConfig, Section};
use serde_json::json;
use tokio::sync::Semaphore;
use uuid::Uuid;

use crate::jobs::{JobRegistry, JobState};
use crate::problem::Problem;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone)]
pub struct AppState {
    pub corpora: CorpusStore,
    pub bundles: BundleStore,
    pub jobs: JobRegistry,
    workers: Arc<Semaphore>,
}

impl AppState {
    pub fn open(data_dir: &Path, workers: usize) -> anyhow::Result<Self> {
        let corpora = CorpusStore::open(data_dir)?;
        let bundles = BundleStore::open(data_dir)?;
        Ok(Self {
            corpora,
            bundles,
            jobs: JobRegistry::default(),
            workers: Arc::new(Semaphore::new(workers.max(1))),
        })
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/corpora", get(list_corpora))
        .route("/corpora/{id}/stats", get(corpus_stats))
        .route("/corpora/{id}/documents", post(ingest))
        .route("/analyses", post(submit))
        .route("/analyses/{id}", get(job_status))
        .route("/analyses/{id}/sections/{section}", get(section))
        .fallback(|| async { Problem::not_found("no such endpoint") })
        .with_state(state)
}

async fn blocking<T, F>(f: F) -> Result<T, Problem>
where
    F: FnOnce() -> Result<T, Problem> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| Problem::internal(format!("worker task failed: {e}")))?
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "version": VERSION }))
}

async fn list_corpora(State(state): State<AppState>) -> Result<Json<serde_json::Value>, Problem> {
    let ids = blocking(move || state.corpora.list_corpora().map_err(Problem::from)).await?;
    Ok(Json(json!({ "corpora": ids })))
}

async fn corpus_stats(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, Problem> {
    let stats = blocking(move || state.corpora.corpus_stats(&id).map_err(Problem::from)).await?;
    Ok(Json(stats).into_response())
}

async fn ingest(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Response, Problem> {
    let text = String::from_utf8(body.to_vec())
        .map_err(|_| Problem::bad_request("body is not valid UTF-8").at_stage("corpus"))?;
    let report = blocking(move || state.corpora.ingest_documents(&id, text.lines()).map_err(Problem::from)).await?;
    Ok(Json(report).into_response())
}

async fn submit(State(state): State<AppState>, body: Bytes) -> Result<Response, Problem> {
    let config: PipelineConfig =
        serde_json::from_slice(&body).map_err(|e| Problem::bad_request(format!("invalid pipeline config: {e}")))?;
    let id = state.jobs.submit(&config);
    log::info!("job {id} queued for corpus `{}`", config.corpus_id);
    tokio::spawn(execute(state, id, config));
    let location = format!("/analyses/{id}");
    Ok((
        StatusCode::ACCEPTED,
        [(header::LOCATION, location.clone())],
        Json(json!({ "job_id": id, "status_url": location })),
    )
        .into_response())
}

async fn execute(state: AppState, id: Uuid, config: PipelineConfig) {
    let Ok(_permit) = state.workers.clone().acquire_owned().await else {
        return;
    };
    let jobs = state.jobs.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        pipeline::run_pipeline(&state.corpora, &state.bundles, &config, |stage| {
            jobs.update(&id, JobState::Running { stage })
        })
    })
    .await;
    let next = match outcome {
        Ok(Ok(bundle)) => JobState::Done {
            bundle_id: bundle.bundle_id,
        },
        Ok(Err(e)) => {
            log::warn!("job {id} failed: {e}");
            JobState::Failed {
                stage: e.stage,
                message: e.message,
                retryable: e.retryable,
            }
        }
        Err(e) => JobState::Failed {
            stage: pipeline::Stage::Persist,
            message: format!("worker task failed: {e}"),
            retryable: false,
        },
    };
    state.jobs.update(&id, next);
}

/// A job id resolves through the registry; a bundle id resolves straight to
/// the store, so results stay reachable after a restart.
fn resolve(state: &AppState, id: &str) -> Result<serde_json::Value, Problem> {
    if let Ok(uuid) = Uuid::parse_str(id) {
        if let Some(job) = state.jobs.get(&uuid) {
            return Ok(serde_json::to_value(job).expect("job serializes"));
        }
    } else if state.bundles.contains(id) {
        return Ok(json!({ "id": id, "state": "done", "bundle_id": id }));
    }
    Err(Problem::not_found(format!("unknown analysis `{id}`")))
}

fn finished_bundle_id(status: &serde_json::Value) -> Option<&str> {
    (status["state"] == "done")
        .then(|| status["bundle_id"].as_str())
        .flatten()
}

async fn job_status(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, Problem> {
    blocking(move || {
        let mut status = resolve(&state, &id)?;
        if let Some(bundle_id) = finished_bundle_id(&status).map(str::to_string) {
            let bundle = state.bundles.load(&bundle_id).map_err(Problem::from)?;
            status["bundle"] = serde_json::to_value(bundle).expect("bundle serializes");
        }
        Ok(Json(status).into_response())
    })
    .await
}

async fn section(
    State(state): State<AppState>,
    UrlPath((id, name)): UrlPath<(String, String)>,
) -> Result<Response, Problem> {
    let section: Section = name.parse().map_err(Problem::not_found)?;
    blocking(move || {
        let status = resolve(&state, &id)?;
        let Some(bundle_id) = finished_bundle_id(&status) else {
            let mut p = Problem::new(StatusCode::CONFLICT, format!("analysis `{id}` has not finished"));
            if status["state"] == "failed" {
                p.stage = status["stage"].as_str().map(str::to_string);
                p.detail = status["message"].as_str().unwrap_or_default().to_string();
            }
            return Err(p);
        };
        let bundle = state.bundles.load(bundle_id).map_err(Problem::from)?;
        Ok(Json(bundle.section(section)).into_response())
    })
    .await
}
