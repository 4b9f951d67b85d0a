use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use openset_core::corpus::FeatureVector;
use openset_core::embed::ImageTensor;
use openset_core::head::{ClassId, ClassifierHead};
use openset_core::session::{Phase, SessionEvent, SessionSnapshot};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ApiError;
use crate::state::{AppState, JobOrigin};

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/classes", get(classes))
        .route("/predict", post(predict))
        .route("/world", get(world))
        .route("/session", get(session))
        .route("/session/start", post(session_start))
        .route("/session/correct", post(session_correct))
        .route("/session/sample", post(session_sample))
        .route("/session/finish", post(session_finish))
        .route("/session/abort", post(session_abort))
        .route("/retrain", post(retrain))
        .route("/metrics/experiment", get(experiment_metrics))
        .with_state(state)
}

/// `{features: [...]}` or `{image: {...}}`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleInput {
    #[serde(default)]
    features: Option<FeatureVector>,
    #[serde(default)]
    image: Option<ImageTensor>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectInput {
    name: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrainInput {
    name: String,
    samples: Vec<SampleInput>,
}

#[derive(Debug, Serialize)]
pub struct ClassProbability {
    id: u16,
    name: String,
    probability: f64,
}

#[derive(Debug, Serialize)]
pub struct Prediction {
    class_id: u16,
    class_name: String,
    probability: f64,
    /// Indexed by class id.
    probabilities: Vec<f64>,
    /// Up to three most probable classes, most probable first.
    top: Vec<ClassProbability>,
    head_version: u64,
}

#[derive(Debug, Serialize)]
pub struct WorldItem {
    id: usize,
    label: Option<String>,
    correct: Option<bool>,
    /// Euclidean norm of the feature vector.
    norm: f64,
    #[serde(flatten)]
    prediction: Prediction,
}

#[derive(Debug, Serialize)]
pub struct WorldView {
    head_version: u64,
    session: SessionSnapshot,
    samples: Vec<WorldItem>,
}

#[derive(Debug, Serialize)]
pub struct SessionView {
    #[serde(flatten)]
    snapshot: SessionSnapshot,
    job_running: bool,
    last_error: Option<String>,
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    match payload {
        Ok(Json(v)) => Ok(v),
        Err(JsonRejection::JsonDataError(e)) => {
            Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", e.body_text()))
        }
        Err(e) => Err(ApiError::bad_request(e.body_text())),
    }
}

fn prediction(head: &ClassifierHead, x: &[f64]) -> Result<Prediction, ApiError> {
    let (id, probabilities) = head.predict(x)?;
    let name = |i: u16| head.class_name(i).unwrap_or_default().to_string();
    let mut order: Vec<usize> = (0..probabilities.len()).collect();
    order.sort_by(|&a, &b| probabilities[b].total_cmp(&probabilities[a]).then(a.cmp(&b)));
    let top = order
        .iter()
        .take(3)
        .map(|&i| ClassProbability { id: i as u16, name: name(i as u16), probability: probabilities[i] })
        .collect();
    Ok(Prediction {
        class_id: id,
        class_name: name(id),
        probability: probabilities[usize::from(id)],
        probabilities,
        top,
        head_version: head.version(),
    })
}

fn session_view(state: &AppState, snapshot: SessionSnapshot) -> SessionView {
    SessionView { snapshot, job_running: state.job_running(), last_error: state.last_error() }
}

async fn healthz(State(state): Shared) -> Json<Value> {
    let head = state.head();
    Json(serde_json::json!({
        "status": "ok",
        "head_version": head.version(),
        "classes": head.num_classes(),
    }))
}

async fn classes(State(state): Shared) -> Json<Vec<ClassId>> {
    Json(state.head().registry().to_vec())
}

async fn predict(State(state): Shared, payload: Result<Json<SampleInput>, JsonRejection>) -> ApiResult<Prediction> {
    let input = body(payload)?;
    let head = state.head();
    let x = state.features_of(&head, input.features, input.image)?;
    Ok(Json(prediction(&head, &x)?))
}

/// Predictions over the session pool. Moves a session that is enumerating
/// the world on to awaiting a correction.
async fn world(State(state): Shared) -> ApiResult<WorldView> {
    let snapshot = {
        let mut session = state.lock_session();
        if session.phase == Phase::EnumerateWorld {
            *session = session.handle_event(SessionEvent::RequestWorld)?.0;
        }
        session.snapshot()
    };
    let head = state.head();
    let samples = state
        .world()
        .iter()
        .map(|s| {
            let prediction = prediction(&head, &s.features)?;
            Ok(WorldItem {
                id: s.id,
                correct: s.label.as_ref().map(|l| *l == prediction.class_name),
                label: s.label.clone(),
                norm: s.features.iter().map(|v| v * v).sum::<f64>().sqrt(),
                prediction,
            })
        })
        .collect::<Result<_, ApiError>>()?;
    Ok(Json(WorldView { head_version: head.version(), session: snapshot, samples }))
}

async fn session(State(state): Shared) -> Json<SessionView> {
    let snapshot = state.lock_session().snapshot();
    Json(session_view(&state, snapshot))
}

/// Applies `event` to the session and returns the new view.
fn apply(state: &AppState, event: SessionEvent) -> ApiResult<SessionView> {
    let snapshot = {
        let mut session = state.lock_session();
        *session = session.handle_event(event)?.0;
        session.snapshot()
    };
    Ok(Json(session_view(state, snapshot)))
}

async fn session_start(State(state): Shared) -> ApiResult<SessionView> {
    if state.job_running() {
        return Err(ApiError::conflict("retrain_in_progress", "wait for the running retrain to finish"));
    }
    apply(&state, SessionEvent::StartSession)
}

async fn session_correct(
    State(state): Shared,
    payload: Result<Json<CorrectInput>, JsonRejection>,
) -> ApiResult<SessionView> {
    let input = body(payload)?;
    if state.head().class_index(&input.name).is_some() {
        return Err(ApiError::conflict("duplicate_class", format!("class {:?} already exists", input.name)));
    }
    apply(&state, SessionEvent::Correct(input.name))
}

async fn session_sample(
    State(state): Shared,
    payload: Result<Json<SampleInput>, JsonRejection>,
) -> ApiResult<SessionView> {
    let input = body(payload)?;
    let head = state.head();
    let x = state.features_of(&head, input.features, input.image)?;
    apply(&state, SessionEvent::AddSample(x))
}

/// Ends collection and starts the retrain job; poll `GET /session` until the
/// session is idle again.
async fn session_finish(State(state): Shared) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    state.try_claim_job()?;
    let mut session = state.lock_session();
    let (next, _) = match session.handle_event(SessionEvent::FinishCollection) {
        Ok(v) => v,
        Err(e) => {
            state.release_job();
            return Err(e.into());
        }
    };
    let class = next.pending_class.clone().expect("retraining has a pending class");
    let samples = next.collected.clone();
    *session = next;
    let snapshot = session.snapshot();
    state.spawn_retrain(class, samples, JobOrigin::Session);
    drop(session);
    Ok((StatusCode::ACCEPTED, Json(session_view(&state, snapshot))))
}

async fn session_abort(State(state): Shared) -> ApiResult<SessionView> {
    apply(&state, SessionEvent::Abort)
}

/// Adds a class outside a teaching session. Runs in the background like a
/// session retrain and conflicts with one.
async fn retrain(
    State(state): Shared,
    payload: Result<Json<RetrainInput>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let input = body(payload)?;
    let head = state.head();
    if input.name.trim().is_empty() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", "class name must not be empty"));
    }
    if head.class_index(&input.name).is_some() {
        return Err(ApiError::conflict("duplicate_class", format!("class {:?} already exists", input.name)));
    }
    if input.samples.is_empty() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", "no samples"));
    }
    let samples = input
        .samples
        .into_iter()
        .map(|s| state.features_of(&head, s.features, s.image))
        .collect::<Result<Vec<_>, _>>()?;

    state.try_claim_job()?;
    let session = state.lock_session();
    if session.phase != Phase::Idle {
        state.release_job();
        return Err(ApiError::conflict("session_active", "a teaching session is in progress"));
    }
    let snapshot = session.snapshot();
    state.spawn_retrain(input.name, samples, JobOrigin::Direct);
    drop(session);
    Ok((StatusCode::ACCEPTED, Json(session_view(&state, snapshot))))
}

async fn experiment_metrics(State(state): Shared) -> ApiResult<Value> {
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, "not_found", "no experiment report available");
    let path = state.report_path().ok_or_else(not_found)?.clone();
    let text = match tokio::fs::read_to_string(&path).await {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(not_found()),
        Err(e) => return Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "io", e.to_string())),
    };
    serde_json::from_str(&text)
        .map(Json)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "corrupt_report", e.to_string()))
}
