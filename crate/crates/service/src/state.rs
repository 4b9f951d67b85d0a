use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use openset_core::corpus::{load_feature_file, ClassLabel, FeatureVector, LabeledFeatureSet};
use openset_core::embed::{Extractor, ImageTensor};
use openset_core::head::{load_checkpoint, pools_by_class, save_checkpoint, ClassifierHead, HeadError, TrainConfig};
use openset_core::rng;
use openset_core::session::{Action, SessionEvent, SessionState};

use crate::config::{EngineConfig, LoadError};
use crate::error::ApiError;

/// One item of the session pool shown by `GET /world`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSample {
    pub id: usize,
    pub features: FeatureVector,
    /// Ground-truth name, when known.
    pub label: Option<String>,
}

/// Shared service state.
///
/// Lock order is session → head → pools; the retrain job takes them in the
/// same order when it publishes.
pub struct AppState {
    head: RwLock<Arc<ClassifierHead>>,
    session: Mutex<SessionState>,
    pools: Mutex<BTreeMap<u16, LabeledFeatureSet>>,
    job_running: AtomicBool,
    last_error: Mutex<Option<String>>,
    extractor: Option<Extractor>,
    world: Vec<WorldSample>,
    train: TrainConfig,
    report_path: Option<PathBuf>,
    checkpoint_out: Option<PathBuf>,
}

/// Who asked for a retrain; decides how completion is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum JobOrigin {
    Session,
    Direct,
}

impl AppState {
    /// State serving `head`, drawing negatives from `pools` (matched to the
    /// head's classes by name).
    pub fn new(head: ClassifierHead, pools: &LabeledFeatureSet, train: TrainConfig) -> Result<Self, HeadError> {
        train.validate()?;
        let pools = pools_by_class(&head, pools)?;
        Ok(Self {
            session: Mutex::new(SessionState::new(head.version())),
            head: RwLock::new(Arc::new(head)),
            pools: Mutex::new(pools),
            job_running: AtomicBool::new(false),
            last_error: Mutex::new(None),
            extractor: None,
            world: Vec::new(),
            train,
            report_path: None,
            checkpoint_out: None,
        })
    }

    pub fn with_world(mut self, world: Vec<WorldSample>) -> Self {
        self.world = world;
        self
    }

    /// World pool from a labeled feature file.
    pub fn with_world_set(self, set: &LabeledFeatureSet) -> Self {
        let world = (0..set.len())
            .map(|i| WorldSample {
                id: i,
                features: set.examples()[i].features.clone(),
                label: Some(set.label_name(i).to_string()),
            })
            .collect();
        self.with_world(world)
    }

    pub fn with_extractor(mut self, extractor: Extractor) -> Self {
        self.extractor = Some(extractor);
        self
    }

    pub fn with_report_path(mut self, path: PathBuf) -> Self {
        self.report_path = Some(path);
        self
    }

    pub fn with_checkpoint_out(mut self, path: PathBuf) -> Self {
        self.checkpoint_out = Some(path);
        self
    }

    pub fn from_config(cfg: &EngineConfig) -> Result<Self, LoadError> {
        let head = load_checkpoint(&cfg.head)?;
        let pools = load_feature_file(&cfg.pools)?;
        let mut state = Self::new(head, &pools, cfg.train.clone())?;
        if let Some(path) = &cfg.world {
            state = state.with_world_set(&load_feature_file(path)?);
        }
        if let Some(ec) = &cfg.extractor {
            state = state.with_extractor(Extractor::new(*ec)?);
        }
        if let Some(path) = &cfg.experiment_report {
            state = state.with_report_path(path.clone());
        }
        if let Some(path) = &cfg.checkpoint_out {
            state = state.with_checkpoint_out(path.clone());
        }
        Ok(state)
    }

    /// Current head snapshot.
    pub fn head(&self) -> Arc<ClassifierHead> {
        self.head.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn session(&self) -> SessionState {
        self.lock_session().clone()
    }

    pub fn job_running(&self) -> bool {
        self.job_running.load(Ordering::SeqCst)
    }

    pub fn last_error(&self) -> Option<String> {
        lock(&self.last_error).clone()
    }

    pub fn world(&self) -> &[WorldSample] {
        &self.world
    }

    pub fn report_path(&self) -> Option<&PathBuf> {
        self.report_path.as_ref()
    }

    pub(crate) fn lock_session(&self) -> MutexGuard<'_, SessionState> {
        lock(&self.session)
    }

    /// Resolves a `{features|image}` payload to a feature vector for the
    /// current head.
    pub(crate) fn features_of(
        &self,
        head: &ClassifierHead,
        features: Option<FeatureVector>,
        image: Option<ImageTensor>,
    ) -> Result<FeatureVector, ApiError> {
        let x = match (features, image) {
            (Some(x), None) => x,
            (None, Some(img)) => {
                let ex = self.extractor.as_ref().ok_or_else(|| {
                    ApiError::new(
                        axum::http::StatusCode::UNPROCESSABLE_ENTITY,
                        "no_extractor",
                        "image payloads need an extractor in the engine config",
                    )
                })?;
                head.check_source(Some(&ex.fingerprint()))?;
                ex.extract(&img)?
            }
            _ => return Err(ApiError::bad_request("exactly one of `features` or `image` is required")),
        };
        if x.len() != head.dim() {
            return Err(HeadError::DimensionMismatch { expected: head.dim(), found: x.len() }.into());
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ApiError::new(
                axum::http::StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_request",
                "features must be finite",
            ));
        }
        Ok(x)
    }

    /// Claims the single retrain slot.
    pub(crate) fn try_claim_job(&self) -> Result<(), ApiError> {
        self.job_running
            .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
            .map(|_| ())
            .map_err(|_| ApiError::conflict("retrain_in_progress", "a retrain job is already running"))
    }

    pub(crate) fn release_job(&self) {
        self.job_running.store(false, Ordering::SeqCst);
    }

    /// Runs incremental addition on a blocking thread. The caller must hold
    /// the job slot; it is released when the job ends.
    pub(crate) fn spawn_retrain(self: &Arc<Self>, name: String, samples: Vec<FeatureVector>, origin: JobOrigin) {
        *lock(&self.last_error) = None;
        let state = Arc::clone(self);
        tokio::task::spawn_blocking(move || {
            let outcome = state.retrain(&name, samples);
            state.finish_job(outcome, origin);
        });
    }

    fn retrain(&self, name: &str, samples: Vec<FeatureVector>) -> Result<(ClassifierHead, LabeledFeatureSet), String> {
        let head = self.head();
        let mut positives =
            LabeledFeatureSet::new(head.dim(), vec![ClassLabel { id: 0, name: name.to_string() }]).map_err(|e| e.to_string())?;
        for x in samples {
            positives.push(0, x).map_err(|e| e.to_string())?;
        }
        let pools = lock(&self.pools).clone();
        let cfg = TrainConfig { seed: rng::derive(self.train.seed, head.version()), ..self.train.clone() };
        let next = head.add_class(name, &positives, &pools, &cfg).map_err(|e| e.to_string())?;
        Ok((next, positives))
    }

    /// Publishes or discards the job result and frees the slot, all under the
    /// session lock so clients never see an idle session with a busy slot.
    fn finish_job(&self, outcome: Result<(ClassifierHead, LabeledFeatureSet), String>, origin: JobOrigin) {
        let mut session = self.lock_session();
        self.publish(&mut session, outcome, origin);
        self.release_job();
    }

    fn publish(
        &self,
        session: &mut SessionState,
        outcome: Result<(ClassifierHead, LabeledFeatureSet), String>,
        origin: JobOrigin,
    ) {
        let (next, positives) = match outcome {
            Ok(v) => v,
            Err(e) => {
                tracing::warn!("retrain failed: {e}");
                *lock(&self.last_error) = Some(e);
                if origin == JobOrigin::Session {
                    if let Ok((s, _)) = session.handle_event(SessionEvent::Abort) {
                        *session = s;
                    }
                }
                return;
            }
        };
        match origin {
            JobOrigin::Session => match session.handle_event(SessionEvent::RetrainDone) {
                Ok((s, actions)) => {
                    debug_assert!(actions.contains(&Action::PublishHead { version: next.version() }));
                    *session = s;
                }
                // The session was aborted while training; drop the result.
                Err(_) => return,
            },
            JobOrigin::Direct => session.head_version = next.version(),
        }
        if let Some(path) = &self.checkpoint_out {
            if let Err(e) = save_checkpoint(&next, path) {
                tracing::warn!("saving checkpoint failed: {e}");
                *lock(&self.last_error) = Some(format!("saving checkpoint: {e}"));
            }
        }
        let id = next.class_index(positives.classes()[0].name.as_str()).expect("class was just added");
        tracing::info!("published head version {}", next.version());
        *self.head.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(next);
        lock(&self.pools).insert(id, positives);
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}
