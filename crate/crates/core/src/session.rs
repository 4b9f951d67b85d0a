//! Teaching-session state machine.
//!
//! ```text
//! Idle ──StartSession──▶ EnumerateWorld ──RequestWorld──▶ AwaitCorrection
//!   ▲                                                        │ Correct(name)
//!   │                                                        ▼
//!   └──RetrainDone── Retraining ◀──FinishCollection── Collecting ⟲ AddSample
//! ```
//!
//! `Abort` returns to `Idle` from every state and discards pending data.
//! The machine is pure: side effects are returned as [`Action`]s for the
//! caller to perform.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    EnumerateWorld,
    AwaitCorrection,
    Collecting,
    Retraining,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Idle,
        Phase::EnumerateWorld,
        Phase::AwaitCorrection,
        Phase::Collecting,
        Phase::Retraining,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionEvent {
    StartSession,
    RequestWorld,
    Correct(String),
    AddSample(FeatureVector),
    FinishCollection,
    RetrainDone,
    Abort,
}

/// Payload-free discriminant of a [`SessionEvent`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    StartSession,
    RequestWorld,
    Correct,
    AddSample,
    FinishCollection,
    RetrainDone,
    Abort,
}

impl SessionEvent {
    pub fn kind(&self) -> EventKind {
        match self {
            SessionEvent::StartSession => EventKind::StartSession,
            SessionEvent::RequestWorld => EventKind::RequestWorld,
            SessionEvent::Correct(_) => EventKind::Correct,
            SessionEvent::AddSample(_) => EventKind::AddSample,
            SessionEvent::FinishCollection => EventKind::FinishCollection,
            SessionEvent::RetrainDone => EventKind::RetrainDone,
            SessionEvent::Abort => EventKind::Abort,
        }
    }
}

/// Side effect requested by a transition.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Report current predictions over the session's world pool.
    EmitWorld,
    RegisterPendingClass(String),
    SampleStored { count: usize },
    /// Run incremental addition of `class` from `samples`.
    StartRetrain { class: String, samples: Vec<FeatureVector> },
    PublishHead { version: u64 },
    Cleared,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("rejected transition: {event:?} in state {state:?} ({reason})")]
pub struct RejectedTransition {
    pub state: Phase,
    pub event: EventKind,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub phase: Phase,
    pub pending_class: Option<String>,
    pub collected: Vec<FeatureVector>,
    pub head_version: u64,
}

/// Serializable view of a session, without sample payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub state: Phase,
    pub pending_class: Option<String>,
    pub collected: usize,
    pub head_version: u64,
}

impl SessionState {
    pub fn new(head_version: u64) -> Self {
        Self { phase: Phase::Idle, pending_class: None, collected: Vec::new(), head_version }
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            state: self.phase,
            pending_class: self.pending_class.clone(),
            collected: self.collected.len(),
            head_version: self.head_version,
        }
    }

    /// Checks the per-state invariants.
    pub fn check_invariants(&self) -> Result<(), &'static str> {
        match self.phase {
            Phase::Collecting if self.pending_class.is_none() => Err("collecting without a pending class"),
            Phase::Retraining if self.pending_class.is_none() => Err("retraining without a pending class"),
            Phase::Retraining if self.collected.is_empty() => Err("retraining with no samples"),
            Phase::Idle | Phase::EnumerateWorld | Phase::AwaitCorrection
                if self.pending_class.is_some() || !self.collected.is_empty() =>
            {
                Err("pending data outside collection")
            }
            _ => Ok(()),
        }
    }

    pub fn handle_event(&self, event: SessionEvent) -> Result<(SessionState, Vec<Action>), RejectedTransition> {
        let reject = |reason| RejectedTransition { state: self.phase, event: event.kind(), reason };
        let mut next = self.clone();
        let actions = match (self.phase, &event) {
            (_, SessionEvent::Abort) => {
                next = SessionState::new(self.head_version);
                vec![Action::Cleared]
            }
            (Phase::Idle, SessionEvent::StartSession) => {
                next.phase = Phase::EnumerateWorld;
                vec![]
            }
            (Phase::EnumerateWorld, SessionEvent::RequestWorld) => {
                next.phase = Phase::AwaitCorrection;
                vec![Action::EmitWorld]
            }
            (Phase::AwaitCorrection, SessionEvent::Correct(name)) => {
                if name.trim().is_empty() {
                    return Err(reject("class name must not be empty"));
                }
                next.phase = Phase::Collecting;
                next.pending_class = Some(name.clone());
                vec![Action::RegisterPendingClass(name.clone())]
            }
            (Phase::Collecting, SessionEvent::AddSample(x)) => {
                if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
                    return Err(reject("sample must be a non-empty finite vector"));
                }
                next.collected.push(x.clone());
                vec![Action::SampleStored { count: next.collected.len() }]
            }
            (Phase::Collecting, SessionEvent::FinishCollection) => {
                if self.collected.is_empty() {
                    return Err(reject("no samples collected"));
                }
                next.phase = Phase::Retraining;
                vec![Action::StartRetrain {
                    class: self.pending_class.clone().expect("collecting has a pending class"),
                    samples: self.collected.clone(),
                }]
            }
            (Phase::Retraining, SessionEvent::RetrainDone) => {
                next = SessionState::new(self.head_version + 1);
                vec![Action::PublishHead { version: next.head_version }]
            }
            _ => return Err(reject("event not allowed in this state")),
        };
        Ok((next, actions))
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}
