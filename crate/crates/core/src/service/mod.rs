// SPDX-License-Identifier: MIT OR Apache-2.0

//! Session service: inspect a sample, rank its components, steer, compare.
//!
//! [`Service`] holds the loaded [`Workbench`] and the session map and
//! implements every endpoint as a plain method; [`http`] only adapts those
//! methods to axum. Sessions live in memory. When a history directory is
//! configured, every history entry is also appended to
//! `<history_dir>/<session_id>.jsonl`.

mod config;
mod error;
pub mod http;

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::engine::{
    self, ClassDelta, ClassSet, DosePoint, ImpactReport, Modification, Prediction, SteeringConfig,
};

pub use config::{Workbench, WorkbenchConfig};
pub use error::{ApiError, ErrorCode};

pub const DEFAULT_COMPONENT_LIMIT: usize = 50;
pub const DEFAULT_DOSE_STEPS: usize = 21;

pub type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleInfo {
    pub sample_id: String,
    pub asset_ref: Option<String>,
    pub true_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub timestamp_ms: u64,
    pub steering: Vec<Modification>,
    pub predicted: String,
    /// Probability of the session's target class after this change.
    pub target_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub sample_id: String,
    pub class_set: String,
    /// Class whose probability the history tracks; defaults to the initial
    /// prediction.
    pub target_class: String,
    pub steering: Vec<Modification>,
    pub history: Vec<HistoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session: Session,
    pub prediction: Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub sample_id: String,
    pub class_set: String,
    #[serde(default)]
    pub target_class: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRow {
    pub rank: usize,
    pub component: usize,
    pub activation: f64,
    pub attribution: f64,
    pub top_label: Option<String>,
    pub top_label_score: Option<f64>,
    pub dead: bool,
    pub exemplar_ids: Vec<String>,
    pub exemplar_asset_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentsView {
    pub session_id: String,
    pub target: String,
    pub logit: f64,
    pub rows: Vec<ComponentRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringRequest {
    pub modifications: Vec<Modification>,
}

/// `prediction_before` is always the unsteered baseline of the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringOutcome {
    pub session_id: String,
    pub steering: Vec<Modification>,
    pub prediction_before: Prediction,
    pub prediction_after: Prediction,
    pub per_class_deltas: Vec<ClassDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseCurve {
    pub session_id: String,
    pub component: usize,
    pub activation: f64,
    pub points: Vec<DosePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactRequest {
    pub eval_set: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactView {
    pub session_id: String,
    pub eval_set: String,
    pub steering: Vec<Modification>,
    #[serde(flatten)]
    pub report: ImpactReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkbenchInfo {
    pub dim_in: usize,
    pub dim_sae: usize,
    pub class_sets: Vec<String>,
    pub eval_sets: Vec<String>,
    pub score_mode: engine::ScoreMode,
    pub logit_scale: f64,
    pub k: usize,
}

struct SessionState {
    session: Session,
    steering: SteeringConfig,
    log: Option<File>,
}

pub struct Service {
    workbench: Arc<Workbench>,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionState>>>>,
    next_id: AtomicU64,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl Service {
    pub fn new(workbench: Workbench) -> Self {
        Self {
            workbench: Arc::new(workbench),
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn workbench(&self) -> &Workbench {
        &self.workbench
    }

    pub fn info(&self) -> WorkbenchInfo {
        let wb = &self.workbench;
        WorkbenchInfo {
            dim_in: wb.model.dim_in(),
            dim_sae: wb.model.dim_sae(),
            class_sets: wb.class_sets.keys().cloned().collect(),
            eval_sets: wb.eval_sets.keys().cloned().collect(),
            score_mode: wb.scoring.mode,
            logit_scale: wb.scoring.logit_scale,
            k: wb.k,
        }
    }

    pub fn list_samples(&self) -> Vec<SampleInfo> {
        let c = &self.workbench.inspection;
        (0..c.len())
            .map(|i| SampleInfo {
                sample_id: c.ids()[i].clone(),
                asset_ref: c.asset_refs().map(|r| r[i].clone()),
                true_label: c.labels().map(|l| l[i].clone()),
            })
            .collect()
    }

    fn sample(&self, sample_id: &str) -> ApiResult<&[f32]> {
        let c = &self.workbench.inspection;
        c.index_of(sample_id).map(|i| c.vector(i)).ok_or_else(|| {
            ApiError::new(ErrorCode::UnknownSample, format!("no sample {sample_id:?}"))
        })
    }

    fn class_set(&self, name: &str) -> ApiResult<&ClassSet> {
        self.workbench.class_sets.get(name).ok_or_else(|| {
            ApiError::new(ErrorCode::UnknownClassSet, format!("no class set {name:?}"))
        })
    }

    fn state(&self, session_id: &str) -> ApiResult<Arc<Mutex<SessionState>>> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(session_id)
            .cloned()
            .ok_or_else(|| {
                ApiError::new(
                    ErrorCode::UnknownSession,
                    format!("no session {session_id:?}"),
                )
            })
    }

    /// Runs `f` with the session locked; requests to one session serialize.
    fn with_session<T>(
        &self,
        session_id: &str,
        f: impl FnOnce(&mut SessionState) -> ApiResult<T>,
    ) -> ApiResult<T> {
        let state = self.state(session_id)?;
        let mut guard = state.lock().expect("session poisoned");
        f(&mut guard)
    }

    fn predict(&self, session: &Session, steering: &SteeringConfig) -> ApiResult<Prediction> {
        let wb = &self.workbench;
        let x = self.sample(&session.sample_id)?;
        let classes = self.class_set(&session.class_set)?;
        Ok(engine::predict(
            &wb.model, x, classes, steering, wb.scoring,
        )?)
    }

    pub fn create_session(&self, req: &CreateSession) -> ApiResult<SessionView> {
        let wb = &self.workbench;
        let x = self.sample(&req.sample_id)?;
        let classes = self.class_set(&req.class_set)?;
        let prediction =
            engine::predict(&wb.model, x, classes, &SteeringConfig::empty(), wb.scoring)?;
        let target_class = match &req.target_class {
            Some(t) if classes.index_of(t).is_none() => {
                return Err(ApiError::new(
                    ErrorCode::UnknownClass,
                    format!("no class {t:?}"),
                ))
            }
            Some(t) => t.clone(),
            None => prediction.predicted.clone(),
        };
        let session_id = format!("s{:06}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let log = match &wb.history_dir {
            Some(dir) => Some(open_log(dir, &session_id)?),
            None => None,
        };
        let session = Session {
            session_id: session_id.clone(),
            sample_id: req.sample_id.clone(),
            class_set: req.class_set.clone(),
            target_class,
            steering: Vec::new(),
            history: Vec::new(),
        };
        let state = SessionState {
            session: session.clone(),
            steering: SteeringConfig::empty(),
            log,
        };
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(session_id, Arc::new(Mutex::new(state)));
        tracing::info!(session = %session.session_id, sample = %session.sample_id, "session created");
        Ok(SessionView {
            session,
            prediction,
        })
    }

    pub fn get_session(&self, session_id: &str) -> ApiResult<SessionView> {
        self.with_session(session_id, |st| {
            Ok(SessionView {
                prediction: self.predict(&st.session, &st.steering)?,
                session: st.session.clone(),
            })
        })
    }

    pub fn components(
        &self,
        session_id: &str,
        target: Option<&str>,
        limit: Option<usize>,
    ) -> ApiResult<ComponentsView> {
        let wb = &self.workbench;
        self.with_session(session_id, |st| {
            let x = self.sample(&st.session.sample_id)?;
            let classes = self.class_set(&st.session.class_set)?;
            let attr = engine::attribute(&wb.model, x, classes, &st.steering, target, wb.scoring)?;
            let refs = wb.reference.asset_refs();
            let rows = attr
                .ranked()
                .take(limit.unwrap_or(DEFAULT_COMPONENT_LIMIT))
                .enumerate()
                .map(|(rank, c)| {
                    let card = &wb.cards[c.component];
                    let top = card.top_label();
                    ComponentRow {
                        rank: rank + 1,
                        component: c.component,
                        activation: c.activation,
                        attribution: c.attribution,
                        top_label: top.map(|l| l.label.clone()),
                        top_label_score: top.map(|l| l.score),
                        dead: card.dead,
                        exemplar_ids: card.exemplar_ids.clone(),
                        exemplar_asset_refs: refs
                            .map(|refs| {
                                card.exemplar_ids
                                    .iter()
                                    .filter_map(|id| {
                                        wb.reference.index_of(id).map(|i| refs[i].clone())
                                    })
                                    .collect()
                            })
                            .unwrap_or_default(),
                    }
                })
                .collect();
            Ok(ComponentsView {
                session_id: session_id.to_owned(),
                target: attr.target_class,
                logit: attr.logit,
                rows,
            })
        })
    }

    fn record(&self, st: &mut SessionState, steering: SteeringConfig) -> ApiResult<Prediction> {
        let after = self.predict(&st.session, &steering)?;
        let last = st.session.history.last().map_or(0, |h| h.timestamp_ms);
        let entry = HistoryEntry {
            timestamp_ms: now_ms().max(last),
            steering: steering.clone().into(),
            predicted: after.predicted.clone(),
            target_probability: after
                .probability_of(&st.session.target_class)
                .unwrap_or_default(),
        };
        if let Some(log) = st.log.as_mut() {
            append_log(log, &st.session.session_id, &entry)?;
        }
        st.session.steering = entry.steering.clone();
        st.session.history.push(entry);
        st.steering = steering;
        Ok(after)
    }

    /// Replaces the session's steering with `modifications` as a whole.
    pub fn apply_steering(
        &self,
        session_id: &str,
        modifications: &[Modification],
    ) -> ApiResult<SteeringOutcome> {
        let steering = SteeringConfig::try_from(modifications.to_vec())?;
        steering.validate_for(&self.workbench.model)?;
        self.with_session(session_id, |st| {
            let before = self.predict(&st.session, &SteeringConfig::empty())?;
            let after = self.record(st, steering)?;
            Ok(SteeringOutcome {
                session_id: session_id.to_owned(),
                steering: st.session.steering.clone(),
                per_class_deltas: before.deltas(&after),
                prediction_before: before,
                prediction_after: after,
            })
        })
    }

    pub fn reset_session(&self, session_id: &str) -> ApiResult<SessionView> {
        self.with_session(session_id, |st| {
            let prediction = self.record(st, SteeringConfig::empty())?;
            Ok(SessionView {
                session: st.session.clone(),
                prediction,
            })
        })
    }

    pub fn dose_response(
        &self,
        session_id: &str,
        component: usize,
        steps: Option<usize>,
    ) -> ApiResult<DoseCurve> {
        let wb = &self.workbench;
        let grid = engine::uniform_grid(steps.unwrap_or(DEFAULT_DOSE_STEPS))?;
        self.with_session(session_id, |st| {
            let x = self.sample(&st.session.sample_id)?;
            let classes = self.class_set(&st.session.class_set)?;
            let points =
                engine::dose_response(&wb.model, x, classes, component, &grid, wb.scoring)?;
            let activation = wb.model.activations(x).map_err(ApiError::from)?[component];
            Ok(DoseCurve {
                session_id: session_id.to_owned(),
                component,
                activation,
                points,
            })
        })
    }

    pub fn impact(&self, session_id: &str, eval_set: &str) -> ApiResult<ImpactView> {
        let wb = &self.workbench;
        let eval = wb.eval_sets.get(eval_set).ok_or_else(|| {
            ApiError::new(
                ErrorCode::UnknownEvalSet,
                format!("no evaluation set {eval_set:?}"),
            )
        })?;
        self.with_session(session_id, |st| {
            let classes = self.class_set(&st.session.class_set)?;
            let report = engine::global_impact(&wb.model, eval, classes, &st.steering, wb.scoring)?;
            Ok(ImpactView {
                session_id: session_id.to_owned(),
                eval_set: eval_set.to_owned(),
                steering: st.session.steering.clone(),
                report,
            })
        })
    }

    /// Bytes of an exemplar image under the asset directory.
    pub fn asset(&self, asset_ref: &str) -> ApiResult<(Vec<u8>, &'static str)> {
        let rel = Path::new(asset_ref);
        if asset_ref.is_empty() || rel.components().any(|c| !matches!(c, Component::Normal(_))) {
            return Err(ApiError::new(
                ErrorCode::PathTraversal,
                format!("asset reference {asset_ref:?} escapes the asset directory"),
            ));
        }
        let not_found = || ApiError::new(ErrorCode::NotFound, format!("no asset {asset_ref:?}"));
        let root = self
            .workbench
            .asset_dir
            .canonicalize()
            .map_err(|_| not_found())?;
        let full = root.join(rel).canonicalize().map_err(|_| not_found())?;
        if !full.starts_with(&root) {
            return Err(ApiError::new(
                ErrorCode::PathTraversal,
                format!("asset reference {asset_ref:?} escapes the asset directory"),
            ));
        }
        if !full.is_file() {
            return Err(not_found());
        }
        let bytes = std::fs::read(&full).map_err(|_| not_found())?;
        Ok((bytes, content_type(&full)))
    }
}

fn content_type(path: &Path) -> &'static str {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

fn open_log(dir: &Path, session_id: &str) -> ApiResult<File> {
    let path: PathBuf = dir.join(format!("{session_id}.jsonl"));
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| ApiError::new(ErrorCode::Internal, format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct LogLine<'a> {
    session_id: &'a str,
    #[serde(flatten)]
    entry: &'a HistoryEntry,
}

fn append_log(log: &mut File, session_id: &str, entry: &HistoryEntry) -> ApiResult<()> {
    let mut line = serde_json::to_vec(&LogLine { session_id, entry })
        .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))?;
    line.push(b'\n');
    log.write_all(&line)
        .and_then(|()| log.flush())
        .map_err(|e| ApiError::new(ErrorCode::Internal, format!("history log: {e}")))
}
