//! Request handling shared by the HTTP service and the CLI.

use std::collections::BTreeMap;
use std::fs;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use crowdgen_core::aggregate::{aggregate_with, top_per_aspect, AggregatedRecommendation};
use crowdgen_core::catalog::catalog;
use crowdgen_core::imaging::{self, samples, ImageBuffer, OpKind};
use crowdgen_core::reasoning::{Backend, ChatBackend, LlmConfig, ReasonerConfig, Transcript};
use crowdgen_core::study::{
    analysis_csv, analyze, plan_study_with, simulate_raters, ComparisonPair, ComparisonRecord, Grouping, RaterModel,
    StudyPlan, TaskSets,
};
use crowdgen_core::widgets::{generate_spec, generate_unscored_spec, resolve_binding_task, ParamBinding, WidgetSpec};
use crowdgen_core::{aggregate_frequencies, parse_widget_name, Aspect, LibraryMode, PreferenceLibrary, PreferenceResponse, TaskContext};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::EngineConfig;
use crate::error::ServiceError;
use crate::store::{image_handle, ImageStore, LibraryStore, SessionStore, StudyStore};

/// `"oracle"`, `"llm"` (configured LLM settings), or a full backend object.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BackendChoice {
    Name(String),
    Full(Backend),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReasonRequest {
    pub task: TaskContext,
    #[serde(default)]
    pub library_mode: Option<LibraryMode>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub backend: Option<BackendChoice>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub subset_seed: Option<u64>,
    #[serde(default)]
    pub session_id: Option<String>,
}

/// Explicit kinds, or `"top-per-aspect"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum KindSelection {
    Kinds(Vec<String>),
    Named(String),
}

impl Default for KindSelection {
    fn default() -> Self {
        KindSelection::Kinds(Vec::new())
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidgetsRequest {
    #[serde(default)]
    pub task: Option<TaskContext>,
    #[serde(default)]
    pub session_id: Option<String>,
    #[serde(default)]
    pub kinds: KindSelection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplyRequest {
    #[serde(default)]
    pub session_id: Option<String>,
    #[serde(default)]
    pub image_handle: Option<String>,
    #[serde(default)]
    pub image_png_base64: Option<String>,
    #[serde(default)]
    pub op: Option<OpKind>,
    /// With `value`, an alternative to `op`: the op a widget value selects.
    #[serde(default)]
    pub binding: Option<ParamBinding>,
    #[serde(default)]
    pub value: Option<Value>,
    #[serde(default)]
    pub spec_id: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRequest {
    #[serde(default)]
    pub task: Option<TaskContext>,
    #[serde(default)]
    pub image_handle: Option<String>,
    #[serde(default)]
    pub image_png_base64: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseRequest {
    pub task: String,
    pub aspect: String,
    pub widget: String,
    pub reason: String,
    pub rater_id: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRequest {
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub task_set: Option<u8>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistoryEntry {
    pub seq: usize,
    pub action: String,
    pub request: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recommendations: Option<Value>,
    pub chosen_spec_ids: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub op: Option<OpKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_handle: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Session {
    pub session_id: String,
    pub task: Option<TaskContext>,
    pub binding_task: Option<String>,
    pub original_image: String,
    pub image_handle: String,
    pub history: Vec<HistoryEntry>,
    #[serde(skip)]
    pub recommendations: Option<BTreeMap<Aspect, AggregatedRecommendation>>,
}

impl Session {
    fn push(&mut self, action: &str, request: Value) -> &mut HistoryEntry {
        self.history.push(HistoryEntry {
            seq: self.history.len(),
            action: action.to_string(),
            request,
            recommendations: None,
            chosen_spec_ids: Vec::new(),
            op: None,
            image_handle: None,
        });
        self.history.last_mut().expect("pushed")
    }

    pub fn applied_ops(&self) -> Vec<OpKind> {
        self.history.iter().filter_map(|h| h.op.clone()).collect()
    }
}

pub struct ApplyResult {
    pub handle: String,
    pub image: ImageBuffer,
}

impl ApplyResult {
    pub fn to_json(&self) -> Value {
        json!({
            "image_handle": self.handle,
            "width": self.image.width(),
            "height": self.image.height(),
            "image_png_base64": B64.encode(self.image.encode_png()),
        })
    }
}

pub fn parse_json<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(bytes).map_err(|e| ServiceError::Validation(format!("malformed request: {e}")))
}

fn decode_png_b64(b64: &str) -> Result<ImageBuffer, ServiceError> {
    let bytes = B64
        .decode(b64.trim())
        .map_err(|e| ServiceError::Validation(format!("image_png_base64: {e}")))?;
    Ok(ImageBuffer::decode_png(&bytes)?)
}

pub struct Engine {
    pub config: EngineConfig,
    pub library: LibraryStore,
    pub images: ImageStore,
    pub study: StudyStore,
    pub sessions: SessionStore,
    chat: Option<Arc<dyn ChatBackend>>,
    transcript: Option<Transcript>,
}

impl Engine {
    pub fn open(config: EngineConfig) -> Result<Self, ServiceError> {
        config.validate()?;
        fs::create_dir_all(&config.data_dir)
            .map_err(|e| ServiceError::Io(format!("data dir {}: {e}", config.data_dir.display())))?;
        let library = LibraryStore::open(&config.data_dir, config.library_path.as_deref())?;
        let images = ImageStore::open(config.data_dir.join("images"))?;
        let study = StudyStore::open(&config.data_dir)?;
        let transcript = Transcript::create(&config.data_dir.join("transcripts.jsonl")).ok();
        Ok(Engine {
            config,
            library,
            images,
            study,
            sessions: SessionStore::default(),
            chat: None,
            transcript,
        })
    }

    /// Routes LLM calls through `backend` instead of HTTP.
    pub fn with_chat_backend(mut self, backend: Arc<dyn ChatBackend>) -> Self {
        self.chat = Some(backend);
        self
    }

    fn backend(&self, choice: Option<&BackendChoice>) -> Result<Backend, ServiceError> {
        let configured_llm = || match &self.config.reasoner {
            Backend::Llm(c) => c.clone(),
            Backend::Oracle => LlmConfig::default(),
        };
        match choice {
            None => Ok(self.config.reasoner.clone()),
            Some(BackendChoice::Full(b)) => Ok(b.clone()),
            Some(BackendChoice::Name(n)) => match n.as_str() {
                "oracle" => Ok(Backend::Oracle),
                "llm" => Ok(Backend::Llm(configured_llm())),
                other => Err(ServiceError::Validation(format!("unknown backend {other:?}; expected oracle or llm"))),
            },
        }
    }

    fn reasoner_config(&self, req: &ReasonRequest) -> Result<ReasonerConfig, ServiceError> {
        Ok(ReasonerConfig {
            backend: self.backend(req.backend.as_ref())?,
            library_mode: req.library_mode.unwrap_or(self.config.library_mode),
            seed: req.seed.unwrap_or(self.config.seed),
            subset_seed: req.subset_seed.unwrap_or(self.config.subset_seed),
        })
    }

    /// Aggregated recommendations per aspect, with scores out of 10.
    pub fn reason(&self, req: &ReasonRequest) -> Result<Value, ServiceError> {
        let k = req.k.unwrap_or(self.config.k);
        if k == 0 {
            return Err(ServiceError::Validation("k must be at least 1".into()));
        }
        if let Some(id) = &req.session_id {
            self.sessions.get(id)?;
        }
        let rc = self.reasoner_config(req)?;
        let lib = self.library.snapshot();
        let binding_task = resolve_binding_task(&req.task, &lib)?;
        let recs = aggregate_with(&req.task, &lib, &rc, k, self.chat.as_deref(), self.transcript.as_ref())?;
        let payload = reason_payload(&req.task, &binding_task, &rc, k, &recs);
        if let Some(id) = &req.session_id {
            self.sessions.update(id, |s| {
                s.task = Some(req.task.clone());
                s.binding_task = Some(binding_task.clone());
                s.recommendations = Some(recs.clone());
                let request = json!({ "task": req.task, "library_mode": rc.library_mode, "k": k, "seed": rc.seed });
                s.push("reason", request).recommendations = Some(payload["recommendations"].clone());
                Ok(())
            })?;
        }
        Ok(payload)
    }

    /// Widget specs for chosen kinds or the top widget per aspect.
    pub fn widgets(&self, req: &WidgetsRequest) -> Result<Value, ServiceError> {
        let session = req.session_id.as_deref().map(|id| self.sessions.get(id)).transpose()?;
        let binding_task = match (&req.task, &session) {
            (Some(t), _) => resolve_binding_task(t, &self.library.snapshot())?,
            (None, Some(s)) => s
                .binding_task
                .clone()
                .ok_or_else(|| ServiceError::Validation("session has no task yet; call /v1/reason first".into()))?,
            (None, None) => return Err(ServiceError::Validation("request needs a task or a session_id".into())),
        };
        let recs = session.as_ref().and_then(|s| s.recommendations.clone());
        let kinds = match &req.kinds {
            KindSelection::Named(n) if n == "top-per-aspect" => None,
            KindSelection::Named(n) => {
                return Err(ServiceError::Validation(format!("kinds must be a list or \"top-per-aspect\", got {n:?}")))
            }
            KindSelection::Kinds(k) if k.is_empty() => None,
            KindSelection::Kinds(k) => Some(
                k.iter()
                    .map(|n| parse_widget_name(n).map_err(|e| ServiceError::Validation(e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        };
        let specs: Vec<WidgetSpec> = match kinds {
            None => {
                let recs = recs.as_ref().ok_or_else(|| {
                    ServiceError::Validation("no recommendations to choose from; give kinds or reason in a session first".into())
                })?;
                top_per_aspect(recs)
                    .into_iter()
                    .map(|(aspect, kind)| generate_spec(&binding_task, kind, &recs[&aspect]))
                    .collect::<Result<_, _>>()?
            }
            Some(kinds) => kinds
                .into_iter()
                .map(|kind| {
                    let best = recs.as_ref().and_then(|r| {
                        r.values()
                            .filter(|rec| rec.scores.contains_key(&kind))
                            .max_by_key(|rec| (rec.scores[&kind], std::cmp::Reverse(rec.aspect)))
                    });
                    match best {
                        Some(rec) => generate_spec(&binding_task, kind, rec),
                        None => generate_unscored_spec(&binding_task, kind),
                    }
                })
                .collect::<Result<_, _>>()?,
        };
        if let Some(id) = &req.session_id {
            self.sessions.update(id, |s| {
                let kinds = match &req.kinds {
                    KindSelection::Kinds(k) => json!(k),
                    KindSelection::Named(n) => json!(n),
                };
                s.push("widgets", json!({ "kinds": kinds })).chosen_spec_ids = specs.iter().map(|x| x.id.clone()).collect();
                Ok(())
            })?;
        }
        Ok(json!({ "binding_task": binding_task, "specs": specs }))
    }

    pub fn create_session(&self, req: &SessionRequest) -> Result<Session, ServiceError> {
        let img = match (&req.image_handle, &req.image_png_base64) {
            (Some(_), Some(_)) => {
                return Err(ServiceError::Validation("give image_handle or image_png_base64, not both".into()))
            }
            (Some(h), None) => self.images.get(h)?,
            (None, Some(b)) => decode_png_b64(b)?,
            (None, None) => samples::photo_like(),
        };
        let handle = self.images.put(&img)?;
        let binding_task = req
            .task
            .as_ref()
            .map(|t| resolve_binding_task(t, &self.library.snapshot()))
            .transpose()?;
        Ok(self.sessions.insert(|id| Session {
            session_id: id,
            task: req.task.clone(),
            binding_task: binding_task.clone(),
            original_image: handle.clone(),
            image_handle: handle.clone(),
            history: Vec::new(),
            recommendations: None,
        }))
    }

    /// Applies one op to a session image, a stored handle, or an inline PNG.
    pub fn apply(&self, req: &ApplyRequest) -> Result<ApplyResult, ServiceError> {
        let op = match (&req.op, &req.binding, &req.value) {
            (Some(op), None, None) => op.clone(),
            (None, Some(b), Some(v)) => b.op_for(v).map_err(|e| ServiceError::Validation(e.to_string()))?,
            _ => return Err(ServiceError::Validation("give op, or binding and value".into())),
        };
        let sources = [req.session_id.is_some(), req.image_handle.is_some(), req.image_png_base64.is_some()];
        if sources.iter().filter(|x| **x).count() != 1 {
            return Err(ServiceError::Validation(
                "give exactly one of session_id, image_handle, image_png_base64".into(),
            ));
        }
        let source = match (&req.session_id, &req.image_handle, &req.image_png_base64) {
            (Some(id), _, _) => self.images.get(&self.sessions.get(id)?.image_handle)?,
            (_, Some(h), _) => self.images.get(h)?,
            (_, _, Some(b)) => decode_png_b64(b)?,
            _ => unreachable!("checked above"),
        };
        let image = imaging::apply(&source, &op)?;
        let handle = self.images.put(&image)?;
        if let Some(id) = &req.session_id {
            self.sessions.update(id, |s| {
                s.image_handle = handle.clone();
                let entry = s.push("apply", json!({ "op": op, "spec_id": req.spec_id }));
                entry.op = Some(op.clone());
                entry.image_handle = Some(handle.clone());
                entry.chosen_spec_ids = req.spec_id.iter().cloned().collect();
                Ok(())
            })?;
        }
        Ok(ApplyResult { handle, image })
    }

    /// Re-applies a session's ops to its original image.
    pub fn replay(&self, id: &str) -> Result<Value, ServiceError> {
        let s = self.sessions.get(id)?;
        let mut img = self.images.get(&s.original_image)?;
        let ops = s.applied_ops();
        for op in &ops {
            img = imaging::apply(&img, op)?;
        }
        let replayed = image_handle(&img);
        Ok(json!({
            "session_id": s.session_id,
            "original_image": s.original_image,
            "image_handle": s.image_handle,
            "replayed_handle": replayed,
            "identical": replayed == s.image_handle,
            "ops": ops,
        }))
    }

    pub fn library_summary(&self) -> Value {
        library_summary(&self.library.snapshot())
    }

    pub fn append_response(&self, req: &ResponseRequest) -> Result<Value, ServiceError> {
        let aspect: Aspect = req.aspect.parse().map_err(|e: crowdgen_core::TaskError| ServiceError::Validation(e.to_string()))?;
        let widget = parse_widget_name(&req.widget).map_err(|e| ServiceError::Conflict(e.to_string()))?;
        let count = self.library.append(
            &req.task,
            aspect,
            PreferenceResponse {
                rater_id: req.rater_id.clone(),
                widget,
                reason: req.reason.clone(),
            },
        )?;
        Ok(json!({ "task": req.task, "aspect": aspect, "count": count, "total_responses": self.library.snapshot().total_responses() }))
    }

    pub fn catalog(&self) -> Value {
        json!({ "widgets": catalog() })
    }

    pub fn plan(&self, req: &PlanRequest) -> Result<StudyPlan, ServiceError> {
        let sets = req.task_set.map_or(TaskSets::Both, TaskSets::Only);
        let plan = plan_study_with(req.n, req.seed, sets)?;
        self.study.set_plan(plan.clone())?;
        Ok(plan)
    }

    /// Parses and stores one record. A pair that is not canonical is a
    /// conflict; any other shape problem is malformed input.
    pub fn record(&self, body: &[u8]) -> Result<Value, ServiceError> {
        let raw: Value = parse_json(body)?;
        let rec: ComparisonRecord = match serde_json::from_value(raw.clone()) {
            Ok(r) => r,
            Err(e) => {
                if let Some(pair) = raw.get("pair") {
                    if serde_json::from_value::<ComparisonPair>(pair.clone()).is_err() {
                        return Err(ServiceError::Conflict(format!("pair {pair} is not a canonical comparison pair")));
                    }
                }
                return Err(ServiceError::Validation(format!("malformed record: {e}")));
            }
        };
        self.study.append(std::slice::from_ref(&rec))?;
        Ok(json!({ "stored": 1, "total": self.study.records()?.len() }))
    }

    /// Simulates raters over the active plan and stores their records.
    pub fn simulate(&self, model: &RaterModel) -> Result<Value, ServiceError> {
        let plan = self
            .study
            .plan()
            .ok_or_else(|| ServiceError::Conflict("no study plan is active".into()))?;
        let records = simulate_raters(&plan, model)?;
        self.study.append(&records)?;
        Ok(json!({ "stored": records.len(), "total": self.study.records()?.len() }))
    }

    pub fn results(&self, grouping: Grouping) -> Result<(Value, String), ServiceError> {
        let rows = analyze(&self.study.records()?, grouping)?;
        Ok((json!({ "group_by": grouping, "rows": rows }), analysis_csv(&rows, grouping)))
    }
}

pub fn reason_payload(
    ctx: &TaskContext,
    binding_task: &str,
    rc: &ReasonerConfig,
    k: usize,
    recs: &BTreeMap<Aspect, AggregatedRecommendation>,
) -> Value {
    let mut per_aspect = serde_json::Map::new();
    for (aspect, rec) in recs {
        let doc = rec.option_document();
        per_aspect.insert(
            aspect.as_str().to_string(),
            json!({
                "aspect": aspect,
                "k": rec.k,
                "top": rec.top(),
                "scores": rec.scores,
                "widgets": doc["widgets"],
            }),
        );
    }
    let backend = match &rc.backend {
        Backend::Oracle => "oracle",
        Backend::Llm(_) => "llm",
    };
    let top: Vec<Value> = top_per_aspect(recs)
        .into_iter()
        .map(|(aspect, kind)| json!({ "aspect": aspect, "kind": kind }))
        .collect();
    json!({
        "task": ctx,
        "binding_task": binding_task,
        "library_mode": rc.library_mode,
        "k": k,
        "seed": rc.seed,
        "subset_seed": rc.subset_seed,
        "backend": backend,
        "recommendations": per_aspect,
        "top_per_aspect": top,
    })
}

pub fn library_summary(lib: &PreferenceLibrary) -> Value {
    let tasks: Vec<Value> = lib
        .tasks
        .iter()
        .map(|t| {
            let mut freq = serde_json::Map::new();
            for aspect in Aspect::ALL {
                if let Ok(table) = aggregate_frequencies(t, aspect) {
                    let counts: serde_json::Map<String, Value> =
                        table.ranked().into_iter().map(|(k, n)| (k.as_str().to_string(), json!(n))).collect();
                    freq.insert(aspect.as_str().into(), json!({ "total": table.total, "counts": counts }));
                }
            }
            json!({ "name": t.name, "description": t.description, "tags": t.tags, "frequencies": freq })
        })
        .collect();
    json!({ "version": lib.version, "total_responses": lib.total_responses(), "tasks": tasks })
}
