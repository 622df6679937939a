//! JSON API over a finished run directory.

use super::session::{Answer, ElicitationSession, Question, SessionError, SessionResult, DEFAULT_BISECTION_DEPTH};
use super::{read_json, RunConfig, RunError};
use crate::attributes::{AttributeCatalog, AttributeProfile, ImpactRange};
use crate::esm::SystemModel;
use crate::mavt::{
    classify_technologies, kendall_tau_distance, rank, Classification, Dendrogram, Ranking, StakeholderPreferences,
    TechnologyClass, ValueFunction,
};
use crate::mga::Alternative;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use indexmap::IndexMap;
use schemars::{schema_for, JsonSchema};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

pub const PORT_VAR: &str = "VFMGA_PORT";
pub const RUN_DIR_VAR: &str = "VFMGA_RUN_DIR";
pub const DEFAULT_PORT: u16 = 8080;

/// Artifacts of a completed run, loaded once and shared read-only.
#[derive(Debug)]
pub struct RunData {
    pub dir: PathBuf,
    pub run_id: String,
    pub config: RunConfig,
    pub model: SystemModel,
    pub catalog: AttributeCatalog,
    pub alternatives: Vec<Alternative>,
    pub profiles: Vec<AttributeProfile>,
    pub ranges: IndexMap<String, ImpactRange>,
    pub preferences: Vec<StakeholderPreferences>,
    pub rankings: Vec<Ranking>,
    pub classification: Option<Classification>,
    pub dendrogram: Option<Dendrogram>,
}

fn optional<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Option<T>, RunError> {
    if path.exists() {
        read_json(path).map(Some)
    } else {
        Ok(None)
    }
}

impl RunData {
    pub fn load(dir: &Path) -> Result<Self, RunError> {
        let inputs = dir.join("inputs");
        let manifest: serde_json::Value = read_json(&dir.join("manifest.json"))?;
        Ok(Self {
            dir: dir.into(),
            run_id: manifest["run_id"].as_str().unwrap_or_default().to_string(),
            config: read_json(&inputs.join("run.json"))?,
            model: read_json(&inputs.join("system.json"))?,
            catalog: read_json(&inputs.join("catalog.json"))?,
            alternatives: read_json(&dir.join("alternatives.json"))?,
            profiles: read_json(&dir.join("profiles.json"))?,
            ranges: read_json(&dir.join("impact_ranges.json"))?,
            preferences: optional(&dir.join("preferences.json"))?.unwrap_or_default(),
            rankings: optional(&dir.join("rankings.json"))?.unwrap_or_default(),
            classification: optional(&dir.join("classification.json"))?,
            dendrogram: optional(&dir.join("dendrogram.json"))?,
        })
    }
}

pub struct AppState {
    pub run: RunData,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<ElicitationSession>>>>,
    next_id: Mutex<usize>,
}

impl AppState {
    pub fn new(run: RunData) -> Self {
        let existing = std::fs::read_dir(run.dir.join("sessions"))
            .map(|d| d.filter_map(|e| e.ok()).filter(|e| e.path().extension().is_some_and(|x| x == "json")).count())
            .unwrap_or(0);
        Self {
            run,
            sessions: Mutex::new(HashMap::new()),
            next_id: Mutex::new(existing + 1),
        }
    }

    /// Claims the next free session id by creating its file, so servers
    /// sharing a run directory never hand out the same id.
    fn allocate_id(&self) -> Result<String, ApiError> {
        let dir = self.session_dir();
        let fail = |e: std::io::Error| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: format!("{}: {e}", dir.display()),
        };
        std::fs::create_dir_all(&dir).map_err(fail)?;
        let mut n = self.next_id.lock().expect("id lock");
        loop {
            let id = format!("S{:04}", *n);
            *n += 1;
            let path = ElicitationSession::path(&dir, &id);
            match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(_) => return Ok(id),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(fail(e)),
            }
        }
    }

    fn session_dir(&self) -> PathBuf {
        self.run.dir.join("sessions")
    }

    fn session(&self, id: &str) -> Result<Arc<tokio::sync::Mutex<ElicitationSession>>, ApiError> {
        let mut map = self.sessions.lock().expect("session map lock");
        if let Some(s) = map.get(id) {
            return Ok(s.clone());
        }
        let valid = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        let path = ElicitationSession::path(&self.session_dir(), id);
        if !valid || !path.exists() {
            return Err(ApiError::not_found(format!("no session `{id}`")));
        }
        let s = Arc::new(tokio::sync::Mutex::new(ElicitationSession::load(&path)?));
        map.insert(id.to_string(), s.clone());
        Ok(s)
    }
}

#[derive(Debug, Serialize, JsonSchema)]
pub struct ErrorBody {
    pub error: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(m: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: m.into(),
        }
    }
    fn not_found(m: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            message: m.into(),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Storage { .. } => Self {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                message: e.to_string(),
            },
            SessionError::Complete => Self {
                status: StatusCode::CONFLICT,
                message: e.to_string(),
            },
            _ => Self::bad_request(e.to_string()),
        }
    }
}

impl From<crate::mavt::MavtError> for ApiError {
    fn from(e: crate::mavt::MavtError) -> Self {
        Self::bad_request(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Serialize, Deserialize, JsonSchema)]
pub struct Health {
    pub status: String,
    pub run_id: String,
    pub alternatives: usize,
    pub stakeholders: usize,
}

#[derive(Debug, Serialize, Deserialize, JsonSchema)]
pub struct CreateSession {
    pub stakeholder: String,
    #[serde(default)]
    pub bisection_depth: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize, JsonSchema)]
pub struct SessionView {
    pub id: String,
    pub stakeholder: String,
    pub phase: super::session::Phase,
    pub question: Question,
    pub result: Option<SessionResult>,
}

impl SessionView {
    fn of(s: &ElicitationSession) -> Result<Self, ApiError> {
        Ok(Self {
            id: s.id.clone(),
            stakeholder: s.stakeholder.clone(),
            phase: s.phase,
            question: s.question()?,
            result: s.result.clone(),
        })
    }
}

#[derive(Debug, Deserialize)]
pub struct AlternativesQuery {
    pub top: Option<f64>,
    pub stakeholder: Option<String>,
}

#[derive(Debug, Serialize, Deserialize, JsonSchema)]
pub struct AlternativeRow {
    pub rank: Option<usize>,
    pub value: Option<f64>,
    #[serde(flatten)]
    pub alternative: Alternative,
}

#[derive(Debug, Serialize, Deserialize, JsonSchema)]
pub struct AlternativesResponse {
    pub stakeholder: Option<String>,
    pub top_fraction: f64,
    pub alternatives: Vec<AlternativeRow>,
}

#[derive(Debug, Serialize, Deserialize, JsonSchema)]
pub struct WhatIfRequest {
    /// Stakeholder whose value functions (and, unless overridden, weights and
    /// curvature) are used. Without one, value functions are linear.
    #[serde(default)]
    pub stakeholder: Option<String>,
    #[serde(default)]
    pub weights: Option<IndexMap<String, f64>>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub top_fraction: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize, JsonSchema)]
pub struct WhatIfResponse {
    pub ranking: Ranking,
    pub gamma: f64,
    pub weights: IndexMap<String, f64>,
    /// Distance to the stakeholder's stored ranking, when there is one.
    pub kendall_tau_to_baseline: Option<f64>,
    pub cost_optimum_rank: usize,
    pub top_fraction: f64,
    pub technologies: Vec<TechnologyClass>,
}

/// Published JSON schemas, by name.
pub fn schema(name: &str) -> Option<serde_json::Value> {
    let s = match name {
        "health" => schema_for!(Health),
        "error" => schema_for!(ErrorBody),
        "create_session" => schema_for!(CreateSession),
        "session" => schema_for!(SessionView),
        "question" => schema_for!(Question),
        "answer" => schema_for!(Answer),
        "alternatives" => schema_for!(AlternativesResponse),
        "ranking" => schema_for!(Ranking),
        "classification" => schema_for!(Classification),
        "dendrogram" => schema_for!(Dendrogram),
        "whatif_request" => schema_for!(WhatIfRequest),
        "whatif_response" => schema_for!(WhatIfResponse),
        _ => return None,
    };
    serde_json::to_value(s).ok()
}

pub const SCHEMA_NAMES: [&str; 12] = [
    "health",
    "error",
    "create_session",
    "session",
    "question",
    "answer",
    "alternatives",
    "ranking",
    "classification",
    "dendrogram",
    "whatif_request",
    "whatif_response",
];

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/question", get(get_question))
        .route("/sessions/{id}/answer", post(post_answer))
        .route("/alternatives", get(alternatives))
        .route("/rankings/{stakeholder}", get(ranking))
        .route("/analysis/classification", get(classification))
        .route("/analysis/clustering", get(clustering))
        .route("/whatif", post(whatif))
        .route("/schemas/{name}", get(get_schema))
        .with_state(state)
}

async fn health(State(st): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        run_id: st.run.run_id.clone(),
        alternatives: st.run.alternatives.len(),
        stakeholders: st.run.rankings.len(),
    })
}

async fn create_session(
    State(st): State<Arc<AppState>>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    if req.stakeholder.trim().is_empty() {
        return Err(ApiError::bad_request("stakeholder must not be empty"));
    }
    let id = st.allocate_id()?;
    let depth = req.bisection_depth.unwrap_or(DEFAULT_BISECTION_DEPTH);
    let session = ElicitationSession::new(&id, &req.stakeholder, &st.run.catalog, &st.run.ranges, depth)?;
    session.save(&st.session_dir())?;
    let view = SessionView::of(&session)?;
    st.sessions
        .lock()
        .expect("session map lock")
        .insert(id, Arc::new(tokio::sync::Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<SessionView> {
    let s = st.session(&id)?;
    let s = s.lock().await;
    Ok(Json(SessionView::of(&s)?))
}

async fn get_question(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Question> {
    let s = st.session(&id)?;
    let s = s.lock().await;
    Ok(Json(s.question()?))
}

async fn post_answer(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(answer): Json<Answer>,
) -> ApiResult<SessionView> {
    let s = st.session(&id)?;
    let mut s = s.lock().await;
    // answer a copy so a rejected answer leaves the session untouched
    let mut next = s.clone();
    next.submit(answer, &st.run.catalog, &st.run.ranges)?;
    next.save(&st.session_dir())?;
    *s = next;
    Ok(Json(SessionView::of(&s)?))
}

fn stakeholder_ranking<'a>(st: &'a AppState, name: &str) -> Result<&'a Ranking, ApiError> {
    st.run
        .rankings
        .iter()
        .find(|r| r.stakeholder == name)
        .ok_or_else(|| ApiError::not_found(format!("no ranking for stakeholder `{name}`")))
}

async fn alternatives(
    State(st): State<Arc<AppState>>,
    Query(q): Query<AlternativesQuery>,
) -> ApiResult<AlternativesResponse> {
    let top = q.top.unwrap_or(1.0);
    let by_id: HashMap<&str, &Alternative> = st.run.alternatives.iter().map(|a| (a.id.as_str(), a)).collect();
    let rows = match &q.stakeholder {
        Some(s) => stakeholder_ranking(&st, s)?
            .top(top)?
            .iter()
            .map(|e| AlternativeRow {
                rank: Some(e.rank),
                value: Some(e.value),
                alternative: by_id[e.alternative.as_str()].clone(),
            })
            .collect(),
        None => {
            if !(top > 0.0 && top <= 1.0) {
                return Err(ApiError::bad_request("top must lie in (0, 1]"));
            }
            let n = st.run.alternatives.len();
            let k = ((top * n as f64 + 1e-9).floor() as usize).max(1);
            st.run.alternatives[..k]
                .iter()
                .map(|a| AlternativeRow {
                    rank: None,
                    value: None,
                    alternative: a.clone(),
                })
                .collect()
        }
    };
    Ok(Json(AlternativesResponse {
        stakeholder: q.stakeholder,
        top_fraction: top,
        alternatives: rows,
    }))
}

async fn ranking(State(st): State<Arc<AppState>>, UrlPath(s): UrlPath<String>) -> ApiResult<Ranking> {
    Ok(Json(stakeholder_ranking(&st, &s)?.clone()))
}

async fn classification(State(st): State<Arc<AppState>>) -> ApiResult<Classification> {
    st.run
        .classification
        .clone()
        .map(Json)
        .ok_or_else(|| ApiError::not_found("run has no classification"))
}

async fn clustering(State(st): State<Arc<AppState>>) -> ApiResult<Dendrogram> {
    st.run
        .dendrogram
        .clone()
        .map(Json)
        .ok_or_else(|| ApiError::not_found("run has no clustering (needs two or more stakeholders)"))
}

/// Ranking under ad-hoc weights and curvature.
pub fn what_if(run: &RunData, req: &WhatIfRequest) -> Result<WhatIfResponse, ApiError> {
    let base = match &req.stakeholder {
        Some(s) => run
            .preferences
            .iter()
            .find(|p| &p.stakeholder == s)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no preferences for stakeholder `{s}`")))?,
        None => {
            if req.weights.is_none() {
                return Err(ApiError::bad_request("weights are required without a stakeholder"));
            }
            let n = run.catalog.attributes.len() as f64;
            StakeholderPreferences {
                stakeholder: "what-if".into(),
                weights: run
                    .catalog
                    .attributes
                    .iter()
                    .map(|a| (a.id.clone(), 1.0 / n))
                    .collect(),
                value_functions: run
                    .catalog
                    .attributes
                    .iter()
                    .map(|a| {
                        let r = run.ranges[&a.id];
                        (a.id.clone(), ValueFunction::linear(r.worst, r.best))
                    })
                    .collect(),
                gamma: crate::mavt::DEFAULT_GAMMA,
                notes: Vec::new(),
            }
        }
    };
    if let Some(w) = &req.weights {
        if let Some(k) = w.keys().find(|k| !base.weights.contains_key(*k)) {
            return Err(ApiError::bad_request(format!("unknown attribute `{k}`")));
        }
    }
    let weights = req.weights.clone().unwrap_or_else(|| base.weights.clone());
    let prefs = base.with_weights(&weights, req.gamma.unwrap_or(base.gamma))?;
    let ranking = rank(&run.profiles, &prefs)?;
    let baseline = req
        .stakeholder
        .as_ref()
        .and_then(|s| run.rankings.iter().find(|r| &r.stakeholder == s));
    let q = req.top_fraction.unwrap_or(run.config.top_fraction);
    let classes = classify_technologies(
        &run.model,
        &run.alternatives,
        std::slice::from_ref(&ranking),
        q,
        run.config.presence_threshold,
    )?;
    Ok(WhatIfResponse {
        kendall_tau_to_baseline: baseline.map(|b| kendall_tau_distance(b, &ranking)).transpose()?,
        cost_optimum_rank: ranking.rank_of(&run.alternatives[0].id).unwrap_or(0),
        gamma: prefs.gamma,
        weights: prefs.weights,
        top_fraction: q,
        technologies: classes.technologies,
        ranking,
    })
}

async fn whatif(State(st): State<Arc<AppState>>, Json(req): Json<WhatIfRequest>) -> ApiResult<WhatIfResponse> {
    what_if(&st.run, &req).map(Json)
}

async fn get_schema(UrlPath(name): UrlPath<String>) -> ApiResult<serde_json::Value> {
    schema(&name)
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("no schema `{name}`")))
}

/// Serves the API until interrupted.
pub async fn serve(run_dir: &Path, port: u16) -> Result<(), RunError> {
    let state = Arc::new(AppState::new(RunData::load(run_dir)?));
    let addr = std::net::SocketAddr::from(([0, 0, 0, 0], port));
    let io = |source| RunError::Io {
        path: run_dir.into(),
        source,
    };
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(io)?;
    eprintln!("serving {} on http://{addr}", run_dir.display());
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(io)
}
