//! HTTP and WebSocket front-end over interactive sessions.
//!
//! Each session wraps a built system and its modal model. Moves are applied
//! on the blocking pool, one at a time per session; every accepted move is
//! broadcast to the session's stream subscribers.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;
use tower_http::cors::CorsLayer;

use modart::assembly::EndpointKind;
use modart::io;
use modart::modal::{DelayMode, ModalModel};
use modart::render::energy_decay_curve;
use modart::scene::SceneDescription;
use modart::session::{render_snapshot, MoveCost, ResidueGrid, Session, Snapshot};
use modart::Error;

/// Floor for EDC values in decibels, standing in for an empty tail.
pub const EDC_FLOOR_DB: f64 = -300.0;

/// Default residue-map resolution, matching a 20 x 20 listener sweep.
pub const DEFAULT_GRID: usize = 20;

/// Longest response a single request may ask for, in samples.
pub const MAX_SAMPLES: usize = 1 << 22;

pub struct SessionEntry {
    pub session: Arc<Session>,
    updates: broadcast::Sender<Arc<Snapshot>>,
}

impl SessionEntry {
    pub fn new(session: Session) -> Self {
        let (updates, _) = broadcast::channel(64);
        SessionEntry {
            session: Arc::new(session),
            updates,
        }
    }
}

#[derive(Default)]
pub struct AppState {
    sessions: HashMap<String, Arc<SessionEntry>>,
}

impl AppState {
    pub fn insert(&mut self, session: Session) {
        self.sessions
            .insert(session.id().to_string(), Arc::new(SessionEntry::new(session)));
    }

    fn get(&self, id: &str) -> Result<Arc<SessionEntry>, ApiError> {
        self.sessions
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown session {id}")))
    }
}

/// Loads a session from a build directory and a model directory.
pub fn load_session(id: &str, build_dir: &Path, model_dir: &Path) -> modart::Result<Session> {
    let system = io::rebuild_scene_system(build_dir)?;
    let model = io::read_model(model_dir)?;
    Session::new(id, Arc::new(system), Arc::new(model))
}

#[derive(Debug)]
pub struct ApiError(pub StatusCode, pub String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::RevisionConflict { .. } => StatusCode::CONFLICT,
            e if e.is_validation() => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

fn join_error(e: tokio::task::JoinError) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}"))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/session/{id}/scene", get(scene))
        .route("/session/{id}/move", post(move_endpoint))
        .route("/session/{id}/eir", get(eir))
        .route("/session/{id}/modes", get(modes))
        .route("/session/{id}/residue-map", get(residue_map))
        .route("/session/{id}/stream", get(stream))
        .layer(CorsLayer::permissive())
        .with_state(Arc::new(state))
}

type AppResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneResponse {
    pub id: String,
    pub revision: u64,
    /// The scene in file schema, with current endpoint positions.
    pub scene: SceneDescription,
    pub bounds: [[f64; 3]; 2],
}

async fn scene(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> AppResult<SceneResponse> {
    let e = st.get(&id)?;
    let snap = e.session.snapshot();
    let mut d = e.session.system().scene.description().clone();
    d.sources = snap.sources.clone();
    d.listeners = snap.listeners.clone();
    let (lo, hi) = e.session.system().scene.bounds();
    Ok(Json(SceneResponse {
        id,
        revision: snap.revision,
        scene: d,
        bounds: [[lo.x, lo.y, lo.z], [hi.x, hi.y, hi.z]],
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoveRequest {
    pub kind: EndpointKind,
    pub index: usize,
    pub position: [f64; 3],
    /// Rejects the move with 409 unless the session is at this revision.
    #[serde(default)]
    pub expected_revision: Option<u64>,
}

/// Couplings of one mode; complex numbers are `[re, im]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeResidues {
    pub mode: usize,
    pub source: Vec<Complex64>,
    pub listener: Vec<Complex64>,
    pub undriven: Complex64,
    /// Real part of the full residue, `[listener][source]`.
    pub residue: Vec<Vec<f64>>,
}

pub fn mode_residues(snap: &Snapshot) -> Vec<ModeResidues> {
    let r = &snap.residues;
    (0..r.n_modes())
        .map(|m| ModeResidues {
            mode: m,
            source: r.source[m].clone(),
            listener: r.listener[m].clone(),
            undriven: r.undriven[m],
            residue: (0..r.listener[m].len())
                .map(|l| (0..r.source[m].len()).map(|s| r.residue(m, l, s).re).collect())
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoveResponse {
    pub revision: u64,
    pub kind: EndpointKind,
    pub index: usize,
    pub residues: Vec<ModeResidues>,
    pub timing: MoveCost,
}

async fn move_endpoint(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<MoveRequest>,
) -> AppResult<MoveResponse> {
    let e = st.get(&id)?;
    let worker = Arc::clone(&e);
    let (outcome, snap) = tokio::task::spawn_blocking(move || {
        worker
            .session
            .apply_move(req.expected_revision, req.kind, req.index, req.position)
    })
    .await
    .map_err(join_error)??;
    // Broadcasts may arrive out of order; subscribers drop older revisions.
    let _ = e.updates.send(Arc::clone(&snap));
    Ok(Json(MoveResponse {
        revision: outcome.revision,
        kind: outcome.kind,
        index: outcome.index,
        residues: mode_residues(&snap),
        timing: outcome.cost,
    }))
}

#[derive(Debug, Clone, Deserialize)]
pub struct PairQuery {
    #[serde(default)]
    pub listener: usize,
    #[serde(default)]
    pub source: usize,
    /// Samples; defaults to two seconds.
    pub n: Option<usize>,
    pub direct: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EirResponse {
    pub revision: u64,
    pub fs_e: f64,
    pub listener: usize,
    pub source: usize,
    pub eir: Vec<f64>,
    pub edc_db: Vec<f64>,
}

fn edc_db(h: &[f64]) -> Vec<f64> {
    let edc = energy_decay_curve(h);
    let e0 = edc.first().copied().unwrap_or(0.0);
    edc.iter()
        .map(|e| {
            if e0 > 0.0 && *e > 0.0 {
                (10.0 * (e / e0).log10()).max(EDC_FLOOR_DB)
            } else {
                EDC_FLOOR_DB
            }
        })
        .collect()
}

fn render_response(model: &ModalModel, snap: &Snapshot, q: &PairQuery) -> Result<EirResponse, ApiError> {
    let n = q.n.unwrap_or((2.0 * model.fs_e).round() as usize);
    if n > MAX_SAMPLES {
        return Err(ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("n = {n} exceeds the limit of {MAX_SAMPLES} samples"),
        ));
    }
    let eir = render_snapshot(model, snap, q.listener, q.source, n, q.direct.unwrap_or(true))?;
    Ok(EirResponse {
        revision: snap.revision,
        fs_e: model.fs_e,
        listener: q.listener,
        source: q.source,
        edc_db: edc_db(&eir),
        eir,
    })
}

async fn eir(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<PairQuery>,
) -> AppResult<EirResponse> {
    let e = st.get(&id)?;
    let snap = e.session.snapshot();
    let model = Arc::clone(e.session.model());
    let resp = tokio::task::spawn_blocking(move || render_response(&model, &snap, &q))
        .await
        .map_err(join_error)??;
    Ok(Json(resp))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeInfo {
    pub index: usize,
    pub re: f64,
    pub im: f64,
    pub magnitude: f64,
    pub t60_s: f64,
    pub freq_hz: f64,
    pub undriven: Complex64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModesResponse {
    pub revision: u64,
    pub fs_e: f64,
    pub transition_time_s: f64,
    pub delay_mode: DelayMode,
    pub modes: Vec<ModeInfo>,
}

async fn modes(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> AppResult<ModesResponse> {
    let e = st.get(&id)?;
    let model = e.session.model();
    Ok(Json(ModesResponse {
        revision: e.session.revision(),
        fs_e: model.fs_e,
        transition_time_s: model.transition_time_s,
        delay_mode: model.delay_mode,
        modes: model
            .modes
            .iter()
            .enumerate()
            .map(|(index, m)| ModeInfo {
                index,
                re: m.pole.value.re,
                im: m.pole.value.im,
                magnitude: m.pole.magnitude,
                t60_s: m.pole.t60_s,
                freq_hz: m.pole.freq_hz,
                undriven: m.undriven_residue,
            })
            .collect(),
    }))
}

#[derive(Debug, Clone, Deserialize)]
pub struct MapQuery {
    /// One mode; all modes when absent.
    pub mode: Option<usize>,
    pub grid: Option<usize>,
    #[serde(default)]
    pub source: usize,
    pub z: Option<f64>,
}

async fn residue_map(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<MapQuery>,
) -> AppResult<ResidueGrid> {
    let e = st.get(&id)?;
    let grid = q.grid.unwrap_or(DEFAULT_GRID);
    if grid > 200 {
        return Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, "grid must be at most 200".into()));
    }
    let session = Arc::clone(&e.session);
    let g = tokio::task::spawn_blocking(move || {
        let modes: Vec<usize> = match q.mode {
            Some(m) => vec![m],
            None => (0..session.model().len()).collect(),
        };
        session.residue_grid(&modes, grid, q.z, q.source)
    })
    .await
    .map_err(join_error)??;
    Ok(Json(g))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamFrame {
    pub revision: u64,
    pub listener: usize,
    pub source: usize,
    pub residues: Vec<ModeResidues>,
    pub edc_db: Vec<f64>,
}

async fn stream(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<PairQuery>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let e = st.get(&id)?;
    Ok(ws.on_upgrade(move |socket| push_updates(socket, e, q)))
}

fn frame(model: &ModalModel, snap: &Snapshot, q: &PairQuery) -> String {
    let body = match render_response(model, snap, q) {
        Ok(r) => serde_json::to_value(StreamFrame {
            revision: snap.revision,
            listener: q.listener,
            source: q.source,
            residues: mode_residues(snap),
            edc_db: r.edc_db,
        })
        .expect("frame serialises"),
        Err(ApiError(_, msg)) => serde_json::json!({ "revision": snap.revision, "error": msg }),
    };
    body.to_string()
}

async fn push_updates(mut socket: WebSocket, entry: Arc<SessionEntry>, q: PairQuery) {
    let mut rx = entry.updates.subscribe();
    let model = Arc::clone(entry.session.model());
    let mut last: Option<u64> = None;
    let mut next = Some(entry.session.snapshot());
    loop {
        if let Some(snap) = next.take() {
            if last.is_none_or(|l| snap.revision > l) {
                last = Some(snap.revision);
                let text = frame(&model, &snap, &q);
                if socket.send(Message::Text(text.into())).await.is_err() {
                    return;
                }
            }
        }
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(snap) => next = Some(snap),
                Err(broadcast::error::RecvError::Lagged(_)) => next = Some(entry.session.snapshot()),
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
