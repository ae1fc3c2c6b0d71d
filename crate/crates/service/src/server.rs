//! The HTTP JSON service: one-shot translation and interactive sessions
//! over a shared model that online learning updates in place.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use inmt_core::config::Settings;
use inmt_core::decoding::BeamConfig;
use inmt_core::engine::Engine;
use inmt_core::eval::ksmr;
use inmt_core::inmt::{accept_session, apply_feedback, close_session, start_session, Feedback, Session};
use parking_lot::{Mutex, RwLock};
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

use crate::api::*;

pub const ADDR_ENV: &str = "INMT_ADDR";
pub const CHECKPOINT_ENV: &str = "INMT_CHECKPOINT";

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    pub addr: String,
    /// Model directory to load at startup.
    pub checkpoint: Option<PathBuf>,
    pub beam: BeamConfig,
    pub settings: Settings,
    pub max_sessions: usize,
    pub session_timeout: Duration,
    pub static_dir: Option<PathBuf>,
}

impl ServerConfig {
    pub fn from_settings(settings: &Settings, checkpoint: Option<PathBuf>) -> Self {
        Self {
            addr: settings.server.addr.clone(),
            checkpoint,
            beam: settings.beam.clone(),
            settings: settings.clone(),
            max_sessions: settings.server.max_sessions,
            session_timeout: Duration::from_secs(settings.server.session_timeout_secs),
            static_dir: Some(PathBuf::from(&settings.server.static_dir)),
        }
    }

    /// `INMT_ADDR` and `INMT_CHECKPOINT` take precedence over the settings.
    pub fn apply_env(&mut self) {
        if let Ok(addr) = std::env::var(ADDR_ENV) {
            self.addr = addr;
        }
        if let Ok(path) = std::env::var(CHECKPOINT_ENV) {
            self.checkpoint = Some(PathBuf::from(path));
        }
    }
}

struct Slot {
    session: Session,
    busy: bool,
    last_used: Instant,
}

struct Shared {
    engine: RwLock<Option<Engine>>,
    sessions: Mutex<HashMap<String, Slot>>,
    max_sessions: usize,
    timeout: Duration,
}

/// Handle shared by all request handlers.
#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

impl AppState {
    /// State without a model; requests needing one get 503 until
    /// [`AppState::set_engine`] is called.
    pub fn new(max_sessions: usize, timeout: Duration) -> Self {
        Self {
            shared: Arc::new(Shared {
                engine: RwLock::new(None),
                sessions: Mutex::new(HashMap::new()),
                max_sessions: max_sessions.max(1),
                timeout,
            }),
        }
    }

    pub fn with_engine(engine: Engine, max_sessions: usize, timeout: Duration) -> Self {
        let state = Self::new(max_sessions, timeout);
        state.set_engine(engine);
        state
    }

    pub fn set_engine(&self, engine: Engine) {
        *self.shared.engine.write() = Some(engine);
    }

    /// Runs `f` on the current model, if loaded.
    pub fn read_engine<R>(&self, f: impl FnOnce(&Engine) -> R) -> Option<R> {
        self.shared.engine.read().as_ref().map(f)
    }

    fn purge_expired(&self, sessions: &mut HashMap<String, Slot>) {
        let timeout = self.shared.timeout;
        sessions.retain(|_, slot| slot.busy || slot.last_used.elapsed() <= timeout);
    }

    /// Marks an open session busy and hands out a copy to work on.
    fn checkout(&self, id: &str) -> Result<Session, ApiError> {
        let mut sessions = self.shared.sessions.lock();
        self.purge_expired(&mut sessions);
        let slot = sessions.get_mut(id).ok_or_else(ApiError::unknown_session)?;
        if slot.session.closed {
            return Err(ApiError::new(StatusCode::CONFLICT, "session_closed", "session is closed"));
        }
        if slot.busy {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "session_busy",
                "another request on this session is in flight",
            ));
        }
        slot.busy = true;
        Ok(slot.session.clone())
    }

    /// Releases a checked-out session, storing `updated` if given.
    fn checkin(&self, id: &str, updated: Option<Session>) {
        if let Some(slot) = self.shared.sessions.lock().get_mut(id) {
            slot.busy = false;
            slot.last_used = Instant::now();
            if let Some(s) = updated {
                slot.session = s;
            }
        }
    }

    /// Runs blocking model work on a worker thread against the loaded model.
    async fn with_model<R, F>(&self, f: F) -> Result<R, ApiError>
    where
        R: Send + 'static,
        F: FnOnce(&Engine) -> inmt_core::Result<R> + Send + 'static,
    {
        let state = self.clone();
        tokio::task::spawn_blocking(move || {
            let guard = state.shared.engine.read();
            let engine = guard.as_ref().ok_or_else(ApiError::loading)?;
            f(engine).map_err(ApiError::from)
        })
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
    }
}

pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/translate", post(translate))
        .route("/session", post(create_session))
        .route("/session/{id}/correction", post(correct))
        .route("/session/{id}/accept", post(accept))
        .route("/health", get(health))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds, starts loading the model in the background and serves until the
/// process ends.
pub async fn serve(config: ServerConfig) -> std::io::Result<()> {
    let listener = TcpListener::bind(&config.addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    let state = AppState::new(config.max_sessions, config.session_timeout);
    if let Some(dir) = config.checkpoint.clone() {
        let loader = state.clone();
        let settings = config.settings.clone();
        let beam = config.beam.clone();
        tokio::task::spawn_blocking(move || match load_engine(&dir, beam, &settings) {
            Ok(engine) => {
                loader.set_engine(engine);
                eprintln!("model loaded from {}", dir.display());
            }
            Err(e) => eprintln!("error: cannot load model from {}: {e}", dir.display()),
        });
    } else {
        eprintln!("warning: no model directory given; requests will get 503");
    }
    axum::serve(listener, router(state, config.static_dir.as_deref())).await
}

/// Loads a model directory and applies the online-learning settings.
pub fn load_engine(dir: &Path, beam: BeamConfig, settings: &Settings) -> inmt_core::Result<Engine> {
    let mut engine = Engine::load(dir, beam)?;
    engine.online = settings.online.train_config();
    engine.online_steps = settings.online.online_steps;
    Ok(engine)
}

async fn health(State(state): State<AppState>) -> Json<HealthResponse> {
    let loaded = state.read_engine(|_| ()).is_some();
    let sessions = {
        let mut s = state.shared.sessions.lock();
        state.purge_expired(&mut s);
        s.values().filter(|slot| !slot.session.closed).count()
    };
    Json(HealthResponse {
        status: if loaded { "ok" } else { "loading" }.into(),
        sessions,
    })
}

async fn translate(
    State(state): State<AppState>,
    ApiJson(req): ApiJson<TranslateRequest>,
) -> Result<Json<TranslateResponse>, ApiError> {
    if req.source.trim().is_empty() {
        return Err(ApiError::bad_request("empty_source", "source is empty"));
    }
    if req.nbest == 0 {
        return Err(ApiError::bad_request("invalid_nbest", "nbest must be at least 1"));
    }
    let nbest = req.nbest;
    let translations = state
        .with_model(move |engine| {
            if nbest > engine.beam.beam_size {
                return Ok(Err(ApiError::bad_request(
                    "nbest_exceeds_beam",
                    format!("nbest {nbest} exceeds the beam size {}", engine.beam.beam_size),
                )));
            }
            engine.translate(&req.source, nbest).map(Ok)
        })
        .await??;
    Ok(Json(TranslateResponse {
        hypotheses: translations
            .into_iter()
            .map(|t| ScoredText {
                text: t.text,
                score: t.hypothesis.score,
            })
            .collect(),
    }))
}

async fn create_session(
    State(state): State<AppState>,
    ApiJson(req): ApiJson<CreateSessionRequest>,
) -> Result<Json<CreateSessionResponse>, ApiError> {
    if req.source.trim().is_empty() {
        return Err(ApiError::bad_request("empty_source", "source is empty"));
    }
    {
        let mut sessions = state.shared.sessions.lock();
        state.purge_expired(&mut sessions);
        let open = sessions.values().filter(|s| !s.session.closed).count();
        if open >= state.shared.max_sessions {
            return Err(ApiError::new(
                StatusCode::TOO_MANY_REQUESTS,
                "too_many_sessions",
                format!("at most {} open sessions", state.shared.max_sessions),
            ));
        }
    }
    let source = req.source;
    let session = state.with_model(move |engine| start_session(engine, String::new(), &source)).await?;

    let mut sessions = state.shared.sessions.lock();
    let id = loop {
        let id = format!("{:032x}", rand::random::<u128>());
        if !sessions.contains_key(&id) {
            break id;
        }
    };
    let hypothesis = session.hypothesis.clone();
    sessions.insert(
        id.clone(),
        Slot {
            session: Session { id: id.clone(), ..session },
            busy: false,
            last_used: Instant::now(),
        },
    );
    Ok(Json(CreateSessionResponse {
        session_id: id,
        hypothesis,
    }))
}

fn parse_feedback(req: &CorrectionRequest) -> Result<Feedback, ApiError> {
    match &req.character {
        None => Ok(Feedback::end(req.position)),
        Some(text) => {
            let mut chars = text.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(Feedback::character(req.position, c)),
                _ => Err(ApiError::bad_request(
                    "invalid_character",
                    "character must be exactly one character or null",
                )),
            }
        }
    }
}

async fn correct(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    ApiJson(req): ApiJson<CorrectionRequest>,
) -> Result<Json<CorrectionResponse>, ApiError> {
    let feedback = parse_feedback(&req)?;
    let session = state.checkout(&id)?;
    let result = state
        .with_model(move |engine| {
            let mut session = session;
            apply_feedback(&mut session, feedback, engine).map(|()| session)
        })
        .await;
    match result {
        Ok(session) => {
            let response = CorrectionResponse {
                hypothesis: session.hypothesis.clone(),
                validated_prefix_len: session.validated_prefix_len(),
            };
            state.checkin(&id, Some(session));
            Ok(Json(response))
        }
        Err(e) => {
            state.checkin(&id, None);
            Err(e)
        }
    }
}

async fn accept(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    ApiJson(req): ApiJson<AcceptRequest>,
) -> Result<Json<AcceptResponse>, ApiError> {
    let session = state.checkout(&id)?;
    let worker = state.clone();
    let result = tokio::task::spawn_blocking(move || -> Result<(Session, String), ApiError> {
        let mut session = session;
        let text = if req.learn {
            // exclusive access: waits for in-flight searches, serializes updates
            let mut guard = worker.shared.engine.write();
            let engine = guard.as_mut().ok_or_else(ApiError::loading)?;
            accept_session(&mut session, true, engine)?
        } else {
            close_session(&mut session)?
        };
        Ok((session, text))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))
    .and_then(|r| r);
    match result {
        Ok((session, final_text)) => {
            let effort = session.effort(final_text.chars().count());
            let counters = KsmrCounters {
                keystrokes: effort.keystrokes,
                mouse_actions: effort.mouse_actions,
                iterations: effort.iterations,
                ref_chars: effort.ref_chars,
                ksmr: ksmr(&[effort]).unwrap_or(0.0),
            };
            state.checkin(&id, Some(session));
            Ok(Json(AcceptResponse {
                final_text,
                ksmr_counters: counters,
            }))
        }
        Err(e) => {
            state.checkin(&id, None);
            Err(e)
        }
    }
}
