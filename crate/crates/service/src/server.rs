use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use carefulbot::experiment::{run_session, SessionInputs, StudyConfig};
use carefulbot::rng::derive_seed;

use crate::error::{ServiceError, ServiceResult};
use crate::protocol::{ClientMessage, CreateSession, Decision, DecisionAck, Mode, ServerMessage, SessionCreated, WristAck, WristBatch, VERSION};
use crate::session::{Session, StudySetup};
use crate::store::SessionStore;

pub struct ServiceConfig {
    pub setup: Arc<StudySetup>,
    /// Source of scripted participants and default session seeds.
    pub study: StudyConfig,
    pub store: SessionStore,
    /// Wall-clock time per live tick; `1 / tick_rate` paces at real time.
    pub tick_interval: Duration,
}

struct Slot {
    session: Session,
    streaming: bool,
}

struct Inner {
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<Mutex<Slot>>>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        AppState(Arc::new(Inner {
            config,
            sessions: Mutex::new(HashMap::new()),
        }))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    fn slot(&self, id: &str) -> ServiceResult<Arc<Mutex<Slot>>> {
        self.0
            .sessions
            .lock()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("session {id}")))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/stream", get(stream))
        .route("/sessions/{id}/wrist", post(wrist))
        .route("/sessions/{id}/decision", post(decision))
        .route("/sessions/{id}/report", get(report))
        .with_state(state)
}

fn check_version(v: &str) -> ServiceResult<()> {
    if v == VERSION {
        Ok(())
    } else {
        Err(ServiceError::BadRequest(format!("unsupported schema version {v:?}, expected {VERSION:?}")))
    }
}

fn created(session: &Session) -> SessionCreated {
    SessionCreated {
        v: VERSION.into(),
        id: session.id.clone(),
        mode: session.mode,
        state: session.state(),
        tick_rate: session.setup().sim.tick_rate,
        block_size: carefulbot::experiment::BLOCK_SIZE,
        trials: session.slots(),
        calibration: session.setup().calibration,
    }
}

async fn create(State(app): State<AppState>, Json(req): Json<CreateSession>) -> ServiceResult<(StatusCode, Json<SessionCreated>)> {
    check_version(&req.v)?;
    let config = app.config();
    let setup = config.setup.clone();
    let id = uuid::Uuid::new_v4().simple().to_string();
    let seed = req.seed.unwrap_or_else(|| derive_seed(config.study.seed, "session", req.participant as u64));
    let session = match req.mode {
        Mode::Live => Session::live(id.clone(), req.participant, seed, setup),
        Mode::Scripted => {
            let params = config.study.participant_params(req.participant)?;
            let inputs = SessionInputs {
                schedule: &setup.schedule,
                profiles: &setup.profiles,
                sim: &setup.sim,
                classifier: &setup.classifier,
            };
            let output = run_session(inputs, &params, req.participant, seed)?;
            Session::scripted(id.clone(), req.participant, seed, setup.clone(), output)
        }
    };
    let body = created(&session);
    config.store.create(&body)?;
    if session.mode == Mode::Scripted {
        for trace in session.traces() {
            config.store.write_trace(&id, trace)?;
        }
        config.store.write_report(&id, session.report()?)?;
    }
    let slot = Arc::new(Mutex::new(Slot {
        session,
        streaming: false,
    }));
    app.0.sessions.lock().expect("session table poisoned").insert(id, slot);
    Ok((StatusCode::CREATED, Json(body)))
}

async fn wrist(State(app): State<AppState>, Path(id): Path<String>, Json(batch): Json<WristBatch>) -> ServiceResult<Json<WristAck>> {
    check_version(&batch.v)?;
    let slot = app.slot(&id)?;
    let mut slot = slot.lock().expect("session poisoned");
    Ok(Json(slot.session.ingest_wrist(&batch.samples)?))
}

async fn decision(State(app): State<AppState>, Path(id): Path<String>, Json(d): Json<Decision>) -> ServiceResult<Json<DecisionAck>> {
    check_version(&d.v)?;
    let slot = app.slot(&id)?;
    let mut slot = slot.lock().expect("session poisoned");
    Ok(Json(slot.session.decide(d.trial_idx, d.zone)?))
}

async fn report(State(app): State<AppState>, Path(id): Path<String>) -> ServiceResult<Response> {
    let slot = app.slot(&id)?;
    let slot = slot.lock().expect("session poisoned");
    let json = slot.session.report()?.to_json()?;
    Ok(([(header::CONTENT_TYPE, "application/json")], json).into_response())
}

async fn stream(State(app): State<AppState>, Path(id): Path<String>, ws: WebSocketUpgrade) -> ServiceResult<Response> {
    let slot = app.slot(&id)?;
    {
        let mut s = slot.lock().expect("session poisoned");
        if s.streaming {
            return Err(ServiceError::Conflict(format!("session {id} already has a stream")));
        }
        s.streaming = true;
    }
    Ok(ws.on_upgrade(move |socket| async move {
        run_stream(&app, &id, &slot, socket).await;
        slot.lock().expect("session poisoned").streaming = false;
    }))
}

async fn send_all(socket: &mut WebSocket, messages: &[ServerMessage]) -> bool {
    for m in messages {
        let text = serde_json::to_string(m).expect("server messages serialize");
        if socket.send(Message::Text(text.into())).await.is_err() {
            return false;
        }
    }
    true
}

/// Tick one session's engine while the client stays connected.
async fn run_stream(app: &AppState, id: &str, slot: &Mutex<Slot>, mut socket: WebSocket) {
    let replay = {
        let s = slot.lock().expect("session poisoned");
        (s.session.mode == Mode::Scripted).then(|| s.session.replay().to_vec())
    };
    if let Some(messages) = replay {
        send_all(&mut socket, &messages).await;
        let _ = socket.send(Message::Close(None)).await;
        return;
    }

    let mut interval = tokio::time::interval(app.config().tick_interval);
    loop {
        tokio::select! {
            _ = interval.tick() => {
                let (messages, done) = match step(app, id, slot) {
                    Ok(r) => r,
                    Err(e) => {
                        let _ = socket.send(Message::Close(Some(axum::extract::ws::CloseFrame {
                            code: 1011,
                            reason: e.to_string().into(),
                        }))).await;
                        return;
                    }
                };
                if !send_all(&mut socket, &messages).await {
                    return;
                }
                if done {
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
            }
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    let reply = match serde_json::from_str::<ClientMessage>(&text) {
                        Ok(ClientMessage::Wrist { v, samples }) => check_version(&v)
                            .and_then(|()| slot.lock().expect("session poisoned").session.ingest_wrist(&samples))
                            .err(),
                        Err(e) => Some(ServiceError::BadRequest(format!("bad client message: {e}"))),
                    };
                    if let Some(e) = reply {
                        let body = crate::protocol::ErrorBody { v: VERSION.into(), code: e.code().into(), error: e.to_string() };
                        let text = serde_json::to_string(&body).expect("error bodies serialize");
                        if socket.send(Message::Text(text.into())).await.is_err() {
                            return;
                        }
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

/// One tick under the session lock, persisting finished trials.
fn step(app: &AppState, id: &str, slot: &Mutex<Slot>) -> ServiceResult<(Vec<ServerMessage>, bool)> {
    let mut s = slot.lock().expect("session poisoned");
    let messages = s.session.tick()?;
    let store = &app.config().store;
    let mut done = false;
    for m in &messages {
        match m {
            ServerMessage::TrialEnd { .. } => {
                let trace = s.session.traces().last().expect("a finished trial has a trace");
                store.write_trace(id, trace)?;
            }
            ServerMessage::Done { .. } => {
                store.write_report(id, s.session.report()?)?;
                done = true;
            }
            _ => {}
        }
    }
    Ok((messages, done))
}
