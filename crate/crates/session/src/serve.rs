//! Live session service: one participant console over a websocket at `/ws`.
//!
//! Client messages (JSON, tagged by `"type"`):
//!
//! | message | effect |
//! |---|---|
//! | `{"type":"start","condition":"DSGR","seed":7}` | opens a block (`participant`, `physiology` optional) |
//! | `{"type":"press","cell":[r,c]}` | grid button |
//! | `{"type":"validate"}` | validation button |
//! | `{"type":"pedal"}` | footswitch |
//! | `{"type":"advance","t":12.5}` | moves the virtual clock (virtual-clock mode only) |
//! | `{"type":"questionnaire","tlx":{..},"gew":{..},"bf_efficient":null}` | post-block survey |
//! | `{"type":"stop"}` | ends the block early; it is stored as incomplete |
//!
//! Any `"t"` a client attaches to an input is advisory and ignored: inputs
//! are timed by the engine clock on arrival. The server forwards every log
//! event as it is produced, `{"type":"snapshot","t":..,"view":..}` frames
//! at about 42 Hz in real-time mode (after every message in virtual-clock mode),
//! `{"type":"closed","complete":..}` when a block ends and
//! `{"type":"error","message":..}` for rejected messages. A second
//! concurrent connection is refused with HTTP 409. `GET /records/last`
//! returns the JSONL log of the most recently closed block.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use serde::{Deserialize, Serialize};
use slowbeat_core::game::GaugeView;
use slowbeat_core::time::{from_micros, to_micros, Micros};
use tokio::net::TcpListener;
use tokio::time::Instant;

use crate::block::{BlockSession, Input};
use crate::config::{BlockConfig, BlockDefaults, Condition};
use crate::error::Result;
use crate::log::{BlockRecord, LogEvent, LogHeader, SessionEvent};
use crate::population::{BlockPhysiology, Questionnaire};

const ADVANCE_PERIOD: Duration = Duration::from_millis(8);
/// Snapshots go out every third advance, about 42 Hz.
const SNAPSHOT_EVERY: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServeConfig {
    pub blocks: BlockDefaults,
    /// Clients drive time with `advance` messages instead of the wall clock.
    pub virtual_clock: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Start {
        condition: Condition,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        participant: Option<u32>,
        #[serde(default)]
        physiology: Option<BlockPhysiology>,
    },
    Press {
        cell: [i64; 2],
    },
    Validate,
    Pedal,
    Advance {
        t: f64,
    },
    Questionnaire(Questionnaire),
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage<'a> {
    Snapshot { t: f64, view: &'a GaugeView },
    Closed { t: f64, complete: bool },
    Error { message: String },
}

struct Shared {
    cfg: ServeConfig,
    busy: AtomicBool,
    last: Mutex<Option<BlockRecord>>,
}

/// Clears the busy flag when a connection ends, however it ends.
struct Occupied(Arc<Shared>);

impl Drop for Occupied {
    fn drop(&mut self) {
        self.0.busy.store(false, Ordering::SeqCst);
    }
}

pub fn router(cfg: ServeConfig) -> Router {
    let shared = Arc::new(Shared { cfg, busy: AtomicBool::new(false), last: Mutex::new(None) });
    Router::new()
        .route("/", get(|| async { "slowbeat session service; connect a console to /ws\n" }))
        .route("/ws", get(ws_handler))
        .route("/records/last", get(last_record))
        .with_state(shared)
}

/// Serves until the listener fails.
pub async fn serve_on(listener: TcpListener, cfg: ServeConfig) -> std::io::Result<()> {
    axum::serve(listener, router(cfg)).await
}

pub async fn serve(addr: SocketAddr, cfg: ServeConfig) -> std::io::Result<()> {
    serve_on(TcpListener::bind(addr).await?, cfg).await
}

async fn ws_handler(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> Response {
    if shared.busy.swap(true, Ordering::SeqCst) {
        return (StatusCode::CONFLICT, "a participant session is already active\n").into_response();
    }
    let guard = Occupied(shared.clone());
    ws.on_upgrade(move |socket| async move {
        Connection::new(shared, socket).run().await;
        drop(guard);
    })
}

async fn last_record(State(shared): State<Arc<Shared>>) -> Response {
    match shared.last.lock().expect("poisoned").as_ref() {
        Some(r) => ([("content-type", "application/x-ndjson")], r.to_jsonl()).into_response(),
        None => (StatusCode::NOT_FOUND, "no block recorded yet\n").into_response(),
    }
}

struct Live {
    session: BlockSession,
    started: Instant,
    /// Log events already forwarded.
    sent: usize,
}

struct Connection {
    shared: Arc<Shared>,
    socket: WebSocket,
    live: Option<Live>,
    /// Closed block still accepting its questionnaire.
    closed: Option<BlockRecord>,
    /// Events of a just-closed block not yet forwarded.
    pending: Vec<LogEvent>,
    announce: bool,
    ticks: u32,
}

impl Connection {
    fn new(shared: Arc<Shared>, socket: WebSocket) -> Connection {
        Connection { shared, socket, live: None, closed: None, pending: Vec::new(), announce: false, ticks: 0 }
    }

    async fn run(mut self) {
        let mut clock = tokio::time::interval(ADVANCE_PERIOD);
        clock.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
        loop {
            tokio::select! {
                msg = self.socket.recv() => {
                    let Some(Ok(msg)) = msg else { break };
                    let text = match msg {
                        Message::Text(t) => t.to_string(),
                        Message::Binary(b) => match String::from_utf8(b.to_vec()) {
                            Ok(s) => s,
                            Err(_) => { self.error("binary frame is not UTF-8".into()).await; continue }
                        },
                        Message::Close(_) => break,
                        _ => continue,
                    };
                    let ok = match serde_json::from_str::<ClientMessage>(&text) {
                        Ok(m) => self.handle(m),
                        Err(e) => Err(format!("malformed message: {e}")),
                    };
                    if let Err(m) = ok {
                        self.error(m).await;
                    }
                    if self.flush(self.shared.cfg.virtual_clock).await.is_err() {
                        break;
                    }
                }
                _ = clock.tick(), if !self.shared.cfg.virtual_clock && self.live.is_some() => {
                    let now = self.wall_now();
                    if let Err(m) = self.advance(now) {
                        self.error(m).await;
                    }
                    self.ticks += 1;
                    if self.flush(self.ticks % SNAPSHOT_EVERY == 0).await.is_err() {
                        break;
                    }
                }
            }
        }
        // connection lost: keep whatever was recorded
        if let Some(live) = self.live.take() {
            let t = live.session.now();
            if let Ok(out) = live.session.close(t, None) {
                self.store(out.record);
            }
        }
    }

    fn wall_now(&self) -> Micros {
        self.live.as_ref().map_or(0, |l| l.started.elapsed().as_micros() as Micros)
    }

    /// Engine time for an input arriving now.
    fn input_time(&self) -> Micros {
        let l = self.live.as_ref().expect("checked by caller");
        if self.shared.cfg.virtual_clock {
            l.session.now()
        } else {
            self.wall_now().max(l.session.now())
        }
    }

    fn store(&mut self, record: BlockRecord) {
        *self.shared.last.lock().expect("poisoned") = Some(record.clone());
        self.closed = Some(record);
    }

    fn advance(&mut self, t: Micros) -> std::result::Result<(), String> {
        let Some(live) = self.live.as_mut() else { return Err("no block is running".into()) };
        let t = t.min(live.session.end());
        live.session.advance_to(t).map_err(|e| e.to_string())?;
        if t >= live.session.end() {
            self.close_live(t)?;
        }
        Ok(())
    }

    fn close_live(&mut self, t: Micros) -> std::result::Result<(), String> {
        let mut live = self.live.take().expect("checked by caller");
        live.session.advance_to(t).map_err(|e| e.to_string())?;
        // closing at the clock adds only the block_end line
        self.pending.extend_from_slice(&live.session.events()[live.sent..]);
        let out = live.session.close(t, None).map_err(|e| e.to_string())?;
        self.pending.extend(
            out.record.events.iter().filter(|e| matches!(e, LogEvent::Session(SessionEvent::BlockEnd { .. }))).cloned(),
        );
        self.announce = true;
        self.store(out.record);
        Ok(())
    }

    fn handle(&mut self, m: ClientMessage) -> std::result::Result<(), String> {
        match m {
            ClientMessage::Start { condition, seed, participant, physiology } => {
                if self.live.is_some() {
                    return Err("a block is already running".into());
                }
                let header = LogHeader {
                    participant,
                    config: BlockConfig::new(condition, seed.unwrap_or(0), &self.shared.cfg.blocks),
                    physiology: physiology.unwrap_or_else(|| BlockPhysiology::nominal(condition)),
                    signals: Default::default(),
                };
                let mut session = BlockSession::new(header, false).map_err(|e| e.to_string())?;
                session.start();
                self.closed = None;
                self.live = Some(Live { session, started: Instant::now(), sent: 0 });
                Ok(())
            }
            ClientMessage::Press { cell } => self.input(Input::Press { cell }),
            ClientMessage::Validate => self.input(Input::Validate),
            ClientMessage::Pedal => self.input(Input::Pedal),
            ClientMessage::Advance { t } => {
                if !self.shared.cfg.virtual_clock {
                    return Err("advance is only accepted with a virtual clock".into());
                }
                if !t.is_finite() {
                    return Err(format!("advance to {t}"));
                }
                let now = self.live.as_ref().map(|l| l.session.now()).ok_or("no block is running")?;
                let t = to_micros(t);
                if t < now {
                    return Err(format!("advance to {} s is before the clock at {} s", from_micros(t), from_micros(now)));
                }
                self.advance(t)
            }
            ClientMessage::Questionnaire(answers) => {
                let Some(rec) = self.closed.as_mut() else {
                    return Err("questionnaires are answered after a block ends".into());
                };
                if rec.questionnaire().is_some() {
                    return Err("questionnaire already recorded".into());
                }
                let t = rec.events.last().map_or(0.0, LogEvent::t);
                rec.events.push(LogEvent::Session(SessionEvent::Questionnaire { t, answers }));
                let rec = rec.clone();
                *self.shared.last.lock().expect("poisoned") = Some(rec);
                Ok(())
            }
            ClientMessage::Stop => {
                let now = self.live.as_ref().map(|l| l.session.now()).ok_or("no block is running")?;
                let now = if self.shared.cfg.virtual_clock { now } else { self.wall_now().max(now) };
                self.close_live(now)
            }
        }
    }

    fn input(&mut self, input: Input) -> std::result::Result<(), String> {
        if self.live.is_none() {
            return Err("no block is running".into());
        }
        let t = self.input_time();
        let live = self.live.as_mut().expect("checked");
        if t >= live.session.end() {
            return Err("the block has ended".into());
        }
        live.session.input(t, input).map_err(|e| e.to_string())
    }

    async fn send(&mut self, text: String) -> std::result::Result<(), axum::Error> {
        self.socket.send(Message::Text(text.into())).await
    }

    async fn error(&mut self, message: String) {
        let frame = serde_json::to_string(&ServerMessage::Error { message }).expect("plain data");
        let _ = self.send(frame).await;
    }

    /// Forwards new log events, then a snapshot or the block closure.
    async fn flush(&mut self, snapshot: bool) -> std::result::Result<(), axum::Error> {
        let mut frames = Vec::new();
        for e in std::mem::take(&mut self.pending) {
            frames.push(serde_json::to_string(&e).expect("plain data"));
        }
        if let Some(live) = self.live.as_mut() {
            for e in &live.session.events()[live.sent..] {
                frames.push(serde_json::to_string(e).expect("plain data"));
            }
            live.sent = live.session.events().len();
            if snapshot {
                let view = live.session.view();
                let t = from_micros(live.session.now());
                frames.push(serde_json::to_string(&ServerMessage::Snapshot { t, view: &view }).expect("plain data"));
            }
        }
        if let (true, Some(rec)) = (self.announce, self.closed.as_ref()) {
            self.announce = false;
            let t = rec.events.last().map_or(0.0, LogEvent::t);
            frames.push(serde_json::to_string(&ServerMessage::Closed { t, complete: rec.complete() }).expect("plain data"));
        }
        for f in frames {
            self.send(f).await?;
        }
        Ok(())
    }
}

/// Blocks the calling thread on a multi-threaded runtime serving `addr`.
pub fn serve_blocking(addr: SocketAddr, cfg: ServeConfig) -> Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(serve(addr, cfg))?;
    Ok(())
}
