use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use slowbeat_core::sim::PlayerModel;
use slowbeat_session::block::{logged_inputs, run_block, run_script, Input, SimParticipant, TimedInput};
use slowbeat_session::config::{BlockConfig, BlockDefaults, Condition};
use slowbeat_session::log::{BlockRecord, LogEvent, LogHeader, SessionEvent};
use slowbeat_session::population::{BlockPhysiology, ParticipantProfile, PopulationParams, ProbeModel};
use slowbeat_session::serve::{serve_on, ServeConfig};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio_tungstenite::tungstenite::Message;

fn defaults() -> BlockDefaults {
    BlockDefaults { duration_s: 60.0, probe_gap_s: (8.0, 12.0), ..Default::default() }
}

async fn start_server(virtual_clock: bool) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve_on(listener, ServeConfig { blocks: defaults(), virtual_clock }));
    addr.to_string()
}

type Sink = futures_util::stream::SplitSink<
    tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<TcpStream>>,
    Message,
>;

/// Connects and drains incoming frames into a channel so the server never
/// blocks on a full socket.
async fn connect(addr: &str) -> (Sink, mpsc::UnboundedReceiver<Value>) {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    let (sink, mut stream) = ws.split();
    let (tx, rx) = mpsc::unbounded_channel();
    tokio::spawn(async move {
        while let Some(Ok(m)) = stream.next().await {
            if let Message::Text(t) = m {
                let _ = tx.send(serde_json::from_str::<Value>(&t).unwrap());
            }
        }
    });
    (sink, rx)
}

async fn send(sink: &mut Sink, v: Value) {
    sink.send(Message::Text(v.to_string().into())).await.unwrap();
}

async fn wait_for(rx: &mut mpsc::UnboundedReceiver<Value>, kind: &str) -> Value {
    let deadline = tokio::time::sleep(Duration::from_secs(20));
    tokio::pin!(deadline);
    loop {
        tokio::select! {
            v = rx.recv() => {
                let v = v.expect("connection closed");
                if v["type"] == kind {
                    return v;
                }
            }
            _ = &mut deadline => panic!("no {kind} frame"),
        }
    }
}

async fn get(addr: &str, path: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).await.unwrap();
    s.write_all(format!("GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").as_bytes())
        .await
        .unwrap();
    let mut buf = String::new();
    s.read_to_string(&mut buf).await.unwrap();
    let status = buf[9..12].parse().unwrap();
    let body = buf.split_once("\r\n\r\n").map(|x| x.1.to_string()).unwrap_or_default();
    (status, body)
}

async fn last_record(addr: &str) -> BlockRecord {
    for _ in 0..200 {
        let (status, body) = get(addr, "/records/last").await;
        if status == 200 {
            return BlockRecord::from_jsonl(&body).unwrap();
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    panic!("no record stored");
}

fn header(c: Condition, seed: u64) -> LogHeader {
    LogHeader {
        participant: None,
        config: BlockConfig::new(c, seed, &defaults()),
        physiology: BlockPhysiology::nominal(c),
        signals: Default::default(),
    }
}

fn input_message(i: &TimedInput) -> Value {
    match i.input {
        // the client time is advisory and must not matter
        Input::Press { cell } => json!({"type": "press", "cell": cell, "t": -1.0}),
        Input::Validate => json!({"type": "validate"}),
        Input::Pedal => json!({"type": "pedal"}),
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn scripted_client_matches_headless_run() {
    let sim = SimParticipant {
        player: PlayerModel::default(),
        probe: ProbeModel { rt_mean_ms: 900.0, rt_cv: 0.3, omission_prob: 0.0, stress_omission_prob: 0.0 },
        seed: 4,
    };
    let headless = run_block(header(Condition::DSGR, 21), &sim, None, false).unwrap();
    let script = logged_inputs(&headless.record);
    assert!(script.len() > 20);
    let profile = ParticipantProfile::draw(0, &PopulationParams::default(), 9).unwrap();
    let q = profile.questionnaire(Condition::DSGR);
    let expected = run_script(header(Condition::DSGR, 21), &script, None, Some(q)).unwrap().record;

    let addr = start_server(true).await;
    let (mut sink, mut rx) = connect(&addr).await;
    send(&mut sink, json!({"type": "start", "condition": "DSGR", "seed": 21})).await;
    for i in &script {
        send(&mut sink, json!({"type": "advance", "t": i.t})).await;
        send(&mut sink, input_message(i)).await;
    }
    send(&mut sink, json!({"type": "advance", "t": 60.0})).await;
    let closed = wait_for(&mut rx, "closed").await;
    assert_eq!(closed["complete"], true);
    let mut qv = serde_json::to_value(q).unwrap();
    qv["type"] = json!("questionnaire");
    send(&mut sink, qv).await;
    send(&mut sink, json!({"type": "advance", "t": 61.0})).await;
    wait_for(&mut rx, "error").await;

    let served = last_record(&addr).await;
    assert_eq!(served, expected);
    let mut without_q = served.clone();
    without_q.events.retain(|e| !matches!(e, LogEvent::Session(SessionEvent::Questionnaire { .. })));
    assert_eq!(without_q, headless.record);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn second_connection_is_refused() {
    let addr = start_server(true).await;
    let (_first, _rx) = connect(&addr).await;
    let err = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap_err();
    match err {
        tokio_tungstenite::tungstenite::Error::Http(resp) => assert_eq!(resp.status().as_u16(), 409),
        other => panic!("unexpected error {other}"),
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn disconnect_leaves_incomplete_block() {
    let addr = start_server(true).await;
    let (status, _) = get(&addr, "/records/last").await;
    assert_eq!(status, 404);
    {
        let (mut sink, mut rx) = connect(&addr).await;
        send(&mut sink, json!({"type": "start", "condition": "DSG", "seed": 2})).await;
        send(&mut sink, json!({"type": "advance", "t": 10.0})).await;
        send(&mut sink, json!({"type": "press", "cell": [1, 1]})).await;
        wait_for(&mut rx, "snapshot").await;
        sink.close().await.unwrap();
    }
    let rec = last_record(&addr).await;
    assert!(!rec.complete());
    assert_eq!(rec.events.last().unwrap().t(), 10.0);
    assert!(rec.is_sorted());
    // the slot is free again
    let (mut sink, mut rx) = connect(&addr).await;
    send(&mut sink, json!({"type": "start", "condition": "EG"})).await;
    wait_for(&mut rx, "snapshot").await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn malformed_messages_get_error_frames() {
    let addr = start_server(true).await;
    let (mut sink, mut rx) = connect(&addr).await;
    for bad in ["{not json", r#"{"type":"jump"}"#, r#"{"type":"press","cell":"a1"}"#] {
        sink.send(Message::Text(bad.into())).await.unwrap();
        let e = wait_for(&mut rx, "error").await;
        assert!(e["message"].as_str().unwrap().contains("malformed"));
    }
    send(&mut sink, json!({"type": "pedal"})).await;
    wait_for(&mut rx, "error").await;
    send(&mut sink, json!({"type": "start", "condition": "DG", "seed": 1})).await;
    send(&mut sink, json!({"type": "advance", "t": 5.0})).await;
    send(&mut sink, json!({"type": "advance", "t": 4.0})).await;
    wait_for(&mut rx, "error").await;
    send(&mut sink, json!({"type": "advance", "t": 6.0})).await;
    // every message is answered by a snapshot; the last one shows the clock at 6 s
    let mut snap = wait_for(&mut rx, "snapshot").await;
    while snap["t"] != 6.0 {
        assert!(snap["t"].as_f64().unwrap() <= 5.0);
        snap = wait_for(&mut rx, "snapshot").await;
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn real_time_mode_streams_snapshots_and_triggers() {
    let addr = start_server(false).await;
    let (mut sink, mut rx) = connect(&addr).await;
    send(&mut sink, json!({"type": "start", "condition": "DSGR", "seed": 3})).await;
    wait_for(&mut rx, "snapshot").await;
    let t0 = tokio::time::Instant::now();
    let (mut snaps, mut vibes, mut beats) = (0, 0, 0);
    while t0.elapsed() < Duration::from_secs(4) {
        if let Ok(Some(v)) = tokio::time::timeout(Duration::from_millis(100), rx.recv()).await {
            match v["type"].as_str().unwrap() {
                "snapshot" => snaps += 1,
                "vibe" => vibes += 1,
                "beat" => beats += 1,
                _ => {}
            }
        }
    }
    assert!(snaps >= 4 * 30, "{snaps} snapshots in 4 s");
    assert!(beats >= 3, "{beats} beats");
    assert!(vibes >= 1, "{vibes} triggers");
    send(&mut sink, json!({"type": "stop"})).await;
    let closed = wait_for(&mut rx, "closed").await;
    assert_eq!(closed["complete"], false);
    let rec = last_record(&addr).await;
    assert!(!rec.complete());
    assert!(rec.events.last().unwrap().t() >= 4.0);
}
