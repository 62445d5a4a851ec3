//! Live tether service.
//!
//! One task owns the [`VehicleSession`] and is the only writer of vehicle
//! state. Connection handlers talk to it through a bounded command queue and
//! receive every tick from a bounded broadcast; slow clients skip ticks rather
//! than buffering them.
//!
//! * Raw clients (TCP) exchange binary frames. Any framing error, CRC error or
//!   non-command message from a client closes that connection.
//! * Dashboard clients (WebSocket at `/ws`) exchange [`JsonMessage`] text.
//!   Anything other than a `command` object closes that connection.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{CloseFrame, Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use rov_core::harness::{Scenario, ScriptEntry};
use rov_core::session::{CommandOutcome, SessionError, VehicleSession};
use rov_core::telemetry::json::{JsonMessage, TelemetryJson};
use rov_core::telemetry::{encode_frame, CommandMessage, Message, StreamDecoder, MAX_PAYLOAD};
use rov_core::CONTROL_DT;
use thiserror::Error;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, watch};
use tokio::task::JoinHandle;

pub const DEFAULT_TCP_PORT: u16 = 7700;
pub const DEFAULT_WS_PORT: u16 = 7780;
/// Ticks a client may fall behind before it starts skipping.
pub const BROADCAST_CAPACITY: usize = 256;
pub const COMMAND_QUEUE: usize = 1024;

/// WebSocket close code for a policy violation.
const WS_POLICY: u16 = 1008;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("task failed: {0}")]
    Join(#[from] tokio::task::JoinError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pace {
    /// Tick as fast as the loop allows.
    Free,
    /// Lock ticks to the wall clock at the given period.
    Realtime(Duration),
}

impl Pace {
    pub fn realtime() -> Self {
        Pace::Realtime(Duration::from_secs_f64(CONTROL_DT))
    }
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub tcp_addr: SocketAddr,
    pub ws_addr: SocketAddr,
    /// Vehicle, noise and link settings; the script is replayed at its
    /// simulated times and `duration` is ignored.
    pub scenario: Scenario,
    pub pace: Pace,
}

impl ServeConfig {
    pub fn localhost(tcp_port: u16, ws_port: u16, scenario: Scenario, pace: Pace) -> Self {
        Self {
            tcp_addr: SocketAddr::from(([127, 0, 0, 1], tcp_port)),
            ws_addr: SocketAddr::from(([127, 0, 0, 1], ws_port)),
            scenario,
            pace,
        }
    }
}

/// Everything produced by one tick, shared by all clients.
#[derive(Debug)]
pub struct TickBroadcast {
    /// Downlink bytes as delivered by the tether, plus any log frames.
    pub raw: Vec<u8>,
    /// JSON mirror of every message in `raw`, in the same order.
    pub json: Vec<String>,
}

type Outbound = broadcast::Sender<Arc<TickBroadcast>>;

#[derive(Clone)]
struct Shared {
    commands: mpsc::Sender<CommandMessage>,
    outbound: Outbound,
    shutdown: watch::Receiver<bool>,
}

pub struct ServerHandle {
    pub tcp_addr: SocketAddr,
    pub ws_addr: SocketAddr,
    shutdown: watch::Sender<bool>,
    sim: JoinHandle<Result<(), SessionError>>,
    listeners: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    /// Stops the loop and every listener. Returns the loop's result.
    pub async fn shutdown(self) -> Result<(), ServerError> {
        let _ = self.shutdown.send(true);
        let result = self.sim.await?;
        for l in self.listeners {
            l.await?;
        }
        Ok(result?)
    }

    /// Runs until `signal` fires or the loop stops on its own.
    pub async fn run_until(
        mut self,
        signal: impl std::future::Future<Output = ()>,
    ) -> Result<(), ServerError> {
        tokio::select! {
            _ = signal => {}
            r = &mut self.sim => {
                let _ = self.shutdown.send(true);
                for l in self.listeners {
                    l.await?;
                }
                return Ok(r??);
            }
        }
        self.shutdown().await
    }
}

/// Binds both listeners and starts the simulation loop.
pub async fn serve(config: ServeConfig) -> Result<ServerHandle, ServerError> {
    config
        .scenario
        .validate()
        .map_err(|e| ServerError::Scenario(e.to_string()))?;
    let session = VehicleSession::new(config.scenario.session_config())
        .map_err(|e| ServerError::Scenario(e.to_string()))?;

    let tcp = TcpListener::bind(config.tcp_addr)
        .await
        .map_err(|source| ServerError::Bind {
            addr: config.tcp_addr,
            source,
        })?;
    let ws = TcpListener::bind(config.ws_addr)
        .await
        .map_err(|source| ServerError::Bind {
            addr: config.ws_addr,
            source,
        })?;
    let tcp_addr = tcp.local_addr().map_err(|source| ServerError::Bind {
        addr: config.tcp_addr,
        source,
    })?;
    let ws_addr = ws.local_addr().map_err(|source| ServerError::Bind {
        addr: config.ws_addr,
        source,
    })?;

    let (shutdown_tx, shutdown_rx) = watch::channel(false);
    let (cmd_tx, cmd_rx) = mpsc::channel(COMMAND_QUEUE);
    let (out_tx, _) = broadcast::channel(BROADCAST_CAPACITY);
    let shared = Shared {
        commands: cmd_tx,
        outbound: out_tx.clone(),
        shutdown: shutdown_rx.clone(),
    };

    let sim = tokio::spawn(sim_loop(
        session,
        config.scenario.script.clone(),
        config.pace,
        cmd_rx,
        out_tx,
        shutdown_rx,
    ));
    let tcp_task = tokio::spawn(tcp_accept(tcp, shared.clone()));
    let ws_task = tokio::spawn(ws_serve(ws, shared));
    log::info!("raw tether on {tcp_addr}, dashboard bridge on ws://{ws_addr}/ws");

    Ok(ServerHandle {
        tcp_addr,
        ws_addr,
        shutdown: shutdown_tx,
        sim,
        listeners: vec![tcp_task, ws_task],
    })
}

fn log_frame(text: &str) -> Option<(Vec<u8>, String)> {
    let mut end = text.len().min(MAX_PAYLOAD);
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    let text = &text[..end];
    let raw = encode_frame(&Message::Log(text.to_string())).ok()?;
    Some((
        raw,
        JsonMessage::Log {
            text: text.to_string(),
        }
        .to_text(),
    ))
}

async fn sim_loop(
    mut session: VehicleSession,
    script: Vec<ScriptEntry>,
    pace: Pace,
    mut commands: mpsc::Receiver<CommandMessage>,
    outbound: Outbound,
    mut shutdown: watch::Receiver<bool>,
) -> Result<(), SessionError> {
    let mut interval = match pace {
        Pace::Realtime(period) => {
            let mut i = tokio::time::interval(period);
            i.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            Some(i)
        }
        Pace::Free => None,
    };
    let mut script = script.into_iter().peekable();
    let mut script_seq = 0u32;
    let mut surface = StreamDecoder::new();

    loop {
        match interval.as_mut() {
            Some(i) => {
                tokio::select! {
                    _ = i.tick() => {}
                    _ = shutdown.changed() => return Ok(()),
                }
            }
            None => {
                tokio::task::yield_now().await;
                if *shutdown.borrow() {
                    return Ok(());
                }
            }
        }

        let now = session.state().t;
        while let Some(entry) = script.next_if(|e| e.at <= now + 1e-9) {
            script_seq = script_seq.wrapping_add(1);
            if let Err(e) = session.submit(&CommandMessage::new(script_seq, entry.command)) {
                log::warn!("script command at {}: {e}", entry.at);
            }
        }
        // Arrival order is application order.
        while let Ok(cmd) = commands.try_recv() {
            if let Err(e) = session.submit(&cmd) {
                log::warn!("dropping unencodable command {cmd:?}: {e}");
            }
        }

        let out = match session.tick() {
            Ok(out) => out,
            Err(e) => {
                log::error!("simulation stopped: {e}");
                if let Some((raw, json)) = log_frame(&format!("simulation stopped: {e}")) {
                    let _ = outbound.send(Arc::new(TickBroadcast {
                        raw,
                        json: vec![json],
                    }));
                }
                return Err(e);
            }
        };

        let truth = session.truth();
        let mut raw = out.downlink.clone();
        let mut json: Vec<String> = surface
            .push(&out.downlink)
            .messages
            .into_iter()
            .filter_map(|m| match m {
                Message::Telemetry(frame) => Some(
                    JsonMessage::Telemetry(TelemetryJson {
                        frame,
                        truth: Some(truth),
                    })
                    .to_text(),
                ),
                _ => None,
            })
            .collect();
        for c in &out.commands {
            if let CommandOutcome::Rejected(cmd, why) = c {
                let text = format!(
                    "rejected {} seq {}: {why}",
                    cmd.command.kind_name(),
                    cmd.seq
                );
                log::info!("{text}");
                if let Some((r, j)) = log_frame(&text) {
                    raw.extend(r);
                    json.push(j);
                }
            }
        }
        if !raw.is_empty() || !json.is_empty() {
            // No receivers is fine: the tick is simply dropped.
            let _ = outbound.send(Arc::new(TickBroadcast { raw, json }));
        }
    }
}

async fn tcp_accept(listener: TcpListener, shared: Shared) {
    let mut shutdown = shared.shutdown.clone();
    loop {
        tokio::select! {
            _ = shutdown.changed() => return,
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    log::info!("raw client {peer} connected");
                    tokio::spawn(tcp_client(stream, peer, shared.clone()));
                }
                Err(e) => log::warn!("accept failed: {e}"),
            },
        }
    }
}

async fn tcp_client(stream: TcpStream, peer: SocketAddr, shared: Shared) {
    let _ = stream.set_nodelay(true);
    let (mut reader, mut writer) = stream.into_split();
    let mut ticks = shared.outbound.subscribe();
    let mut shutdown = shared.shutdown;
    let mut decoder = StreamDecoder::new();
    let mut buf = [0u8; 1024];
    let reason = loop {
        tokio::select! {
            _ = shutdown.changed() => break "server shutdown".to_string(),
            n = reader.read(&mut buf) => {
                let n = match n {
                    Ok(0) => break "client closed".to_string(),
                    Ok(n) => n,
                    Err(e) => break format!("read error: {e}"),
                };
                let out = decoder.push(&buf[..n]);
                if let Some(err) = out.errors.first() {
                    break format!("malformed input: {:?}", err.kind);
                }
                let mut bad = None;
                for m in out.messages {
                    match m {
                        Message::Command(cmd) => {
                            if shared.commands.send(cmd).await.is_err() {
                                bad = Some("simulation stopped".to_string());
                                break;
                            }
                        }
                        other => {
                            bad = Some(format!("unexpected {:?} from client", other.msg_type()));
                            break;
                        }
                    }
                }
                if let Some(reason) = bad {
                    break reason;
                }
            }
            tick = ticks.recv() => match tick {
                Ok(tick) => {
                    if tick.raw.is_empty() {
                        continue;
                    }
                    if let Err(e) = writer.write_all(&tick.raw).await {
                        break format!("write error: {e}");
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => log::debug!("{peer} skipped {n} ticks"),
                Err(broadcast::error::RecvError::Closed) => break "simulation stopped".to_string(),
            },
        }
    };
    log::info!("raw client {peer} disconnected: {reason}");
}

async fn ws_serve(listener: TcpListener, shared: Shared) {
    let mut shutdown = shared.shutdown.clone();
    let app = Router::new()
        .route("/ws", get(ws_upgrade))
        .with_state(shared);
    let result = axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            let _ = shutdown.wait_for(|stop| *stop).await;
        })
        .await;
    if let Err(e) = result {
        log::error!("dashboard bridge failed: {e}");
    }
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(shared): State<Shared>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| ws_client(socket, shared))
}

async fn ws_client(mut socket: WebSocket, shared: Shared) {
    let mut ticks = shared.outbound.subscribe();
    let mut shutdown = shared.shutdown;
    let close = |reason: String| {
        WsMessage::Close(Some(CloseFrame {
            code: WS_POLICY,
            reason: reason.into(),
        }))
    };
    let reason = loop {
        tokio::select! {
            _ = shutdown.changed() => {
                let _ = socket.send(WsMessage::Close(None)).await;
                break "server shutdown".to_string();
            }
            incoming = socket.recv() => {
                let text = match incoming {
                    None | Some(Ok(WsMessage::Close(_))) => break "client closed".to_string(),
                    Some(Err(e)) => break format!("receive error: {e}"),
                    Some(Ok(WsMessage::Text(t))) => t,
                    Some(Ok(WsMessage::Ping(_) | WsMessage::Pong(_))) => continue,
                    Some(Ok(WsMessage::Binary(_))) => {
                        let _ = socket.send(close("binary frames are not accepted".into())).await;
                        break "binary frame".to_string();
                    }
                };
                match JsonMessage::parse(text.as_str()) {
                    Ok(JsonMessage::Command(cmd)) => {
                        if shared.commands.send(cmd).await.is_err() {
                            break "simulation stopped".to_string();
                        }
                    }
                    Ok(_) => {
                        let _ = socket.send(close("only command messages are accepted".into())).await;
                        break "non-command message".to_string();
                    }
                    Err(e) => {
                        let _ = socket.send(close(format!("malformed JSON: {e}"))).await;
                        break format!("malformed JSON: {e}");
                    }
                }
            }
            tick = ticks.recv() => match tick {
                Ok(tick) => {
                    let mut failed = None;
                    for text in &tick.json {
                        if let Err(e) = socket.send(WsMessage::Text(text.as_str().into())).await {
                            failed = Some(format!("send error: {e}"));
                            break;
                        }
                    }
                    if let Some(reason) = failed {
                        break reason;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => log::debug!("dashboard skipped {n} ticks"),
                Err(broadcast::error::RecvError::Closed) => break "simulation stopped".to_string(),
            },
        }
    };
    log::info!("dashboard client disconnected: {reason}");
}
