use std::collections::BTreeMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use log::{debug, info, warn};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, watch};
use tokio_tungstenite::tungstenite::Message as WsMessage;

use super::core::{ConnId, Effects, Outbound, ServerCore};
use super::Cadence;
use crate::protocol::{decode_bytes, encode, ProtocolError};
use crate::scene::{load_scene_file, SceneError};
use crate::session::{Session, SessionConfig, SessionError, Snapshot};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("invalid server config: {0}")]
    Config(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub addr: SocketAddr,
    pub scene_path: PathBuf,
    pub session: SessionConfig,
    pub tick_hz: f64,
    /// Write the final snapshot here on shutdown.
    pub snapshot_on_exit: Option<PathBuf>,
    /// Print reliable events to stdout as JSON lines.
    pub log_events: bool,
}

impl ServerConfig {
    pub fn new(addr: SocketAddr, scene_path: impl Into<PathBuf>) -> Self {
        Self {
            addr,
            scene_path: scene_path.into(),
            session: SessionConfig::default(),
            tick_hz: 60.0,
            snapshot_on_exit: None,
            log_events: true,
        }
    }

    pub fn validate(&self) -> Result<(), ServerError> {
        let fanout = self.session.pose_fanout_hz;
        if !(fanout > 0.0 && fanout.is_finite()) {
            return Err(ServerError::Config(format!("fanout rate must be positive, got {fanout}")));
        }
        if !(self.tick_hz.is_finite() && self.tick_hz >= fanout) {
            return Err(ServerError::Config(format!("tick rate {} must be at least the fanout rate {fanout}", self.tick_hz)));
        }
        self.session.validate()?;
        Ok(())
    }
}

/// Idempotent stop signal for a running [`Server`].
#[derive(Debug, Clone)]
pub struct ShutdownHandle(Arc<watch::Sender<bool>>);

impl ShutdownHandle {
    pub fn trigger(&self) {
        self.0.send_replace(true);
    }
}

#[derive(Debug, Clone)]
pub struct ServerReport {
    pub final_snapshot: Snapshot,
}

enum Input {
    Open(ConnId, mpsc::UnboundedSender<Outgoing>),
    Frame(ConnId, Result<crate::protocol::Message, ProtocolError>),
    Closed(ConnId),
}

enum Outgoing {
    Text(String),
    Close,
}

pub struct Server {
    listener: TcpListener,
    core: ServerCore,
    config: ServerConfig,
    stop_tx: Arc<watch::Sender<bool>>,
}

impl Server {
    pub async fn bind(config: ServerConfig) -> Result<Self, ServerError> {
        config.validate()?;
        let scene = load_scene_file(&config.scene_path)?;
        let session = Session::new(scene, config.session.clone())?;
        let listener = TcpListener::bind(config.addr).await?;
        info!("listening on {}", listener.local_addr()?);
        let (stop_tx, _) = watch::channel(false);
        Ok(Self { listener, core: ServerCore::new(session), config, stop_tx: Arc::new(stop_tx) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    pub fn shutdown_handle(&self) -> ShutdownHandle {
        ShutdownHandle(self.stop_tx.clone())
    }

    /// Runs until the shutdown handle fires.
    pub async fn run(self) -> Result<ServerReport, ServerError> {
        let Server { listener, mut core, config, stop_tx } = self;
        let (in_tx, mut in_rx) = mpsc::unbounded_channel::<Input>();
        let mut stop_rx = stop_tx.subscribe();
        let mut accept_stop = stop_tx.subscribe();

        let acceptor = tokio::spawn(async move {
            let mut next_id = 0u64;
            loop {
                tokio::select! {
                    res = listener.accept() => match res {
                        Ok((stream, peer)) => {
                            next_id += 1;
                            debug!("connection {next_id} from {peer}");
                            tokio::spawn(connection(ConnId(next_id), stream, in_tx.clone()));
                        }
                        Err(e) => warn!("accept failed: {e}"),
                    },
                    _ = accept_stop.changed() => break,
                }
            }
        });

        let epoch = Instant::now();
        let now = || epoch.elapsed().as_secs_f64();
        let mut writers: BTreeMap<ConnId, mpsc::UnboundedSender<Outgoing>> = BTreeMap::new();
        let mut ticker = tokio::time::interval(Duration::from_secs_f64(1.0 / config.tick_hz));
        ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        let mut fanout = Cadence::new(0.0, config.session.pose_fanout_hz);

        while !*stop_rx.borrow() {
            let fx = tokio::select! {
                input = in_rx.recv() => match input {
                    Some(Input::Open(conn, tx)) => {
                        writers.insert(conn, tx);
                        core.connect(conn);
                        Effects::default()
                    }
                    Some(Input::Frame(conn, frame)) => core.handle_frame(conn, frame, now()),
                    Some(Input::Closed(conn)) => {
                        writers.remove(&conn);
                        core.disconnect(conn, now())
                    }
                    None => Effects::default(),
                },
                _ = ticker.tick() => {
                    let t = now();
                    let mut fx = core.tick(t);
                    if fanout.poll(t) {
                        let more = core.fanout(t);
                        fx.outbound.extend(more.outbound);
                        fx.events.extend(more.events);
                    }
                    fx
                }
                _ = stop_rx.changed() => Effects::default(),
            };
            apply(fx, &mut writers, config.log_events);
        }

        let (fx, snapshot) = core.shutdown(now());
        apply(fx, &mut writers, config.log_events);
        drop(writers);
        acceptor.abort();
        let snapshot = snapshot.expect("first shutdown yields a snapshot");
        if let Some(path) = &config.snapshot_on_exit {
            std::fs::write(path, snapshot.to_json() + "\n")?;
            info!("wrote snapshot to {}", path.display());
        }
        // Give writer tasks a moment to flush the goodbye frames.
        tokio::time::sleep(Duration::from_millis(50)).await;
        Ok(ServerReport { final_snapshot: snapshot })
    }
}

fn apply(fx: Effects, writers: &mut BTreeMap<ConnId, mpsc::UnboundedSender<Outgoing>>, log_events: bool) {
    for out in fx.outbound {
        match out {
            Outbound::Send(conn, msg) => match encode(&msg) {
                Ok(text) => {
                    if let Some(tx) = writers.get(&conn) {
                        let _ = tx.send(Outgoing::Text(text));
                    }
                }
                Err(e) => warn!("dropping unencodable {}: {e}", msg.type_name()),
            },
            Outbound::Close(conn) => {
                if let Some(tx) = writers.remove(&conn) {
                    let _ = tx.send(Outgoing::Close);
                }
            }
        }
    }
    if log_events && !fx.events.is_empty() {
        let mut out = std::io::stdout().lock();
        for ev in &fx.events {
            let _ = writeln!(out, "{}", ev.to_json_line());
        }
        let _ = out.flush();
    }
}

async fn connection(conn: ConnId, stream: TcpStream, inbox: mpsc::UnboundedSender<Input>) {
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            debug!("handshake failed for {conn:?}: {e}");
            return;
        }
    };
    let (mut sink, mut source) = ws.split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel();
    if inbox.send(Input::Open(conn, out_tx)).is_err() {
        return;
    }
    let writer = tokio::spawn(async move {
        while let Some(out) = out_rx.recv().await {
            match out {
                Outgoing::Text(text) => {
                    if sink.send(WsMessage::text(text)).await.is_err() {
                        break;
                    }
                }
                Outgoing::Close => {
                    let _ = sink.send(WsMessage::Close(None)).await;
                    break;
                }
            }
        }
        let _ = sink.close().await;
    });
    while let Some(frame) = source.next().await {
        let decoded = match frame {
            Ok(WsMessage::Text(text)) => decode_bytes(text.as_bytes()),
            Ok(WsMessage::Binary(bytes)) => decode_bytes(&bytes),
            Ok(WsMessage::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        if inbox.send(Input::Frame(conn, decoded)).is_err() {
            break;
        }
    }
    let _ = inbox.send(Input::Closed(conn));
    let _ = writer.await;
}

/// Blocking entry point: serves until ctrl-c.
pub fn serve(config: ServerConfig) -> Result<ServerReport, ServerError> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let server = Server::bind(config).await?;
        let stop = server.shutdown_handle();
        tokio::spawn(async move {
            if tokio::signal::ctrl_c().await.is_ok() {
                info!("interrupt received, shutting down");
            }
            stop.trigger();
        });
        server.run().await
    })
}
