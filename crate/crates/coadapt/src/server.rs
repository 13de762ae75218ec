//! Websocket transport. Each connection is one session, handled by its own
//! task, so message handling is serialized per session and sessions share
//! nothing but the session counter.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio_tungstenite::tungstenite::Message;

use crate::config::ExperimentConfig;
use crate::logfile::{save_iterates, save_log};
use crate::service::SessionActor;
use crate::wire::{ClientEnvelope, ServerMessage};

pub struct Server {
    config: Arc<ExperimentConfig>,
    out_dir: Option<PathBuf>,
    sessions: AtomicU64,
}

impl Server {
    /// Sessions are written to `out_dir` when they end, if given.
    pub fn new(config: ExperimentConfig, out_dir: Option<PathBuf>) -> crate::Result<Arc<Self>> {
        config.validate()?;
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir).map_err(crate::Error::io(dir))?;
        }
        Ok(Arc::new(Self {
            config: Arc::new(config),
            out_dir,
            sessions: AtomicU64::new(0),
        }))
    }

    pub async fn bind(addr: &str) -> crate::Result<TcpListener> {
        TcpListener::bind(addr)
            .await
            .map_err(|e| crate::Error::Usage(format!("cannot listen on {addr}: {e}")))
    }

    /// Accepts connections until the listener fails.
    pub async fn run(self: Arc<Self>, listener: TcpListener) -> crate::Result<()> {
        loop {
            let (stream, peer) = listener
                .accept()
                .await
                .map_err(|e| crate::Error::Usage(format!("accept failed: {e}")))?;
            let server = Arc::clone(&self);
            tokio::spawn(async move {
                if let Err(e) = server.connection(stream, peer).await {
                    log::warn!("{peer}: {e}");
                }
            });
        }
    }

    async fn connection(&self, stream: TcpStream, peer: SocketAddr) -> crate::Result<()> {
        let ws_err = |e: tokio_tungstenite::tungstenite::Error| crate::Error::Usage(format!("websocket: {e}"));
        let mut ws = tokio_tungstenite::accept_async(stream).await.map_err(ws_err)?;
        let number = self.sessions.fetch_add(1, Ordering::SeqCst);
        let mut actor = SessionActor::new(Arc::clone(&self.config), number)?;
        log::info!("{peer}: session {} opened", actor.id());
        while let Some(frame) = ws.next().await {
            let replies = match frame.map_err(ws_err)? {
                Message::Text(text) => match serde_json::from_str::<ClientEnvelope>(&text) {
                    Ok(env) => actor.handle(env),
                    Err(e) => vec![actor.terminate(format!("malformed message: {e}"))],
                },
                Message::Close(_) => break,
                _ => continue,
            };
            let fatal = replies.iter().any(|r| matches!(r.message, ServerMessage::Error { .. }));
            for reply in replies {
                ws.send(Message::text(serde_json::to_string(&reply)?)).await.map_err(ws_err)?;
            }
            if fatal || actor.is_finished() {
                break;
            }
        }
        let _ = ws.close(None).await;
        log::info!("session {} closed ({:?})", actor.id(), actor.status());
        if let Some(dir) = &self.out_dir {
            persist(&actor, dir)?;
        }
        Ok(())
    }
}

/// Writes `<id>.csv` and `<id>_iterates.csv`.
pub fn persist(actor: &SessionActor, dir: &Path) -> crate::Result<()> {
    save_log(actor.log(), &dir.join(format!("{}.csv", actor.id())))?;
    save_iterates(actor.history(), actor.cost(), &dir.join(format!("{}_iterates.csv", actor.id())))
}
