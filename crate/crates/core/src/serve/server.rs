use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use thiserror::Error;
use tokio::io::{AsyncBufRead, AsyncBufReadExt, AsyncWriteExt, BufReader, BufWriter};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::watch;
use tokio::task::JoinSet;
use tokio_tungstenite::tungstenite::protocol::WebSocketConfig;
use tokio_tungstenite::tungstenite::Message;

use super::protocol::{handle_message, ErrorCode, Response};
use crate::model::{load_model, ModelError, ModelParams};

/// Longest accepted message in bytes. Longer lines are discarded up to their
/// newline and answered with a single `MALFORMED` error.
pub const MAX_MESSAGE_BYTES: usize = 1 << 20;
const DRAIN_TIMEOUT: Duration = Duration::from_secs(5);
const SNIFF_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A bound listener sharing one immutable model across sessions.
///
/// Each connection is a session. A connection that opens with an HTTP `GET`
/// is upgraded to a websocket and carries one message per text frame; any
/// other connection speaks newline-delimited messages. Either way requests
/// are answered strictly in order.
pub struct Server {
    listener: TcpListener,
    model: Arc<ModelParams>,
}

impl Server {
    pub async fn bind(model: ModelParams, addr: SocketAddr) -> Result<Self, ServeError> {
        let listener = TcpListener::bind(addr)
            .await
            .map_err(|source| ServeError::Bind { addr, source })?;
        Ok(Self {
            listener,
            model: Arc::new(model),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until `shutdown` resolves, then closes every session and waits
    /// briefly for them to finish.
    pub async fn run_until(self, shutdown: impl Future<Output = ()>) -> io::Result<()> {
        let (stop_tx, stop_rx) = watch::channel(false);
        let mut sessions = JoinSet::new();
        tokio::pin!(shutdown);
        loop {
            tokio::select! {
                _ = &mut shutdown => break,
                accepted = self.listener.accept() => {
                    let (stream, peer) = match accepted {
                        Ok(a) => a,
                        Err(e) => {
                            log::warn!("accept failed: {e}");
                            continue;
                        }
                    };
                    let _ = stream.set_nodelay(true);
                    let model = Arc::clone(&self.model);
                    let stop = stop_rx.clone();
                    sessions.spawn(async move {
                        log::info!("{peer}: session opened");
                        match session(stream, model, stop).await {
                            Ok(n) => log::info!("{peer}: session closed after {n} message(s)"),
                            Err(e) => log::info!("{peer}: session ended: {e}"),
                        }
                    });
                }
                Some(_) = sessions.join_next(), if !sessions.is_empty() => {}
            }
        }
        log::info!("shutting down, closing {} session(s)", sessions.len());
        let _ = stop_tx.send(true);
        let drain = async { while sessions.join_next().await.is_some() {} };
        if tokio::time::timeout(DRAIN_TIMEOUT, drain).await.is_err() {
            sessions.abort_all();
        }
        Ok(())
    }
}

/// Loads the model once, binds `127.0.0.1:port` and serves until interrupted.
pub fn run_server(model_path: &Path, port: u16) -> Result<(), ServeError> {
    let model = load_model(model_path)?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let server = Server::bind(model, SocketAddr::from(([127, 0, 0, 1], port))).await?;
        log::info!("listening on {}", server.local_addr()?);
        server
            .run_until(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

async fn session(
    stream: TcpStream,
    model: Arc<ModelParams>,
    mut stop: watch::Receiver<bool>,
) -> io::Result<u64> {
    let upgrade = tokio::select! {
        u = is_websocket_upgrade(&stream) => u?,
        _ = stop.changed() => return Ok(0),
    };
    if upgrade {
        websocket_session(stream, model, stop).await
    } else {
        line_session(stream, model, stop).await
    }
}

async fn is_websocket_upgrade(stream: &TcpStream) -> io::Result<bool> {
    const GET: &[u8] = b"GET ";
    let mut buf = [0u8; 4];
    let deadline = tokio::time::Instant::now() + SNIFF_TIMEOUT;
    loop {
        let n = stream.peek(&mut buf).await?;
        if n == 0 || n >= GET.len() || !GET.starts_with(&buf[..n]) {
            return Ok(n >= GET.len() && buf == *GET);
        }
        if tokio::time::Instant::now() >= deadline {
            return Ok(false);
        }
        tokio::time::sleep(Duration::from_millis(2)).await;
    }
}

async fn line_session(
    stream: TcpStream,
    model: Arc<ModelParams>,
    mut stop: watch::Receiver<bool>,
) -> io::Result<u64> {
    let (read, write) = stream.into_split();
    let mut reader = BufReader::new(read);
    let mut writer = BufWriter::new(write);
    let mut line = Vec::new();
    let mut handled = 0;
    loop {
        let read = tokio::select! {
            r = read_line_capped(&mut reader, &mut line, MAX_MESSAGE_BYTES) => r?,
            _ = stop.changed() => break,
        };
        let Some(overflow) = read else { break };
        let response = if overflow {
            Response::Error {
                id: None,
                code: ErrorCode::Malformed,
                message: format!("message exceeds {MAX_MESSAGE_BYTES} bytes"),
            }
        } else {
            handle_message(&model, &line)
        };
        let mut out = response.to_json();
        out.push('\n');
        writer.write_all(out.as_bytes()).await?;
        // Only flush once the client has nothing else queued, so pipelined
        // requests are answered in larger writes.
        if reader.buffer().is_empty() {
            writer.flush().await?;
        }
        handled += 1;
    }
    writer.flush().await?;
    writer.shutdown().await?;
    Ok(handled)
}

/// Reads one `\n`-terminated message into `buf` (without the newline).
///
/// Returns `None` at a clean end of stream, otherwise `Some(overflowed)`.
/// Trailing bytes without a newline at end of stream count as a message.
async fn read_line_capped<R: AsyncBufRead + Unpin>(
    reader: &mut R,
    buf: &mut Vec<u8>,
    cap: usize,
) -> io::Result<Option<bool>> {
    buf.clear();
    let mut overflow = false;
    let mut seen_any = false;
    loop {
        let available = reader.fill_buf().await?;
        if available.is_empty() {
            return Ok(seen_any.then_some(overflow));
        }
        seen_any = true;
        let (chunk, done) = match available.iter().position(|&b| b == b'\n') {
            Some(i) => (&available[..i], i + 1),
            None => (available, available.len()),
        };
        if !overflow {
            if buf.len() + chunk.len() > cap {
                overflow = true;
                buf.clear();
            } else {
                buf.extend_from_slice(chunk);
            }
        }
        let found_newline = done > chunk.len();
        reader.consume(done);
        if found_newline {
            return Ok(Some(overflow));
        }
    }
}

async fn websocket_session(
    stream: TcpStream,
    model: Arc<ModelParams>,
    mut stop: watch::Receiver<bool>,
) -> io::Result<u64> {
    let config = WebSocketConfig {
        max_message_size: Some(MAX_MESSAGE_BYTES),
        ..WebSocketConfig::default()
    };
    let mut ws = tokio_tungstenite::accept_async_with_config(stream, Some(config))
        .await
        .map_err(io::Error::other)?;
    let mut handled = 0;
    loop {
        let msg = tokio::select! {
            m = ws.next() => m,
            _ = stop.changed() => {
                let _ = ws.close(None).await;
                break;
            }
        };
        let payload = match msg {
            None => break,
            Some(Err(e)) => return Err(io::Error::other(e)),
            Some(Ok(Message::Text(t))) => t.into_bytes(),
            Some(Ok(Message::Binary(b))) => b,
            Some(Ok(Message::Close(_))) => break,
            Some(Ok(_)) => continue,
        };
        let response = handle_message(&model, &payload);
        ws.send(Message::Text(response.to_json()))
            .await
            .map_err(io::Error::other)?;
        handled += 1;
    }
    Ok(handled)
}
