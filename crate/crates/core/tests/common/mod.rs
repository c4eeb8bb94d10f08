#![allow(dead_code)]

use rand::Rng;
use slr_core::features::{LandmarkFrame, Point2, NUM_FEATURES, NUM_LANDMARKS};

/// A random hand-sized cloud: centre in the unit square, spread 0.05..0.4.
pub fn random_frame<R: Rng>(rng: &mut R) -> LandmarkFrame {
    let cx = rng.random_range(0.0..1.0);
    let cy = rng.random_range(0.0..1.0);
    let spread = rng.random_range(0.05..0.4);
    let points: Vec<Point2> = (0..NUM_LANDMARKS)
        .map(|_| {
            Point2::new(
                cx + spread * rng.random_range(-1.0..1.0),
                cy + spread * rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    LandmarkFrame::new(&points).unwrap()
}

/// Single-pass reference: `(p - min) / max(width, height)` on raw coordinates,
/// skipping the centring step entirely.
pub fn oracle_features(frame: &LandmarkFrame) -> [f64; NUM_FEATURES] {
    let pts = frame.points();
    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for p in pts {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    let s = (max_x - min_x).max(max_y - min_y);
    let mut out = [0.0; NUM_FEATURES];
    for (i, p) in pts.iter().enumerate() {
        out[2 * i] = (p.x - min_x) / s;
        out[2 * i + 1] = (p.y - min_y) / s;
    }
    out
}

pub fn frame_message(id: i64, frame: &LandmarkFrame) -> String {
    let pairs: Vec<String> = frame
        .points()
        .iter()
        .map(|p| format!("[{},{}]", p.x, p.y))
        .collect();
    format!(r#"{{"type":"frame","id":{id},"landmarks":[{}]}}"#, pairs.join(","))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// An in-process server on an ephemeral port, shut down on drop.
pub struct TestServer {
    pub addr: std::net::SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl TestServer {
    pub fn start(model: slr_core::ModelParams) -> Self {
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let server = slr_core::serve::Server::bind(model, "127.0.0.1:0".parse().unwrap())
                    .await
                    .unwrap();
                addr_tx.send(server.local_addr().unwrap()).unwrap();
                server
                    .run_until(async {
                        let _ = stop_rx.await;
                    })
                    .await
                    .unwrap();
            });
        });
        let addr = addr_rx.recv().unwrap();
        Self {
            addr,
            stop: Some(stop_tx),
            thread: Some(thread),
        }
    }

    /// Signals shutdown and waits for the server thread to exit.
    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            t.join().unwrap();
        }
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}

/// Blocking newline-delimited client.
pub struct LineClient {
    reader: std::io::BufReader<std::net::TcpStream>,
    writer: std::net::TcpStream,
}

impl LineClient {
    pub fn connect(addr: std::net::SocketAddr) -> Self {
        let stream = std::net::TcpStream::connect(addr).unwrap();
        stream.set_nodelay(true).unwrap();
        stream
            .set_read_timeout(Some(std::time::Duration::from_secs(20)))
            .unwrap();
        Self {
            reader: std::io::BufReader::new(stream.try_clone().unwrap()),
            writer: stream,
        }
    }

    pub fn send_raw(&mut self, bytes: &[u8]) {
        use std::io::Write;
        self.writer.write_all(bytes).unwrap();
    }

    pub fn send(&mut self, line: &str) {
        self.send_raw(format!("{line}\n").as_bytes());
    }

    pub fn recv(&mut self) -> serde_json::Value {
        use std::io::BufRead;
        let mut line = String::new();
        let n = self.reader.read_line(&mut line).unwrap();
        assert!(n > 0, "server closed the session");
        serde_json::from_str(&line).unwrap()
    }

    pub fn request(&mut self, line: &str) -> serde_json::Value {
        self.send(line);
        self.recv()
    }
}
