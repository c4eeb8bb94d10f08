mod common;

use std::io::Write;
use std::net::TcpStream;

use common::{frame_message, random_frame, LineClient, TestServer};
use futures::{SinkExt, StreamExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slr_core::model::init_params;
use tokio_tungstenite::tungstenite::Message;

fn model() -> slr_core::ModelParams {
    init_params(&[32, 16], 11).unwrap()
}

fn frames(n: usize, seed: u64) -> Vec<slr_core::LandmarkFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_frame(&mut rng)).collect()
}

#[test]
fn concurrent_sessions_are_isolated() {
    let server = TestServer::start(model());
    let fs = frames(200, 1);
    let handles: Vec<_> = (0..2)
        .map(|c| {
            let addr = server.addr;
            let fs = fs.clone();
            std::thread::spawn(move || {
                let mut client = LineClient::connect(addr);
                for (i, f) in fs.iter().enumerate() {
                    let id = (c * 10_000 + i) as i64;
                    let r = client.request(&frame_message(id, f));
                    assert_eq!(r["type"], "prediction");
                    assert_eq!(r["id"], id);
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
}

#[test]
fn pipelined_requests_keep_order() {
    let server = TestServer::start(model());
    let mut client = LineClient::connect(server.addr);
    let fs = frames(300, 2);
    let mut batch = String::new();
    for (i, f) in fs.iter().enumerate() {
        batch.push_str(&frame_message(i as i64, f));
        batch.push('\n');
    }
    client.send_raw(batch.as_bytes());
    for i in 0..300 {
        assert_eq!(client.recv()["id"], i);
    }
}

#[test]
fn disconnect_does_not_affect_other_sessions() {
    let server = TestServer::start(model());
    let f = &frames(1, 3)[0];
    let mut survivor = LineClient::connect(server.addr);
    assert_eq!(survivor.request(&frame_message(1, f))["id"], 1);
    {
        let mut quitter = TcpStream::connect(server.addr).unwrap();
        // Half a message, then hang up.
        quitter.write_all(b"{\"type\":\"frame\",\"id\":9,\"landm").unwrap();
    }
    {
        let mut quitter = LineClient::connect(server.addr);
        quitter.send(&frame_message(2, f));
    }
    for id in 2..50 {
        assert_eq!(survivor.request(&frame_message(id, f))["id"], id);
    }
}

#[test]
fn model_state_is_immutable_across_messages() {
    let server = TestServer::start(model());
    let fs = frames(50, 4);
    let probe = frame_message(0, &fs[0]);
    let mut client = LineClient::connect(server.addr);
    let first = client.request(&probe);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut batch = String::new();
    for i in 0..10_000 {
        match i % 4 {
            0 => batch.push_str(&frame_message(i, &fs[rng.random_range(0..fs.len())])),
            1 => batch.push_str("garbage"),
            2 => batch.push_str(r#"{"type":"frame","id":3,"landmarks":[[1,2]]}"#),
            _ => batch.push_str(&frame_message(i, &fs[1]).replacen("[", "[[0.5,0.5],", 1)),
        }
        batch.push('\n');
    }
    client.send_raw(batch.as_bytes());
    for _ in 0..10_000 {
        client.recv();
    }
    assert_eq!(client.request(&probe), first);

    // A fresh session sees the same answer.
    assert_eq!(LineClient::connect(server.addr).request(&probe), first);
}

#[test]
fn arbitrary_bytes_get_exactly_one_reply_per_line() {
    let server = TestServer::start(model());
    let mut client = LineClient::connect(server.addr);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut payload = Vec::new();
    let lines = 500;
    for _ in 0..lines {
        let len = rng.random_range(0..64);
        payload.extend((0..len).map(|_| loop {
            let b: u8 = rng.random();
            if b != b'\n' {
                break b;
            }
        }));
        payload.push(b'\n');
    }
    client.send_raw(&payload);
    for _ in 0..lines {
        let r = client.recv();
        assert_eq!(r["type"], "error");
        assert_eq!(r["code"], "MALFORMED");
    }
    let f = &frames(1, 7)[0];
    assert_eq!(client.request(&frame_message(77, f))["id"], 77);
}

#[test]
fn oversized_line_is_one_error() {
    let server = TestServer::start(model());
    let mut client = LineClient::connect(server.addr);
    let mut big = vec![b'x'; slr_core::serve::MAX_MESSAGE_BYTES + 10];
    big.push(b'\n');
    client.send_raw(&big);
    let r = client.recv();
    assert_eq!(r["code"], "MALFORMED");
    assert!(r["id"].is_null());
    let f = &frames(1, 8)[0];
    assert_eq!(client.request(&frame_message(5, f))["id"], 5);
}

#[tokio::test(flavor = "multi_thread")]
async fn websocket_binding_carries_the_same_payloads() {
    let server = tokio::task::spawn_blocking(|| TestServer::start(model())).await.unwrap();
    let url = format!("ws://{}/", server.addr);
    let (mut ws, _) = tokio_tungstenite::connect_async(url).await.unwrap();
    let fs = frames(20, 9);
    for (i, f) in fs.iter().enumerate() {
        ws.send(Message::Text(frame_message(i as i64, f))).await.unwrap();
    }
    ws.send(Message::Text("hello".into())).await.unwrap();
    for i in 0..20 {
        let Message::Text(t) = ws.next().await.unwrap().unwrap() else { panic!("expected text") };
        let v: serde_json::Value = serde_json::from_str(&t).unwrap();
        assert_eq!(v["type"], "prediction");
        assert_eq!(v["id"], i);
        assert_eq!(v["probs"].as_array().unwrap().len(), 26);
    }
    let Message::Text(t) = ws.next().await.unwrap().unwrap() else { panic!("expected text") };
    let v: serde_json::Value = serde_json::from_str(&t).unwrap();
    assert_eq!(v["code"], "MALFORMED");
    ws.close(None).await.unwrap();
    tokio::task::spawn_blocking(move || server.shutdown()).await.unwrap();
}

#[test]
fn shutdown_closes_open_sessions() {
    use std::io::Read;
    let server = TestServer::start(model());
    let f = &frames(1, 10)[0];
    let stream = TcpStream::connect(server.addr).unwrap();
    stream.set_read_timeout(Some(std::time::Duration::from_secs(20))).unwrap();
    let mut client = LineClient::connect(server.addr);
    assert_eq!(client.request(&frame_message(1, f))["id"], 1);
    server.shutdown();
    let mut rest = Vec::new();
    let n = (&stream).read_to_end(&mut rest).unwrap();
    assert_eq!(n, 0);
}
