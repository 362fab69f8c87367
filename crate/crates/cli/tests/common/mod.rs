//! In-process mock inference server speaking the three-endpoint protocol
//! over plain HTTP/1.1, with fault injection and concurrency accounting.

#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

pub struct MockResponse {
    pub status: u16,
    pub body: String,
}

impl MockResponse {
    pub fn json(value: serde_json::Value) -> Self {
        Self { status: 200, body: value.to_string() }
    }

    pub fn error(status: u16, body: &str) -> Self {
        Self { status, body: body.to_string() }
    }
}

type Responder = dyn Fn(&str, &serde_json::Value) -> MockResponse + Send + Sync;

#[derive(Default)]
pub struct ServerStats {
    pub calls: Vec<(String, serde_json::Value)>,
    pub fail_next: usize,
    pub in_flight: usize,
    pub peak_in_flight: usize,
}

pub struct MockServer {
    pub base_url: String,
    stats: Arc<Mutex<ServerStats>>,
    delay: Arc<Mutex<Duration>>,
    shutdown: Arc<AtomicBool>,
    port: u16,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl MockServer {
    pub fn start<F>(responder: F) -> Self
    where
        F: Fn(&str, &serde_json::Value) -> MockResponse + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
        let port = listener.local_addr().unwrap().port();
        let stats: Arc<Mutex<ServerStats>> = Arc::new(Mutex::new(ServerStats::default()));
        let delay = Arc::new(Mutex::new(Duration::ZERO));
        let shutdown = Arc::new(AtomicBool::new(false));
        let responder: Arc<Responder> = Arc::new(responder);

        let handle = {
            let stats = stats.clone();
            let delay = delay.clone();
            let shutdown = shutdown.clone();
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if shutdown.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let stats = stats.clone();
                    let delay = delay.clone();
                    let responder = responder.clone();
                    std::thread::spawn(move || handle_connection(stream, stats, delay, responder));
                }
            })
        };

        Self {
            base_url: format!("http://127.0.0.1:{port}"),
            stats,
            delay,
            shutdown,
            port,
            handle: Some(handle),
        }
    }

    pub fn call_count(&self) -> usize {
        self.stats.lock().unwrap().calls.len()
    }

    pub fn calls(&self) -> Vec<(String, serde_json::Value)> {
        self.stats.lock().unwrap().calls.clone()
    }

    pub fn peak_in_flight(&self) -> usize {
        self.stats.lock().unwrap().peak_in_flight
    }

    /// Respond 503 to the next `n` requests.
    pub fn fail_next(&self, n: usize) {
        self.stats.lock().unwrap().fail_next = n;
    }

    /// Hold every request open for `duration` before answering.
    pub fn set_delay(&self, duration: Duration) {
        *self.delay.lock().unwrap() = duration;
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(("127.0.0.1", self.port));
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection(
    mut stream: TcpStream,
    stats: Arc<Mutex<ServerStats>>,
    delay: Arc<Mutex<Duration>>,
    responder: Arc<Responder>,
) {
    let Some((path, body)) = read_request(&mut stream) else { return };
    let parsed: serde_json::Value = serde_json::from_str(&body).unwrap_or(serde_json::Value::Null);

    let (must_fail, pause) = {
        let mut stats = stats.lock().unwrap();
        stats.calls.push((path.clone(), parsed.clone()));
        stats.in_flight += 1;
        stats.peak_in_flight = stats.peak_in_flight.max(stats.in_flight);
        let must_fail = if stats.fail_next > 0 {
            stats.fail_next -= 1;
            true
        } else {
            false
        };
        (must_fail, *delay.lock().unwrap())
    };

    if !pause.is_zero() {
        std::thread::sleep(pause);
    }

    let response = if must_fail {
        MockResponse::error(503, "injected failure")
    } else {
        responder(&path, &parsed)
    };
    write_response(&mut stream, &response);

    stats.lock().unwrap().in_flight -= 1;
}

fn read_request(stream: &mut TcpStream) -> Option<(String, String)> {
    stream.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    let mut buffer = Vec::new();
    let mut chunk = [0u8; 1024];
    let header_end = loop {
        if let Some(pos) = find_subsequence(&buffer, b"\r\n\r\n") {
            break pos + 4;
        }
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 {
            return None;
        }
        buffer.extend_from_slice(&chunk[..n]);
    };

    let head = String::from_utf8_lossy(&buffer[..header_end]).into_owned();
    let mut lines = head.lines();
    let request_line = lines.next()?;
    let path = request_line.split_whitespace().nth(1)?.to_string();
    let content_length: usize = lines
        .filter_map(|line| line.split_once(':'))
        .find(|(name, _)| name.trim().eq_ignore_ascii_case("content-length"))
        .and_then(|(_, value)| value.trim().parse().ok())
        .unwrap_or(0);

    let mut body_bytes = buffer[header_end..].to_vec();
    while body_bytes.len() < content_length {
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 {
            break;
        }
        body_bytes.extend_from_slice(&chunk[..n]);
    }
    Some((path, String::from_utf8_lossy(&body_bytes).into_owned()))
}

fn write_response(stream: &mut TcpStream, response: &MockResponse) {
    let reason = match response.status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Unknown",
    };
    let payload = format!(
        "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        response.status,
        reason,
        response.body.len(),
        response.body
    );
    let _ = stream.write_all(payload.as_bytes());
    let _ = stream.flush();
}

fn find_subsequence(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|window| window == needle)
}

/// A scorer table the mock server and hand oracles share: per-word weights,
/// classification logprobs log sigmoid(+/- sum of visible weights), and
/// per-token continuation logprobs log sigmoid(weight * visible count).
pub struct WeightTable {
    pub weights: Vec<(&'static str, f64)>,
}

impl WeightTable {
    pub fn weight(&self, word: &str) -> f64 {
        self.weights
            .iter()
            .find(|(w, _)| *w == word)
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    }

    pub fn visible_margin(&self, prompt: &str) -> f64 {
        prompt.split_whitespace().map(|w| self.weight(w)).sum()
    }

    pub fn visible_count(&self, prompt: &str, word: &str) -> f64 {
        prompt.split_whitespace().filter(|w| *w == word).count() as f64
    }

    pub fn respond(&self, path: &str, body: &serde_json::Value) -> MockResponse {
        match path {
            "/v1/score" => {
                let prompt = body["prompt"].as_str().unwrap_or("");
                let z = self.visible_margin(prompt);
                let lp_phishing = log_sigmoid(z);
                let lp_legitimate = log_sigmoid(-z);
                MockResponse::json(serde_json::json!({
                    "label_logprobs": {
                        "PHISHING": lp_phishing,
                        "LEGITIMATE": lp_legitimate,
                    }
                }))
            }
            "/v1/logprob" => {
                let prompt = body["prompt"].as_str().unwrap_or("");
                let continuation = body["continuation"].as_str().unwrap_or("");
                let logprobs: Vec<f64> = continuation
                    .split_whitespace()
                    .map(|word| log_sigmoid(self.weight(word) * self.visible_count(prompt, word)))
                    .collect();
                MockResponse::json(serde_json::json!({ "token_logprobs": logprobs }))
            }
            "/v1/generate" => MockResponse::json(serde_json::json!({ "text": "alpha delta" })),
            _ => MockResponse::error(404, "unknown endpoint"),
        }
    }
}

pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(1.0 + (-z).exp()).ln()
    } else {
        z - (1.0 + z.exp()).ln()
    }
}

pub fn four_token_table() -> WeightTable {
    WeightTable {
        weights: vec![("alpha", 0.8), ("beta", -0.4), ("gamma", 0.3), ("delta", -0.1)],
    }
}
