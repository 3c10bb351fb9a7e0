//! Steam review fetching and the chat client against a local mock server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use reviewmine::ingest::{fetch_steam_reviews, IngestError, RateLimiter, SteamClientConfig};
use reviewmine::quantify::{ChatClient, ChatRequest, HttpChatClient};

#[derive(Debug, Clone)]
struct Seen {
    at: Instant,
    target: String,
    headers: Vec<String>,
    body: String,
}

/// Serves canned `(status, body)` replies in order, one per connection.
struct MockServer {
    base: String,
    seen: Arc<Mutex<Vec<Seen>>>,
}

impl MockServer {
    fn start(replies: Vec<(u16, String)>) -> MockServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&seen);
        thread::spawn(move || {
            let mut replies = replies.into_iter();
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let Some((status, body)) = replies.next() else { break };
                handle(stream, status, &body, &log);
            }
        });
        MockServer { base, seen }
    }

    fn seen(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }
}

fn handle(stream: TcpStream, status: u16, body: &str, log: &Mutex<Vec<Seen>>) {
    let at = Instant::now();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    reader.read_line(&mut request_line).unwrap();
    let mut headers = Vec::new();
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        let line = line.trim_end().to_string();
        if line.is_empty() {
            break;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            length = v.trim().parse().unwrap();
        }
        headers.push(line);
    }
    let mut buf = vec![0; length];
    reader.read_exact(&mut buf).unwrap();
    let target = request_line.split_whitespace().nth(1).unwrap_or_default().to_string();
    log.lock().unwrap().push(Seen { at, target, headers, body: String::from_utf8(buf).unwrap() });
    let mut stream = stream;
    let reason = if status == 200 { "OK" } else { "Err" };
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    stream.flush().unwrap();
}

fn page(ids: &[u32], cursor: &str) -> String {
    let reviews: Vec<String> = ids
        .iter()
        .map(|i| format!(r#"{{"recommendationid": "{i}", "review": "review number {i}"}}"#))
        .collect();
    format!(r#"{{"success": 1, "cursor": "{cursor}", "reviews": [{}]}}"#, reviews.join(","))
}

fn cfg(base: &str) -> SteamClientConfig {
    SteamClientConfig {
        base_url: base.to_string(),
        max_retries: 2,
        backoff: Duration::from_millis(20),
        timeout: Duration::from_secs(5),
    }
}

#[test]
fn follows_cursor_across_pages() {
    let server = MockServer::start(vec![
        (200, page(&[1, 2, 3], "AoJ+abc=")),
        (200, page(&[4, 5], "AoJ+def=")),
        (200, page(&[], "AoJ+def=")),
    ]);
    let out = fetch_steam_reviews("570", 100, &cfg(&server.base), &RateLimiter::new(Duration::ZERO)).unwrap();
    let ids: Vec<&str> = out.reviews.iter().map(|r| r.review_id.as_str()).collect();
    assert_eq!(ids, ["1", "2", "3", "4", "5"]);
    assert_eq!(out.reviews[4].rating_rank, 5);
    assert_eq!((out.requests, out.retries), (3, 0));

    let seen = server.seen();
    assert!(seen[0].target.starts_with("/appreviews/570?"));
    for q in ["json=1", "filter=all", "language=all", "num_per_page=100", "cursor=*"] {
        assert!(seen[0].target.contains(q), "{} lacks {q}", seen[0].target);
    }
    // The cursor is form-encoded on the way out.
    assert!(seen[1].target.contains("cursor=AoJ%2Babc%3D"), "{}", seen[1].target);
}

#[test]
fn stops_at_max_reviews() {
    let server = MockServer::start(vec![(200, page(&[1, 2, 3], "next")), (200, page(&[4], "more"))]);
    let out = fetch_steam_reviews("10", 2, &cfg(&server.base), &RateLimiter::new(Duration::ZERO)).unwrap();
    assert_eq!(out.reviews.len(), 2);
    assert_eq!(out.requests, 1);
}

#[test]
fn retries_after_429_with_backoff() {
    let server = MockServer::start(vec![
        (429, "{}".into()),
        (503, "{}".into()),
        (200, page(&[7], "x")),
        (200, page(&[], "x")),
    ]);
    let out = fetch_steam_reviews("10", 10, &cfg(&server.base), &RateLimiter::new(Duration::ZERO)).unwrap();
    assert_eq!(out.reviews.len(), 1);
    assert_eq!((out.requests, out.retries), (4, 2));
    let seen = server.seen();
    // Backoff doubles: 20 ms, then 40 ms.
    assert!(seen[1].at - seen[0].at >= Duration::from_millis(20));
    assert!(seen[2].at - seen[1].at >= Duration::from_millis(40));
}

#[test]
fn gives_up_after_max_retries() {
    let server = MockServer::start(vec![(500, "{}".into()); 3]);
    let err = fetch_steam_reviews("10", 10, &cfg(&server.base), &RateLimiter::new(Duration::ZERO)).unwrap_err();
    assert!(matches!(err, IngestError::Network(_)), "{err:?}");
    assert_eq!(server.seen().len(), 3);
}

#[test]
fn rate_limiter_spaces_requests() {
    let server = MockServer::start(vec![(200, page(&[1], "a")), (200, page(&[2], "b")), (200, page(&[], "b"))]);
    let limiter = RateLimiter::new(Duration::from_millis(60));
    fetch_steam_reviews("10", 10, &cfg(&server.base), &limiter).unwrap();
    let seen = server.seen();
    assert_eq!(seen.len(), 3);
    for pair in seen.windows(2) {
        assert!(pair[1].at - pair[0].at >= Duration::from_millis(55), "{:?}", pair[1].at - pair[0].at);
    }
}

#[test]
fn chat_client_posts_openai_shape() {
    let reply = r#"{"choices": [{"message": {"role": "assistant", "content": "{\"Is_Pro\": 1}"}}]}"#;
    let server = MockServer::start(vec![(200, reply.into()), (500, "{}".into()), (200, "{}".into())]);
    let url = format!("{}/v1/chat/completions", server.base);
    let client = HttpChatClient::new(&url, "phi4", 0.0, Some("sk-test".into()), Duration::from_secs(5)).unwrap();
    let req = ChatRequest { review_id: "r1", prompt: "hello \"world\"" };
    assert_eq!(client.complete(req).unwrap(), "{\"Is_Pro\": 1}");
    assert!(client.complete(req).unwrap_err().0.contains("500"));
    assert!(client.complete(req).unwrap_err().0.contains("choices"));

    let first = &server.seen()[0];
    assert_eq!(first.target, "/v1/chat/completions");
    assert!(first.headers.iter().any(|h| h.eq_ignore_ascii_case("authorization: Bearer sk-test")));
    let body: serde_json::Value = serde_json::from_str(&first.body).unwrap();
    assert_eq!(
        body,
        serde_json::json!({"model": "phi4", "temperature": 0.0, "messages": [{"role": "user", "content": "hello \"world\""}]})
    );
    assert!(!first.body.contains("r1"), "review id must not be transmitted");
}

#[test]
fn unreachable_endpoint_is_transport_error() {
    let client = HttpChatClient::new("http://127.0.0.1:9/x", "m", 0.0, None, Duration::from_millis(500)).unwrap();
    assert!(client.complete(ChatRequest { review_id: "a", prompt: "p" }).is_err());
}
