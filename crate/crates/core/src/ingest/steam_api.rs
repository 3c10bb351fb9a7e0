//! Blocking client for the public per-app Steam reviews endpoint.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;
use tracing::{debug, warn};

use super::{IngestError, RawReview};

#[derive(Debug, Clone)]
pub struct SteamClientConfig {
    /// Scheme and host, e.g. `https://store.steampowered.com`.
    pub base_url: String,
    pub max_retries: u32,
    /// First retry delay; doubles on each further retry.
    pub backoff: Duration,
    pub timeout: Duration,
}

impl Default for SteamClientConfig {
    fn default() -> Self {
        SteamClientConfig {
            base_url: "https://store.steampowered.com".into(),
            max_retries: 3,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(30),
        }
    }
}

/// Minimum spacing between requests, shared by every fetch that holds it.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(interval: Duration) -> Self {
        RateLimiter { interval, next_slot: Mutex::new(None) }
    }

    /// One request per 1.5 s.
    pub fn polite() -> Self {
        RateLimiter::new(Duration::from_millis(1500))
    }

    /// Blocks until the caller may send a request.
    pub fn acquire(&self) {
        let wait = {
            let mut slot = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let start = match *slot {
                Some(t) if t > now => t,
                _ => now,
            };
            *slot = Some(start + self.interval);
            start - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FetchOutcome {
    pub reviews: Vec<RawReview>,
    pub requests: u32,
    pub retries: u32,
}

#[derive(Deserialize)]
struct Page {
    success: i64,
    #[serde(default)]
    reviews: Vec<PageReview>,
    #[serde(default)]
    cursor: Option<String>,
}

#[derive(Deserialize)]
struct PageReview {
    recommendationid: serde_json::Value,
    review: String,
}

/// Fetches up to `max_reviews` reviews in all languages, following cursors.
pub fn fetch_steam_reviews(
    app_id: &str,
    max_reviews: usize,
    cfg: &SteamClientConfig,
    limiter: &RateLimiter,
) -> Result<FetchOutcome, IngestError> {
    let mut out = FetchOutcome::default();
    if max_reviews == 0 {
        return Ok(out);
    }
    if app_id.is_empty() || !app_id.bytes().all(|b| b.is_ascii_digit()) {
        return Err(IngestError::Payload(format!("app id `{app_id}` is not numeric")));
    }
    let client = reqwest::blocking::Client::builder()
        .timeout(cfg.timeout)
        .build()
        .map_err(|e| IngestError::Network(e.to_string()))?;
    let url = format!("{}/appreviews/{}", cfg.base_url.trim_end_matches('/'), app_id);
    let mut cursor = "*".to_string();

    while out.reviews.len() < max_reviews {
        let body = get_page(&client, &url, &cursor, cfg, limiter, &mut out)?;
        let page: Page = serde_json::from_str(&body).map_err(|e| IngestError::Payload(e.to_string()))?;
        if page.success != 1 {
            return Err(IngestError::Payload(format!("success = {}", page.success)));
        }
        if page.reviews.is_empty() {
            break;
        }
        for r in page.reviews {
            if out.reviews.len() == max_reviews {
                break;
            }
            let review_id = match r.recommendationid {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            out.reviews.push(RawReview {
                review_id,
                game_id: app_id.to_string(),
                text: r.review,
                rating_rank: out.reviews.len() as u32 + 1,
            });
        }
        match page.cursor {
            Some(next) if next != cursor && !next.is_empty() => cursor = next,
            _ => break,
        }
    }
    Ok(out)
}

fn get_page(
    client: &reqwest::blocking::Client,
    url: &str,
    cursor: &str,
    cfg: &SteamClientConfig,
    limiter: &RateLimiter,
    out: &mut FetchOutcome,
) -> Result<String, IngestError> {
    let mut attempt = 0u32;
    loop {
        limiter.acquire();
        out.requests += 1;
        debug!(url, cursor, attempt, "requesting reviews page");
        let result = client
            .get(url)
            .query(&[
                ("json", "1"),
                ("filter", "all"),
                ("language", "all"),
                ("num_per_page", "100"),
                ("cursor", cursor),
            ])
            .send();
        let failure = match result {
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    return resp.text().map_err(|e| IngestError::Network(e.to_string()));
                }
                if status.as_u16() != 429 && !status.is_server_error() {
                    return Err(IngestError::Network(format!("HTTP {status}")));
                }
                format!("HTTP {status}")
            }
            Err(e) => e.to_string(),
        };
        if attempt >= cfg.max_retries {
            return Err(IngestError::Network(format!("{failure} after {} retries", cfg.max_retries)));
        }
        warn!(%failure, attempt, "retrying reviews page");
        thread::sleep(cfg.backoff * 2u32.saturating_pow(attempt));
        attempt += 1;
        out.retries += 1;
    }
}
