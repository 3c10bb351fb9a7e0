//! Chat-completion clients: a real HTTP client and scripted stand-ins.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use super::prompt::extract_review;
use super::rules::rule_based_quantifier;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("transport failure: {0}")]
pub struct TransportError(pub String);

/// One completion request. `review_id` is routing metadata for scripted
/// clients and is never sent to a real endpoint.
#[derive(Debug, Clone, Copy)]
pub struct ChatRequest<'a> {
    pub review_id: &'a str,
    pub prompt: &'a str,
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, request: ChatRequest<'_>) -> Result<String, TransportError>;
}

impl<C: ChatClient + ?Sized> ChatClient for &C {
    fn complete(&self, request: ChatRequest<'_>) -> Result<String, TransportError> {
        (**self).complete(request)
    }
}

impl<C: ChatClient + ?Sized> ChatClient for Box<C> {
    fn complete(&self, request: ChatRequest<'_>) -> Result<String, TransportError> {
        (**self).complete(request)
    }
}

/// Posts `{model, temperature, messages}` to an OpenAI-style endpoint.
pub struct HttpChatClient {
    endpoint: String,
    model: String,
    temperature: f64,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        temperature: f64,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Result<Self, TransportError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpChatClient {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature,
            api_key,
            http,
        })
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, request: ChatRequest<'_>) -> Result<String, TransportError> {
        let body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let mut req = self.http.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(TransportError(format!("HTTP {status}")));
        }
        let value: serde_json::Value = resp.json().map_err(|e| TransportError(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| TransportError("response has no choices[0].message.content".into()))
    }
}

/// Answers every prompt with the rule-based quantifier's record.
#[derive(Debug, Default, Clone, Copy)]
pub struct RuleBasedClient;

impl ChatClient for RuleBasedClient {
    fn complete(&self, request: ChatRequest<'_>) -> Result<String, TransportError> {
        let text = extract_review(request.prompt).ok_or_else(|| TransportError("prompt has no review slot".into()))?;
        Ok(rule_based_quantifier(&text).to_json())
    }
}

/// One scripted reply.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum ScriptedReply {
    Completion(String),
    Failure { transport_error: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Unscripted reviews get the rule-based record.
    #[default]
    Rules,
    /// Unscripted reviews fail with a transport error.
    Error,
}

/// Mock script: per-review reply sequences plus a fallback.
///
/// ```json
/// {"fallback": "rules",
///  "responses": {"r17": ["not json", {"transport_error": "timeout"}, "{...}"]}}
/// ```
///
/// Attempt `n` for a review gets reply `n`; the last reply repeats.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub fallback: Fallback,
    #[serde(default)]
    pub responses: HashMap<String, Vec<ScriptedReply>>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, TransportError> {
        let text = fs::read_to_string(path).map_err(|e| TransportError(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| TransportError(format!("{}: {e}", path.display())))
    }
}

pub struct ScriptedClient {
    script: MockScript,
    attempts: Mutex<HashMap<String, usize>>,
    calls: AtomicUsize,
}

impl ScriptedClient {
    pub fn new(script: MockScript) -> Self {
        ScriptedClient {
            script,
            attempts: Mutex::new(HashMap::new()),
            calls: AtomicUsize::new(0),
        }
    }

    /// Total completions served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&self, request: ChatRequest<'_>) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let attempt = {
            let mut map = self.attempts.lock().unwrap_or_else(|e| e.into_inner());
            let n = map.entry(request.review_id.to_string()).or_insert(0);
            *n += 1;
            *n - 1
        };
        match self.script.responses.get(request.review_id) {
            Some(replies) if !replies.is_empty() => match &replies[attempt.min(replies.len() - 1)] {
                ScriptedReply::Completion(text) => Ok(text.clone()),
                ScriptedReply::Failure { transport_error } => Err(TransportError(transport_error.clone())),
            },
            _ => match self.script.fallback {
                Fallback::Rules => RuleBasedClient.complete(request),
                Fallback::Error => Err(TransportError(format!("no scripted reply for `{}`", request.review_id))),
            },
        }
    }
}

/// Wraps a client and counts calls.
pub struct CountingClient<C> {
    inner: C,
    calls: AtomicUsize,
}

impl<C> CountingClient<C> {
    pub fn new(inner: C) -> Self {
        CountingClient { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<C: ChatClient> ChatClient for CountingClient<C> {
    fn complete(&self, request: ChatRequest<'_>) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }
}
