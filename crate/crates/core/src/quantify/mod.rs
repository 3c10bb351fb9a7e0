//! Review quantification: sanitize, prompt, complete, parse, persist.

mod checkpoint;
mod client;
mod parse;
mod prompt;
mod rules;
mod sanitize;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{LazyLock, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info};

use crate::ingest::RawReview;
use crate::schema::{ReviewField, ReviewScores, SchemaError};

pub use checkpoint::Checkpoint;
pub use client::{
    ChatClient, ChatRequest, CountingClient, Fallback, HttpChatClient, MockScript, RuleBasedClient,
    ScriptedClient, ScriptedReply, TransportError,
};
pub use parse::{extract_object, parse_llm_response, ResponseError};
pub use prompt::{build_prompt, extract_review, format_instructions, output_schema, EXAMPLE_OUTPUT};
pub use rules::rule_based_quantifier;
pub use sanitize::sanitize_review;

#[derive(Debug, Error)]
pub enum QuantifyError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}, row {row}: {source}")]
    InvalidRow {
        path: PathBuf,
        row: usize,
        #[source]
        source: SchemaError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantifierConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_retries: u32,
    #[serde(with = "secs")]
    pub request_timeout: Duration,
    pub concurrency: usize,
    pub top_n_reviews: usize,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl Default for QuantifierConfig {
    fn default() -> Self {
        QuantifierConfig {
            endpoint_url: "http://localhost:11434/v1/chat/completions".into(),
            model_name: "phi4".into(),
            temperature: 0.0,
            max_retries: 2,
            request_timeout: Duration::from_secs(120),
            concurrency: 1,
            top_n_reviews: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiscardReason {
    EmptyAfterSanitize,
    InvalidCharacters,
    LlmParseFailure,
    ValidationFailure,
    Timeout,
}

impl DiscardReason {
    pub fn name(self) -> &'static str {
        match self {
            DiscardReason::EmptyAfterSanitize => "EmptyAfterSanitize",
            DiscardReason::InvalidCharacters => "InvalidCharacters",
            DiscardReason::LlmParseFailure => "LlmParseFailure",
            DiscardReason::ValidationFailure => "ValidationFailure",
            DiscardReason::Timeout => "Timeout",
        }
    }
}

impl fmt::Display for DiscardReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DiscardReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            DiscardReason::EmptyAfterSanitize,
            DiscardReason::InvalidCharacters,
            DiscardReason::LlmParseFailure,
            DiscardReason::ValidationFailure,
            DiscardReason::Timeout,
        ]
        .into_iter()
        .find(|r| r.name() == s)
        .ok_or_else(|| format!("unknown discard reason `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QuantifyOutcome {
    Quantified { review_id: String, scores: ReviewScores },
    Discarded { review_id: String, reason: DiscardReason },
}

impl QuantifyOutcome {
    pub fn review_id(&self) -> &str {
        match self {
            QuantifyOutcome::Quantified { review_id, .. } | QuantifyOutcome::Discarded { review_id, .. } => review_id,
        }
    }
}

/// Outcome of one review plus the number of completions it took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReviewRun {
    pub outcome: QuantifyOutcome,
    pub calls: u32,
}

impl ReviewRun {
    pub fn retries(&self) -> u32 {
        self.calls.saturating_sub(1)
    }
}

static FORMAT_INSTRUCTIONS: LazyLock<String> = LazyLock::new(format_instructions);

/// Quantifies one review. Parse and validation failures are retried with
/// the identical prompt; failures never escape this function.
pub fn quantify_review(review: &RawReview, cfg: &QuantifierConfig, client: &dyn ChatClient) -> ReviewRun {
    let discard = |reason, calls| ReviewRun {
        outcome: QuantifyOutcome::Discarded { review_id: review.review_id.clone(), reason },
        calls,
    };
    let text = match sanitize_review(&review.text) {
        Ok(t) => t,
        Err(reason) => return discard(reason, 0),
    };
    let prompt = build_prompt(&text, &FORMAT_INSTRUCTIONS);
    let request = ChatRequest { review_id: &review.review_id, prompt: &prompt };
    let mut calls = 0;
    let mut last = DiscardReason::LlmParseFailure;
    for attempt in 0..=cfg.max_retries {
        calls += 1;
        match client.complete(request) {
            Ok(completion) => match parse_llm_response(&completion) {
                Ok(scores) => {
                    return ReviewRun {
                        outcome: QuantifyOutcome::Quantified { review_id: review.review_id.clone(), scores },
                        calls,
                    };
                }
                Err(e) => {
                    debug!(review = %review.review_id, attempt, error = %e, "unusable completion");
                    last = if e.is_validation() {
                        DiscardReason::ValidationFailure
                    } else {
                        DiscardReason::LlmParseFailure
                    };
                }
            },
            Err(e) => {
                debug!(review = %review.review_id, attempt, error = %e, "transport failure");
                last = DiscardReason::Timeout;
            }
        }
    }
    discard(last, calls)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GameReport {
    pub game_id: String,
    /// Already in the checkpoint; nothing was done.
    pub skipped: bool,
    pub attempted: usize,
    pub quantified: usize,
    pub discarded: usize,
    pub calls: u64,
    pub retries: u64,
}

pub const QUANTIFIED_SUFFIX: &str = "_quantified.csv";
pub const DISCARDED_SUFFIX: &str = "_discarded.csv";

pub fn quantified_path(dir: &Path, game_id: &str) -> PathBuf {
    dir.join(format!("{game_id}{QUANTIFIED_SUFFIX}"))
}

pub fn discarded_path(dir: &Path, game_id: &str) -> PathBuf {
    dir.join(format!("{game_id}{DISCARDED_SUFFIX}"))
}

/// Quantifies the top reviews of one game and writes its two output files.
///
/// Rows are written in rating order whatever order the requests finish in.
/// The checkpoint is marked only after both files are in place.
pub fn quantify_game(
    game_id: &str,
    reviews: &[RawReview],
    cfg: &QuantifierConfig,
    client: &dyn ChatClient,
    checkpoint: &mut Checkpoint,
    out_dir: &Path,
) -> Result<GameReport, QuantifyError> {
    if checkpoint.contains(game_id) {
        info!(game = game_id, "already quantified, skipping");
        return Ok(GameReport { game_id: game_id.to_string(), skipped: true, ..Default::default() });
    }
    let mut ranked: Vec<&RawReview> = reviews.iter().collect();
    ranked.sort_by_key(|r| r.rating_rank);
    ranked.truncate(cfg.top_n_reviews);

    let runs = run_all(&ranked, cfg, client);

    let mut report = GameReport { game_id: game_id.to_string(), attempted: runs.len(), ..Default::default() };
    let mut quantified = csv::Writer::from_writer(Vec::new());
    let mut discarded = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once("review_id").chain(ReviewField::all().map(|f| f.name())).collect();
    quantified.write_record(&header).expect("in-memory write");
    discarded.write_record(["review_id", "reason", "text"]).expect("in-memory write");
    for (review, run) in ranked.iter().zip(&runs) {
        report.calls += u64::from(run.calls);
        report.retries += u64::from(run.retries());
        match &run.outcome {
            QuantifyOutcome::Quantified { review_id, scores } => {
                report.quantified += 1;
                let mut row = vec![review_id.clone()];
                row.extend(scores.values().iter().map(u8::to_string));
                quantified.write_record(&row).expect("in-memory write");
            }
            QuantifyOutcome::Discarded { review_id, reason } => {
                report.discarded += 1;
                discarded
                    .write_record([review_id.as_str(), reason.name(), review.text.as_str()])
                    .expect("in-memory write");
            }
        }
    }
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| QuantifyError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let qpath = quantified_path(out_dir, game_id);
    let dpath = discarded_path(out_dir, game_id);
    write_atomic(&qpath, &quantified.into_inner().expect("in-memory flush")).map_err(io(&qpath))?;
    write_atomic(&dpath, &discarded.into_inner().expect("in-memory flush")).map_err(io(&dpath))?;
    checkpoint.mark(game_id).map_err(io(checkpoint.path()))?;
    info!(game = game_id, attempted = report.attempted, quantified = report.quantified, discarded = report.discarded, "game quantified");
    Ok(report)
}

fn run_all(ranked: &[&RawReview], cfg: &QuantifierConfig, client: &dyn ChatClient) -> Vec<ReviewRun> {
    let workers = cfg.concurrency.max(1).min(ranked.len().max(1));
    if workers == 1 {
        return ranked.iter().map(|r| quantify_review(r, cfg, client)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<ReviewRun>>> = Mutex::new(vec![None; ranked.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(review) = ranked.get(i) else { break };
                let run = quantify_review(review, cfg, client);
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(run);
            });
        }
    });
    slots
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::File::open(&tmp)?.sync_all()?;
    fs::rename(&tmp, path)
}

/// Reads a quantified file back, re-validating every row.
pub fn read_quantified_file(path: &Path) -> Result<Vec<(String, ReviewScores)>, QuantifyError> {
    let format = |message: String| QuantifyError::Format { path: path.to_path_buf(), message };
    let mut reader = csv::Reader::from_path(path).map_err(|e| format(e.to_string()))?;
    let headers = reader.headers().map_err(|e| format(e.to_string()))?.clone();
    let expected: Vec<&str> = std::iter::once("review_id").chain(ReviewField::all().map(|f| f.name())).collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(format("unexpected header".into()));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| format(e.to_string()))?;
        let values: Vec<serde_json::Value> = row
            .iter()
            .skip(1)
            .map(|cell| cell.trim().parse::<i64>().map(Into::into).unwrap_or_else(|_| cell.into()))
            .collect();
        let scores = crate::schema::validate_review_scores(
            ReviewField::all().map(|f| f.name()).zip(values.iter()),
        )
        .map_err(|source| QuantifyError::InvalidRow { path: path.to_path_buf(), row: i + 1, source })?;
        out.push((row[0].to_string(), scores));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{Language, DesignElement};

    fn review(id: &str, text: &str, rank: u32) -> RawReview {
        RawReview { review_id: id.into(), game_id: "g".into(), text: text.into(), rating_rank: rank }
    }

    fn scripted(json: &str) -> ScriptedClient {
        ScriptedClient::new(serde_json::from_str(json).unwrap())
    }

    #[test]
    fn table9_completion_quantifies() {
        let c = scripted(&format!(r#"{{"responses": {{"r": [{}]}}}}"#, serde_json::to_string(EXAMPLE_OUTPUT).unwrap()));
        let run = quantify_review(&review("r", "This game is amazing", 1), &QuantifierConfig::default(), &c);
        match run.outcome {
            QuantifyOutcome::Quantified { review_id, scores } => {
                assert_eq!(review_id, "r");
                assert_eq!(scores.language(), Language::English);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(run.calls, 1);
    }

    #[test]
    fn retry_after_prose() {
        let c = scripted(&format!(
            r#"{{"responses": {{"r": ["Here you go!", {}]}}}}"#,
            serde_json::to_string(EXAMPLE_OUTPUT).unwrap()
        ));
        let run = quantify_review(&review("r", "nice", 1), &QuantifierConfig::default(), &c);
        assert!(matches!(run.outcome, QuantifyOutcome::Quantified { .. }));
        assert_eq!(run.retries(), 1);
    }

    #[test]
    fn symbols_only_review() {
        let run = quantify_review(&review("r", "\u{2665}\u{2665}\u{2665}\u{2665}", 1), &QuantifierConfig::default(), &RuleBasedClient);
        match run.outcome {
            QuantifyOutcome::Quantified { scores, .. } => assert_eq!(scores, ReviewScores::empty(Language::Other)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exhausted_retries_pick_last_reason() {
        let cfg = QuantifierConfig { max_retries: 2, ..Default::default() };
        let bad = EXAMPLE_OUTPUT.replace("\"Story\": 0", "\"Story\": 9");
        let c = scripted(&format!(r#"{{"responses": {{"r": ["nope", {}]}}}}"#, serde_json::to_string(&bad).unwrap()));
        let run = quantify_review(&review("r", "x", 1), &cfg, &c);
        assert_eq!(run.outcome, QuantifyOutcome::Discarded { review_id: "r".into(), reason: DiscardReason::ValidationFailure });
        assert_eq!(run.calls, 3);

        let c = scripted(r#"{"fallback": "error"}"#);
        let run = quantify_review(&review("r", "x", 1), &cfg, &c);
        assert_eq!(run.outcome, QuantifyOutcome::Discarded { review_id: "r".into(), reason: DiscardReason::Timeout });

        let run = quantify_review(&review("e", "   ", 1), &cfg, &c);
        assert_eq!(run.calls, 0);
        assert_eq!(run.outcome, QuantifyOutcome::Discarded { review_id: "e".into(), reason: DiscardReason::EmptyAfterSanitize });
    }

    #[test]
    fn game_truncates_and_writes_in_rank_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut ck = Checkpoint::open(dir.path().join("ck")).unwrap();
        // Reverse file order to check that rank, not position, decides.
        let reviews: Vec<RawReview> = (1..=150).rev().map(|i| review(&format!("r{i:03}"), "story is 7/10", i)).collect();
        let cfg = QuantifierConfig { top_n_reviews: 100, concurrency: 4, ..Default::default() };
        let c = CountingClient::new(RuleBasedClient);
        let rep = quantify_game("g", &reviews, &cfg, &c, &mut ck, dir.path()).unwrap();
        assert_eq!((rep.attempted, rep.quantified, rep.discarded), (100, 100, 0));
        assert_eq!(c.calls(), 100);
        let rows = read_quantified_file(&quantified_path(dir.path(), "g")).unwrap();
        assert_eq!(rows.first().unwrap().0, "r001");
        assert_eq!(rows.last().unwrap().0, "r100");
        assert!(rows.iter().all(|(_, s)| s.element(DesignElement::Story) == 4));

        let rep = quantify_game("g", &reviews, &cfg, &c, &mut ck, dir.path()).unwrap();
        assert!(rep.skipped);
        assert_eq!(c.calls(), 100);
    }

    #[test]
    fn concurrency_does_not_change_output() {
        let reviews: Vec<RawReview> = (1..=40)
            .map(|i| review(&format!("r{i}"), if i % 7 == 0 { "" } else { "Great graphics 8/10, audio 3/5" }, i))
            .collect();
        let mut outputs = Vec::new();
        for conc in [1, 3, 8] {
            let dir = tempfile::tempdir().unwrap();
            let mut ck = Checkpoint::open(dir.path().join("ck")).unwrap();
            let cfg = QuantifierConfig { concurrency: conc, ..Default::default() };
            quantify_game("g", &reviews, &cfg, &RuleBasedClient, &mut ck, dir.path()).unwrap();
            outputs.push((
                fs::read(quantified_path(dir.path(), "g")).unwrap(),
                fs::read(discarded_path(dir.path(), "g")).unwrap(),
            ));
        }
        assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn io_failure_leaves_checkpoint_unmarked() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let mut ck = Checkpoint::open(dir.path().join("ck")).unwrap();
        let err = quantify_game("g", &[review("r", "ok", 1)], &QuantifierConfig::default(), &RuleBasedClient, &mut ck, &blocker.join("sub"));
        assert!(err.is_err());
        assert!(!ck.contains("g"));
    }
}
