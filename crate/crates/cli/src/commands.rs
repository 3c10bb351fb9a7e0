use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::net::{TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::time::Duration;

use reviewmine::aggregate::{build_dataset, AggregateError, MergedGameRow, MERGED_FILE};
use reviewmine::analytics::{analyze, emit_report, fmt4, AnalysisReport, Platform, REPORT_JSON};
use reviewmine::ingest::{
    fetch_steam_reviews, filter_eligible_games, find_review_file, load_review_file, map_categories,
    parse_raw_meta_metadata, parse_raw_steam_metadata, summarize_dataset, write_review_file, ExclusionReason,
    MappingTally, RateLimiter, RawGameRecord, ReleaseDate,
};
use reviewmine::predict::{
    build_feature_matrix, encode_features, evaluate, feature_names, genre_influence, load_model, predict, save_model,
    train_gbt, GbtModel, PredictError,
};
use reviewmine::quantify::{quantify_game, ChatClient, Checkpoint, HttpChatClient, MockScript, ScriptedClient};
use reviewmine::table::{read_merged_csv, read_metadata_csv, write_metadata_csv};
use reviewmine::{DesignElement, GameMetadata, Store};
use serde::Serialize;
use serde_json::{json, Map, Value};
use tracing::{info, warn};

use crate::config::PipelineConfig;
use crate::{
    AggregateArgs, AnalyzeArgs, Command, GenreInfluenceArgs, IngestArgs, PredictArgs, QuantifyArgs, ReportArgs,
    TrainArgs,
};

pub const EXCLUSIONS_FILE: &str = "exclusions.csv";
pub const DATASET_SUMMARY_FILE: &str = "dataset_summary.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const SUMMARY_MD: &str = "summary.md";
const PROBE_TIMEOUT: Duration = Duration::from_secs(5);

pub fn genre_influence_csv(platform: Platform) -> String {
    format!("genre_influence_{}.csv", platform.name())
}

/// A command that could not finish.
#[derive(Debug)]
pub struct Failure {
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Failure {
        Failure { kind, message: message.into() }
    }
}

fn fail<E: std::fmt::Display>(kind: &'static str) -> impl Fn(E) -> Failure {
    move |e| Failure::new(kind, e.to_string())
}

/// The one-line result printed on stdout.
#[derive(Debug, Default)]
pub struct Summary {
    pub diagnostics: bool,
    fields: Map<String, Value>,
}

impl Summary {
    fn with_diagnostics(diagnostics: bool) -> Summary {
        Summary { diagnostics, ..Summary::default() }
    }

    fn set(&mut self, key: &str, value: impl Serialize) {
        self.fields.insert(key.to_string(), serde_json::to_value(value).expect("summary value serializes"));
    }

    pub fn failed(f: &Failure) -> Summary {
        let mut s = Summary::default();
        s.set("error", f.kind);
        s.set("message", &f.message);
        s
    }

    pub fn to_line(&self, command: &str) -> String {
        let status = if self.fields.contains_key("error") {
            "error"
        } else if self.diagnostics {
            "diagnostics"
        } else {
            "ok"
        };
        let mut map = self.fields.clone();
        map.insert("command".into(), json!(command));
        map.insert("status".into(), json!(status));
        Value::Object(map).to_string()
    }
}

pub fn run(command: Command, cfg: PipelineConfig) -> Result<Summary, Failure> {
    match command {
        Command::Ingest(a) => ingest(a, cfg),
        Command::Quantify(a) => quantify(a, cfg),
        Command::Aggregate(a) => aggregate(a, cfg),
        Command::Analyze(a) => analyze_cmd(a, cfg),
        Command::Train(a) => train(a, cfg),
        Command::Predict(a) => predict_cmd(a, cfg),
        Command::GenreInfluence(a) => genre_influence_cmd(a, cfg),
        Command::Report(a) => report(a, cfg),
    }
}

fn require_file(path: &Path, hint: &str) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::new("MissingInput", format!("{} does not exist{hint}", path.display())))
    }
}

fn require_dir(path: &Path, hint: &str) -> Result<(), Failure> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Failure::new("MissingInput", format!("{} is not a directory{hint}", path.display())))
    }
}

fn ensure_parent(path: &Path) -> Result<(), Failure> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => fs::create_dir_all(dir).map_err(|e| Failure::new("Io", format!("{}: {e}", dir.display()))),
        None => Ok(()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(|e| Failure::new("Io", format!("{}: {e}", path.display())))
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn display(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

fn rounded(x: f64) -> f64 {
    fmt4(x).parse().expect("formatted float")
}

fn ingest(a: IngestArgs, cfg: PipelineConfig) -> Result<Summary, Failure> {
    let steam_path = a.steam.unwrap_or(cfg.paths.steam_metadata);
    let meta_path = a.meta.unwrap_or(cfg.paths.meta_metadata);
    let out = a.out.unwrap_or(cfg.paths.metadata_csv);
    let mut filters = cfg.filters;
    filters.min_reviews = a.min_reviews.unwrap_or(filters.min_reviews);
    filters.min_year = a.min_year.unwrap_or(filters.min_year);
    if filters.min_reviews == 0 || filters.min_year <= 0 {
        return Err(Failure::new("Config", "min_reviews and min_year must be positive"));
    }
    require_file(&steam_path, "")?;
    require_file(&meta_path, "")?;

    let steam = parse_raw_steam_metadata(&steam_path).map_err(fail("Parse"))?;
    let meta = parse_raw_meta_metadata(&meta_path).map_err(fail("Parse"))?;
    let mut errors: Vec<(String, Store, String)> = Vec::new();
    for (store, parsed) in [(Store::Steam, &steam), (Store::Meta, &meta)] {
        for e in &parsed.errors {
            warn!(store = store.name(), entry = %e.key, "{}", e.message);
            errors.push((e.key.clone(), store, e.message.clone()));
        }
    }
    let (steam_count, meta_count) = (steam.records.len(), meta.records.len());
    let records: Vec<RawGameRecord> = steam.records.into_iter().chain(meta.records).collect();
    let mut seen = BTreeSet::new();
    for r in &records {
        if !seen.insert(r.game_id.as_str()) {
            return Err(Failure::new("ConflictingIds", format!("game id `{}` appears in both stores", r.game_id)));
        }
    }

    let filtered = filter_eligible_games(records, filters.rules());
    let mut tally = MappingTally::default();
    let mut games: Vec<GameMetadata> = filtered.eligible.iter().map(|r| map_categories(r, &mut tally)).collect();
    games.sort_by(|a, b| a.game_id.cmp(&b.game_id));
    ensure_parent(&out)?;
    write_metadata_csv(&out, &games).map_err(fail("Io"))?;

    let mut rows: Vec<Vec<String>> = errors
        .iter()
        .map(|(id, store, msg)| vec![id.clone(), store.name().into(), "ParseError".into(), msg.clone()])
        .collect();
    let mut by_reason: BTreeMap<&str, usize> = BTreeMap::new();
    for (rec, reason) in &filtered.excluded {
        *by_reason.entry(reason.name()).or_default() += 1;
        let detail = match (reason, &rec.release_date) {
            (ExclusionReason::TooFewReviews, _) => format!("review_count={}", rec.review_count),
            (_, ReleaseDate::Parsed(d)) => format!("release_date={d}"),
            (_, ReleaseDate::Unparsed(s)) => format!("release_date={s}"),
        };
        rows.push(vec![rec.game_id.clone(), rec.store.name().into(), reason.name().into(), detail]);
    }
    rows.sort();
    let dir = out.parent().map(Path::to_path_buf).unwrap_or_default();
    let exclusions = dir.join(EXCLUSIONS_FILE);
    write_file(&exclusions, &csv_bytes(&["game_id", "store", "reason", "detail"], &rows))?;

    let counts: Vec<(String, u64)> = filtered.eligible.iter().map(|r| (r.game_id.clone(), r.review_count)).collect();
    let dataset = summarize_dataset(&counts, 10);
    let summary_json = json!({
        "parsed": {"steam": steam_count, "meta": meta_count},
        "parse_errors": errors.len(),
        "excluded": by_reason,
        "eligible": dataset,
        "mapping": {
            "unmatched_keywords": tally.unmatched,
            "missing_price": tally.missing_price,
            "free_to_play_conflicts": tally.free_to_play_conflicts,
            "age_clamped": tally.age_clamped,
        },
    });
    let summary_path = dir.join(DATASET_SUMMARY_FILE);
    let mut text = serde_json::to_string_pretty(&summary_json).expect("summary serializes");
    text.push('\n');
    write_file(&summary_path, text.as_bytes())?;
    info!(eligible = games.len(), excluded = filtered.excluded.len(), parse_errors = errors.len(), "ingest finished");

    let mut s = Summary::with_diagnostics(!errors.is_empty() || !tally.missing_price.is_empty());
    if a.fetch_reviews {
        let reviews_dir = a.reviews_dir.unwrap_or(cfg.paths.reviews_dir);
        let mut steam_cfg = cfg.steam.clone();
        if let Some(u) = a.steam_base_url {
            steam_cfg.base_url = u;
        }
        let fetched = fetch_missing_reviews(&filtered.eligible, &reviews_dir, &steam_cfg)?;
        s.diagnostics |= !fetched.failed.is_empty();
        s.set("reviews_fetched", fetched.written);
        s.set("reviews_present", fetched.present);
        s.set("reviews_failed", fetched.failed);
    }
    s.set("parsed", steam_count + meta_count);
    s.set("parse_errors", errors.iter().map(|e| &e.0).collect::<Vec<_>>());
    s.set("eligible", games.len());
    s.set("excluded", filtered.excluded.len());
    s.set("missing_price", &tally.missing_price);
    s.set("outputs", display(&[out, exclusions, summary_path]));
    Ok(s)
}

#[derive(Default)]
struct Fetched {
    written: usize,
    present: usize,
    failed: Vec<String>,
}

fn fetch_missing_reviews(eligible: &[RawGameRecord], dir: &Path, steam: &crate::config::Steam) -> Result<Fetched, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::new("Io", format!("{}: {e}", dir.display())))?;
    let client = steam.client_config();
    let limiter = RateLimiter::new(steam.interval());
    let mut out = Fetched::default();
    let mut ids: Vec<&RawGameRecord> = eligible.iter().collect();
    ids.sort_by(|a, b| a.game_id.cmp(&b.game_id));
    for rec in ids {
        if rec.store != Store::Steam {
            continue;
        }
        if find_review_file(dir, &rec.game_id).map_err(fail("Io"))?.is_some() {
            out.present += 1;
            continue;
        }
        match fetch_steam_reviews(&rec.game_id, steam.max_reviews, &client, &limiter) {
            Ok(f) => {
                write_review_file(dir, &rec.game_id, &f.reviews).map_err(fail("Io"))?;
                out.written += 1;
            }
            Err(e) => {
                warn!(game = %rec.game_id, "review fetch failed: {e}");
                out.failed.push(rec.game_id.clone());
            }
        }
    }
    Ok(out)
}

/// Connects to the endpoint's host and port without sending anything.
fn probe_endpoint(endpoint: &str) -> Result<(), Failure> {
    let unreachable = |m: String| Failure::new("EndpointUnreachable", format!("{endpoint}: {m}"));
    let url = url::Url::parse(endpoint).map_err(|e| unreachable(e.to_string()))?;
    let host = url.host_str().ok_or_else(|| unreachable("no host".into()))?;
    let port = url.port_or_known_default().ok_or_else(|| unreachable("no port".into()))?;
    let addrs: Vec<_> = (host, port).to_socket_addrs().map_err(|e| unreachable(e.to_string()))?.collect();
    let mut last = String::from("host resolved to no addresses");
    for addr in addrs {
        match TcpStream::connect_timeout(&addr, PROBE_TIMEOUT) {
            Ok(_) => return Ok(()),
            Err(e) => last = e.to_string(),
        }
    }
    Err(unreachable(last))
}

fn quantify(a: QuantifyArgs, cfg: PipelineConfig) -> Result<Summary, Failure> {
    let mut q = cfg.quantifier.clone();
    if let Some(v) = a.endpoint {
        q.endpoint_url = v;
    }
    if let Some(v) = a.model {
        q.model_name = v;
    }
    q.concurrency = a.concurrency.unwrap_or(q.concurrency);
    q.top_n_reviews = a.top_n.unwrap_or(q.top_n_reviews);
    if q.concurrency == 0 || q.top_n_reviews == 0 {
        return Err(Failure::new("Config", "concurrency and top_n must be positive"));
    }
    let metadata = a.metadata.unwrap_or(cfg.paths.metadata_csv);
    let reviews_dir = a.reviews_dir.unwrap_or(cfg.paths.reviews_dir);
    let out = a.out.unwrap_or(cfg.paths.quantified_dir);
    let checkpoint_path = a.checkpoint.unwrap_or(cfg.paths.checkpoint);
    require_file(&metadata, "; run ingest first")?;
    require_dir(&reviews_dir, "")?;

    let client: Box<dyn ChatClient> = match &a.mock_llm {
        Some(script) => {
            require_file(script, "")?;
            Box::new(ScriptedClient::new(MockScript::load(script).map_err(|e| Failure::new("Config", e.0))?))
        }
        None => {
            probe_endpoint(&q.endpoint_url)?;
            let key = a.api_key.or(cfg.api_key);
            Box::new(
                HttpChatClient::new(&q.endpoint_url, &q.model_name, q.temperature, key, q.request_timeout)
                    .map_err(|e| Failure::new("Config", e.0))?,
            )
        }
    };

    let mut games = read_metadata_csv(&metadata).map_err(fail("Parse"))?;
    games.sort_by(|a, b| a.game_id.cmp(&b.game_id));
    let mut checkpoint = Checkpoint::open(&checkpoint_path)
        .map_err(|e| Failure::new("Io", format!("{}: {e}", checkpoint_path.display())))?;
    let mut totals = BTreeMap::from([
        ("games", 0u64),
        ("skipped", 0),
        ("attempted", 0),
        ("quantified", 0),
        ("discarded", 0),
        ("calls", 0),
        ("retries", 0),
    ]);
    let mut missing = Vec::new();
    let mut warnings = Vec::new();
    for g in &games {
        *totals.get_mut("games").expect("key") += 1;
        if checkpoint.contains(&g.game_id) {
            *totals.get_mut("skipped").expect("key") += 1;
            continue;
        }
        let Some(path) = find_review_file(&reviews_dir, &g.game_id).map_err(fail("Io"))? else {
            warn!(game = %g.game_id, "no review file");
            missing.push(g.game_id.clone());
            continue;
        };
        let file = load_review_file(&path).map_err(fail("Parse"))?;
        for w in &file.warnings {
            warn!(game = %g.game_id, "{w}");
            warnings.push(format!("{}: {w}", g.game_id));
        }
        let r = quantify_game(&g.game_id, &file.reviews, &q, client.as_ref(), &mut checkpoint, &out)
            .map_err(fail("Io"))?;
        for (k, v) in [
            ("attempted", r.attempted as u64),
            ("quantified", r.quantified as u64),
            ("discarded", r.discarded as u64),
            ("calls", r.calls),
            ("retries", r.retries),
        ] {
            *totals.get_mut(k).expect("key") += v;
        }
    }
    let mut s = Summary::with_diagnostics(!missing.is_empty() || !warnings.is_empty());
    for (k, v) in totals {
        s.set(k, v);
    }
    s.set("missing_review_files", missing);
    s.set("review_file_warnings", warnings);
    s.set("mock", a.mock_llm.is_some());
    s.set("outputs", display(&[out]));
    Ok(s)
}

fn aggregate(a: AggregateArgs, cfg: PipelineConfig) -> Result<Summary, Failure> {
    let quantified = a.quantified.unwrap_or(cfg.paths.quantified_dir);
    let metadata = a.metadata.unwrap_or(cfg.paths.metadata_csv);
    let out = a.out.unwrap_or(cfg.paths.dataset_dir);
    require_dir(&quantified, "; run quantify first")?;
    require_file(&metadata, "; run ingest first")?;
    let build = build_dataset(&quantified, &metadata, &out).map_err(|e| match e {
        AggregateError::EmptyDataset => Failure::new("EmptyDataset", e.to_string()),
        AggregateError::Io { .. } => Failure::new("Io", e.to_string()),
        _ => Failure::new("Parse", e.to_string()),
    })?;
    let mut s = Summary::with_diagnostics(build.has_diagnostics());
    s.set("averaged_games", build.averaged_games);
    s.set("merged_games", build.merged_games);
    s.set("empty_games", &build.empty_games);
    s.set("unmatched_metadata", &build.unmatched_metadata);
    s.set("unmatched_averages", &build.unmatched_averages);
    s.set("outputs", display(&[build.averages_path, build.merged_path]));
    Ok(s)
}

fn load_rows(data: &Path) -> Result<Vec<MergedGameRow>, Failure> {
    require_file(data, "; run aggregate first")?;
    read_merged_csv(data).map_err(fail("Parse"))
}

fn platform_counts(rows: &[MergedGameRow], platforms: &[Platform]) -> BTreeMap<&'static str, usize> {
    platforms
        .iter()
        .map(|p| (p.name(), rows.iter().filter(|r| Platform::of(&r.meta) == *p).count()))
        .collect()
}

fn analyze_cmd(a: AnalyzeArgs, cfg: PipelineConfig) -> Result<Summary, Failure> {
    let data = a.data.unwrap_or_else(|| cfg.paths.dataset_dir.join(MERGED_FILE));
    let out = a.out.unwrap_or(cfg.paths.reports_dir);
    let rows = load_rows(&data)?;
    let platforms = a.platform.platforms();
    let report = analyze(&rows, &platforms);
    let files = emit_report(&report, &out).map_err(fail("Io"))?;
    let counts = platform_counts(&rows, &platforms);
    let mut s = Summary::with_diagnostics(counts.values().any(|n| *n == 0));
    s.set("games", rows.len());
    s.set("platform_games", counts);
    s.set("outputs", display(&files));
    Ok(s)
}

fn predict_error(e: PredictError) -> Failure {
    match e {
        PredictError::EmptyDataset => Failure::new("EmptyDataset", e.to_string()),
        PredictError::Config(_) => Failure::new("Config", e.to_string()),
        PredictError::Io { .. } => Failure::new("Io", e.to_string()),
        _ => Failure::new("Model", e.to_string()),
    }
}

fn train(a: TrainArgs, cfg: PipelineConfig) -> Result<Summary, Failure> {
    let data = a.data.unwrap_or_else(|| cfg.paths.dataset_dir.join(MERGED_FILE));
    let model_path = a.model.unwrap_or(cfg.paths.model);
    let mut tc = cfg.train;
    tc.rounds = a.rounds.unwrap_or(tc.rounds);
    tc.learning_rate = a.learning_rate.unwrap_or(tc.learning_rate);
    tc.max_depth = a.max_depth.unwrap_or(tc.max_depth);
    tc.min_samples_leaf = a.min_samples_leaf.unwrap_or(tc.min_samples_leaf);
    tc.validate().map_err(predict_error)?;
    let rows = load_rows(&data)?;
    let m = build_feature_matrix(&rows).map_err(predict_error)?;
    let model = train_gbt(&m.features, &m.labels, &feature_names(), &tc).map_err(predict_error)?;
    ensure_parent(&model_path)?;
    save_model(&model, &model_path).map_err(predict_error)?;
    let eval = evaluate(&model, &m.features, &m.labels).map_err(fail("Model"))?;
    info!(rows = eval.n, trees = model.trees.len(), mse = eval.mse, "model trained");
    let mut s = Summary::with_diagnostics(!m.dropped.is_empty());
    s.set("rows", eval.n);
    s.set("dropped", &m.dropped);
    s.set("trees", model.trees.len());
    s.set("train_mse", rounded(eval.mse));
    s.set("train_mae", rounded(eval.mae));
    s.set("train_r2", eval.r2.map(rounded));
    s.set("outputs", display(&[model_path]));
    Ok(s)
}

fn load_model_checked(path: &Path) -> Result<GbtModel, Failure> {
    require_file(path, "; run train first")?;
    load_model(path).map_err(predict_error)
}

fn predict_cmd(a: PredictArgs, cfg: PipelineConfig) -> Result<Summary, Failure> {
    let model = load_model_checked(&a.model.unwrap_or(cfg.paths.model))?;
    let data = a.data.unwrap_or_else(|| cfg.paths.dataset_dir.join(MERGED_FILE));
    let out = a.out.unwrap_or_else(|| cfg.paths.reports_dir.join(PREDICTIONS_FILE));
    let rows = load_rows(&data)?;
    let mut table = Vec::with_capacity(rows.len());
    for r in &rows {
        let p = predict(&model, &encode_features(&r.meta)).map_err(fail("Model"))?;
        table.push(vec![
            r.meta.game_id.clone(),
            Platform::of(&r.meta).name().to_string(),
            fmt4(p),
            r.averages.overall_rating.map(fmt4).unwrap_or_default(),
        ]);
    }
    write_file(&out, &csv_bytes(&["game_id", "platform", "predicted", "overall_rating"], &table))?;
    let mut s = Summary::default();
    s.set("games", rows.len());
    s.set("outputs", display(&[out]));
    Ok(s)
}

fn genre_influence_cmd(a: GenreInfluenceArgs, cfg: PipelineConfig) -> Result<Summary, Failure> {
    let model = load_model_checked(&a.model.unwrap_or(cfg.paths.model))?;
    let data = a.data.unwrap_or_else(|| cfg.paths.dataset_dir.join(MERGED_FILE));
    let out = a.out.unwrap_or(cfg.paths.reports_dir);
    let rows = load_rows(&data)?;
    let platforms = a.platform.platforms();
    let mut files = Vec::new();
    let mut genres = BTreeMap::new();
    for p in &platforms {
        let table = genre_influence(&model, &rows, *p).map_err(fail("Model"))?;
        let body: Vec<Vec<String>> = table
            .iter()
            .map(|g| vec![g.genre.name().to_string(), g.games.to_string(), fmt4(g.predicted)])
            .collect();
        let path = out.join(genre_influence_csv(*p));
        write_file(&path, &csv_bytes(&["genre", "games", "predicted"], &body))?;
        genres.insert(p.name(), table.len());
        files.push(path);
    }
    let counts = platform_counts(&rows, &platforms);
    let mut s = Summary::with_diagnostics(counts.values().any(|n| *n == 0));
    s.set("platform_games", counts);
    s.set("genres", genres);
    s.set("outputs", display(&files));
    Ok(s)
}

fn read_csv_rows(path: &Path) -> Result<Vec<Vec<String>>, Failure> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Failure::new("Parse", format!("{}: {e}", path.display())))?;
    r.records()
        .map(|rec| {
            rec.map(|rec| rec.iter().map(str::to_string).collect())
                .map_err(|e| Failure::new("Parse", format!("{}: {e}", path.display())))
        })
        .collect()
}

fn opt4(x: Option<f64>) -> String {
    x.map(fmt4).unwrap_or_else(|| "n/a".into())
}

fn report(a: ReportArgs, cfg: PipelineConfig) -> Result<Summary, Failure> {
    let dir = a.reports.unwrap_or(cfg.paths.reports_dir);
    let model_path = a.model.unwrap_or(cfg.paths.model);
    let out = a.out.unwrap_or_else(|| dir.join(SUMMARY_MD));
    let report_path = dir.join(REPORT_JSON);
    require_file(&report_path, "; run analyze first")?;
    let analysis = AnalysisReport::load(&report_path).map_err(fail("Parse"))?;
    let model = if model_path.is_file() { Some(load_model(&model_path).map_err(predict_error)?) } else { None };
    let mut influence = Vec::new();
    for p in Platform::ALL {
        let path = dir.join(genre_influence_csv(p));
        if path.is_file() {
            influence.push((p, read_csv_rows(&path)?));
        }
    }
    let md = render_summary(&analysis, model.as_ref(), &influence);
    write_file(&out, md.as_bytes())?;
    let mut s = Summary::with_diagnostics(model.is_none() || influence.is_empty());
    s.set("model", model.is_some());
    s.set("genre_influence_tables", influence.len());
    s.set("outputs", display(&[out]));
    Ok(s)
}

fn render_summary(r: &AnalysisReport, model: Option<&GbtModel>, influence: &[(Platform, Vec<Vec<String>>)]) -> String {
    let mut md = String::from("# Review mining summary\n\n");
    let label = |p: Platform| p.name().to_uppercase();

    let pc = &r.platform_comparison;
    let cols: Vec<Platform> = Platform::ALL.into_iter().filter(|p| pc.column(*p).is_some()).collect();
    md.push_str("## Share of games rated 4 or higher\n\n| Element |");
    for p in &cols {
        let _ = write!(md, " {} % |", label(*p));
    }
    md.push_str("\n|---|");
    md.push_str(&"---:|".repeat(cols.len()));
    md.push('\n');
    for e in DesignElement::ALL {
        let _ = write!(md, "| {} |", e.name());
        for p in &cols {
            let _ = write!(md, " {} |", fmt4(pc.column(*p).expect("present").pct[e.index()]));
        }
        md.push('\n');
    }
    md.push_str("| Total Average |");
    for p in &cols {
        let _ = write!(md, " {} |", fmt4(pc.column(*p).expect("present").total_avg));
    }
    md.push_str("\n| Games |");
    for p in &cols {
        let _ = write!(md, " {} |", pc.column(*p).expect("present").games);
    }
    md.push_str("\n\n");

    for c in &r.correlations {
        let _ = write!(
            md,
            "## Price correlations ({})\n\nOverall rating vs price tier: r = {} over {} games.\n\n\
             | Element | r (tier share) | r (per game) | n |\n|---|---:|---:|---:|\n",
            label(c.platform),
            opt4(c.total.r),
            c.total.n
        );
        for e in &c.elements {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} |",
                e.element.name(),
                opt4(e.price_tier.r),
                opt4(e.per_game.r),
                e.per_game.n
            );
        }
        md.push('\n');
    }

    for t in &r.genre_elements {
        let _ = write!(
            md,
            "## Top genre per element ({})\n\n| Element | Genre | Mean | Games |\n|---|---|---:|---:|\n",
            label(t.platform)
        );
        for e in DesignElement::ALL {
            let best = t
                .rows
                .iter()
                .filter_map(|row| row.means[e.index()].map(|m| (row, m)))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.genre.cmp(&a.0.genre)));
            match best {
                Some((row, m)) => {
                    let _ = writeln!(md, "| {} | {} | {} | {} |", e.name(), row.genre.name(), fmt4(m), row.games);
                }
                None => {
                    let _ = writeln!(md, "| {} | n/a | n/a | 0 |", e.name());
                }
            }
        }
        md.push('\n');
    }

    md.push_str("## Rating model\n\n");
    match model {
        Some(m) => {
            let first = m.training_history.first().copied().unwrap_or(f64::NAN);
            let last = m.training_history.last().copied().unwrap_or(f64::NAN);
            let _ = write!(
                md,
                "{} trees (learning rate {}, max depth {}), base score {}.\nTraining MSE {} -> {}.\n\n",
                m.trees.len(),
                m.learning_rate,
                m.config.max_depth,
                fmt4(m.base_score),
                fmt4(first),
                fmt4(last)
            );
        }
        None => md.push_str("No model found.\n\n"),
    }

    for (p, rows) in influence {
        let _ = write!(
            md,
            "## Genre influence ({})\n\n| Genre | Games | Predicted rating |\n|---|---:|---:|\n",
            label(*p)
        );
        for row in rows {
            let _ = writeln!(md, "| {} |", row.join(" | "));
        }
        md.push('\n');
    }
    md.truncate(md.trim_end().len());
    md.push('\n');
    md
}
