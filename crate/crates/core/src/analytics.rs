//! Price correlations, platform comparison and per-genre element averages.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tracing::warn;

use crate::aggregate::{MergedGameRow, HIGH_RATING};
use crate::quantify::write_atomic;
use crate::schema::{encode_price_ordinal, ArgumentError, DesignElement, GameMetadata, Genre};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error(transparent)]
    Argument(#[from] ArgumentError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Pc,
    Vr,
}

impl Platform {
    pub const ALL: [Platform; 2] = [Platform::Pc, Platform::Vr];

    pub fn name(self) -> &'static str {
        match self {
            Platform::Pc => "pc",
            Platform::Vr => "vr",
        }
    }

    /// Split on the VR flag alone, so Steam VR titles count as VR.
    pub fn of(meta: &GameMetadata) -> Platform {
        if meta.is_vr() {
            Platform::Vr
        } else {
            Platform::Pc
        }
    }
}

impl std::str::FromStr for Platform {
    type Err = ArgumentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pc" => Ok(Platform::Pc),
            "vr" => Ok(Platform::Vr),
            _ => Err(ArgumentError(format!("unknown platform `{s}`"))),
        }
    }
}

/// Sample Pearson coefficient, or `None` when it is undefined (fewer than
/// two points or a constant series).
///
/// Single pass with running means; the co-moment update is symmetric in
/// its arguments so `pearson(x, y) == pearson(y, x)` bit for bit.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Option<f64>, ArgumentError> {
    if xs.len() != ys.len() {
        return Err(ArgumentError(format!("series lengths differ: {} vs {}", xs.len(), ys.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(ArgumentError("series contain non-finite values".into()));
    }
    if xs.len() < 2 {
        return Ok(None);
    }
    let (mut mx, mut my) = (0.0, 0.0);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        let n = (i + 1) as f64;
        let w = (n - 1.0) / n;
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx * w;
        syy += dy * dy * w;
        sxy += dx * dy * w;
        mx += dx / n;
        my += dy / n;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub n: usize,
    pub r: Option<f64>,
}

fn on_platform(rows: &[MergedGameRow], platform: Platform) -> impl Iterator<Item = &MergedGameRow> {
    rows.iter().filter(move |r| Platform::of(&r.meta) == platform)
}

fn ordinal(row: &MergedGameRow) -> f64 {
    f64::from(encode_price_ordinal(row.meta.price_category))
}

fn correlate(pairs: Vec<(f64, f64)>) -> Correlation {
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let r = pearson(&xs, &ys).expect("equal lengths, finite values");
    Correlation { n: xs.len(), r }
}

/// Per-game correlation between price ordinal and total high-rating share.
pub fn correlate_price_vs_ratings(rows: &[MergedGameRow], platform: Platform) -> Correlation {
    correlate(
        on_platform(rows, platform)
            .filter_map(|r| r.averages.total_high_pct.map(|p| (ordinal(r), p)))
            .collect(),
    )
}

/// Per-game correlation between price ordinal and one element's average.
pub fn correlate_price_vs_element_per_game(rows: &[MergedGameRow], element: DesignElement, platform: Platform) -> Correlation {
    correlate(
        on_platform(rows, platform)
            .filter_map(|r| r.averages.avg(element).map(|a| (ordinal(r), a)))
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierPoint {
    pub ordinal: u8,
    pub games: usize,
    /// Percent of the tier's games whose element average is at least 4.
    pub high_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierCorrelation {
    pub points: Vec<TierPoint>,
    pub r: Option<f64>,
}

/// Correlation over populated price tiers between tier ordinal and the
/// percentage of that tier's games rating the element 4 or higher.
pub fn correlate_price_vs_element(rows: &[MergedGameRow], element: DesignElement, platform: Platform) -> TierCorrelation {
    let mut tiers: BTreeMap<u8, (usize, usize)> = BTreeMap::new();
    for r in on_platform(rows, platform) {
        let t = tiers.entry(encode_price_ordinal(r.meta.price_category)).or_default();
        t.0 += 1;
        if r.averages.avg(element).is_some_and(|a| a >= HIGH_RATING) {
            t.1 += 1;
        }
    }
    let points: Vec<TierPoint> = tiers
        .into_iter()
        .map(|(ordinal, (games, high))| TierPoint { ordinal, games, high_pct: percent(high, games) })
        .collect();
    let xs: Vec<f64> = points.iter().map(|p| f64::from(p.ordinal)).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.high_pct).collect();
    let r = pearson(&xs, &ys).expect("equal lengths, finite values");
    TierCorrelation { points, r }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementCorrelation {
    pub element: DesignElement,
    pub price_tier: TierCorrelation,
    pub per_game: Correlation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub platform: Platform,
    pub total: Correlation,
    pub elements: Vec<ElementCorrelation>,
}

pub fn correlation_report(rows: &[MergedGameRow], platform: Platform) -> CorrelationReport {
    CorrelationReport {
        platform,
        total: correlate_price_vs_ratings(rows, platform),
        elements: DesignElement::ALL
            .into_iter()
            .map(|element| ElementCorrelation {
                element,
                price_tier: correlate_price_vs_element(rows, element, platform),
                per_game: correlate_price_vs_element_per_game(rows, element, platform),
            })
            .collect(),
    }
}

fn percent(count: usize, total: usize) -> f64 {
    100.0 * count as f64 / total as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformColumn {
    pub games: usize,
    /// Per element, percent of games with an average of at least 4.
    /// Games without data for the element stay in the denominator.
    pub pct: [f64; DesignElement::COUNT],
    pub total_avg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformComparison {
    pub pc: Option<PlatformColumn>,
    pub vr: Option<PlatformColumn>,
}

impl PlatformComparison {
    pub fn column(&self, platform: Platform) -> Option<&PlatformColumn> {
        match platform {
            Platform::Pc => self.pc.as_ref(),
            Platform::Vr => self.vr.as_ref(),
        }
    }
}

fn platform_column(rows: &[MergedGameRow], platform: Platform) -> Option<PlatformColumn> {
    let games: Vec<&MergedGameRow> = on_platform(rows, platform).collect();
    if games.is_empty() {
        warn!(platform = platform.name(), "no games for platform, column omitted");
        return None;
    }
    let mut pct = [0.0; DesignElement::COUNT];
    for (e, slot) in DesignElement::ALL.into_iter().zip(pct.iter_mut()) {
        let high = games.iter().filter(|r| r.averages.avg(e).is_some_and(|a| a >= HIGH_RATING)).count();
        *slot = percent(high, games.len());
    }
    let total_avg = pct.iter().sum::<f64>() / DesignElement::COUNT as f64;
    Some(PlatformColumn { games: games.len(), pct, total_avg })
}

pub fn platform_comparison(rows: &[MergedGameRow]) -> PlatformComparison {
    PlatformComparison {
        pc: platform_column(rows, Platform::Pc),
        vr: platform_column(rows, Platform::Vr),
    }
}

/// One (game, genre, element) observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreRecord {
    pub game_id: String,
    pub platform: Platform,
    pub genre: Genre,
    pub element: DesignElement,
    pub value: f64,
}

/// Long format: one record per set genre flag and present element.
pub fn unpivot_genres(rows: &[MergedGameRow]) -> Vec<GenreRecord> {
    let mut out = Vec::new();
    for r in rows {
        let platform = Platform::of(&r.meta);
        for genre in r.meta.set_genres() {
            for (element, value) in r.averages.present_elements() {
                out.push(GenreRecord { game_id: r.meta.game_id.clone(), platform, genre, element, value });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreRow {
    pub genre: Genre,
    pub games: usize,
    pub means: [Option<f64>; DesignElement::COUNT],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreElementTable {
    pub platform: Platform,
    /// Canonical genre order; genres without games are left out.
    pub rows: Vec<GenreRow>,
}

impl GenreElementTable {
    /// Orders rows by one element, highest first. Missing values sort last.
    pub fn sort_by_element(&mut self, element: DesignElement) {
        let key = |r: &GenreRow| r.means[element.index()].unwrap_or(f64::NEG_INFINITY);
        self.rows.sort_by(|a, b| key(b).total_cmp(&key(a)).then(a.genre.cmp(&b.genre)));
    }
}

pub fn genre_element_averages(long_rows: &[GenreRecord], platform: Platform) -> GenreElementTable {
    // Per genre: (sum, count) per element and the games seen.
    type Acc<'a> = ([(f64, u32); DesignElement::COUNT], BTreeSet<&'a str>);
    let mut sums: BTreeMap<Genre, Acc> = BTreeMap::new();
    for rec in long_rows.iter().filter(|r| r.platform == platform) {
        let (cells, games) = sums.entry(rec.genre).or_insert_with(|| ([(0.0, 0); DesignElement::COUNT], BTreeSet::new()));
        let cell = &mut cells[rec.element.index()];
        cell.0 += rec.value;
        cell.1 += 1;
        games.insert(&rec.game_id);
    }
    let rows = sums
        .into_iter()
        .map(|(genre, (cells, games))| GenreRow {
            genre,
            games: games.len(),
            means: cells.map(|(s, n)| (n > 0).then(|| s / f64::from(n))),
        })
        .collect();
    GenreElementTable { platform, rows }
}

/// How the report's figures were derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub high_rating_threshold: f64,
    pub zero_scores_excluded: bool,
    pub absent_elements_in_denominator: bool,
    pub element_price_correlation: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            high_rating_threshold: HIGH_RATING,
            zero_scores_excluded: true,
            absent_elements_in_denominator: true,
            element_price_correlation: "price_tier: pearson over (tier ordinal, percent of tier games >= 4); \
                                        per_game: pearson over (tier ordinal, element average)"
                .into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub conventions: Conventions,
    pub correlations: Vec<CorrelationReport>,
    pub platform_comparison: PlatformComparison,
    pub genre_elements: Vec<GenreElementTable>,
}

/// Runs every analysis for the requested platforms.
pub fn analyze(rows: &[MergedGameRow], platforms: &[Platform]) -> AnalysisReport {
    let long = unpivot_genres(rows);
    AnalysisReport {
        conventions: Conventions::default(),
        correlations: platforms.iter().map(|p| correlation_report(rows, *p)).collect(),
        platform_comparison: platform_comparison(rows),
        genre_elements: platforms.iter().map(|p| genre_element_averages(&long, *p)).collect(),
    }
}

/// Four decimals, ties to even on the binary value, no negative zero.
pub fn fmt4(x: f64) -> String {
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

fn fmt4_opt(x: Option<f64>) -> String {
    x.map(fmt4).unwrap_or_default()
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r: f64 = fmt4(n.as_f64().expect("f64 number")).parse().expect("formatted float");
            *v = serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

impl AnalysisReport {
    /// The report with every float rounded to four decimals, as written to
    /// `report.json`.
    pub fn rounded(&self) -> AnalysisReport {
        let mut v = serde_json::to_value(self).expect("report serializes");
        round_floats(&mut v);
        serde_json::from_value(v).expect("rounded report deserializes")
    }

    pub fn load(path: &Path) -> Result<AnalysisReport, AnalyticsError> {
        let text = fs::read_to_string(path).map_err(|source| AnalyticsError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|e| AnalyticsError::Format { path: path.to_path_buf(), message: e.to_string() })
    }
}

pub const REPORT_JSON: &str = "report.json";
pub const PLATFORM_COMPARISON_CSV: &str = "platform_comparison.csv";

pub fn correlations_csv(platform: Platform) -> String {
    format!("correlations_{}.csv", platform.name())
}

pub fn genre_elements_csv(platform: Platform) -> String {
    format!("genre_elements_{}.csv", platform.name())
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn correlation_rows(c: &CorrelationReport) -> Vec<Vec<String>> {
    let mut rows = vec![vec!["Total".into(), "per_game".into(), c.total.n.to_string(), fmt4_opt(c.total.r)]];
    for e in &c.elements {
        let name = e.element.name().to_string();
        rows.push(vec![name.clone(), "price_tier".into(), e.price_tier.points.len().to_string(), fmt4_opt(e.price_tier.r)]);
        rows.push(vec![name, "per_game".into(), e.per_game.n.to_string(), fmt4_opt(e.per_game.r)]);
    }
    rows
}

fn comparison_rows(p: &PlatformComparison) -> Vec<Vec<String>> {
    let cell = |col: &Option<PlatformColumn>, f: &dyn Fn(&PlatformColumn) -> String| col.as_ref().map(f).unwrap_or_default();
    let mut rows: Vec<Vec<String>> = DesignElement::ALL
        .into_iter()
        .map(|e| {
            vec![
                e.name().to_string(),
                cell(&p.pc, &|c| fmt4(c.pct[e.index()])),
                cell(&p.vr, &|c| fmt4(c.pct[e.index()])),
            ]
        })
        .collect();
    rows.push(vec!["Total Average".into(), cell(&p.pc, &|c| fmt4(c.total_avg)), cell(&p.vr, &|c| fmt4(c.total_avg))]);
    rows.push(vec!["Games".into(), cell(&p.pc, &|c| c.games.to_string()), cell(&p.vr, &|c| c.games.to_string())]);
    rows
}

fn genre_rows(t: &GenreElementTable) -> Vec<Vec<String>> {
    t.rows
        .iter()
        .map(|r| {
            let mut row = vec![r.genre.name().to_string(), r.games.to_string()];
            row.extend(r.means.iter().map(|m| fmt4_opt(*m)));
            row
        })
        .collect()
}

/// Writes the CSV tables and `report.json` into `out_dir` and returns the
/// paths written, in write order.
pub fn emit_report(report: &AnalysisReport, out_dir: &Path) -> Result<Vec<PathBuf>, AnalyticsError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| AnalyticsError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    for c in &report.correlations {
        files.push((
            out_dir.join(correlations_csv(c.platform)),
            csv_bytes(&["element", "method", "n", "r"], &correlation_rows(c)),
        ));
    }
    files.push((
        out_dir.join(PLATFORM_COMPARISON_CSV),
        csv_bytes(&["element", "pct_pc", "pct_vr"], &comparison_rows(&report.platform_comparison)),
    ));
    let genre_header: Vec<&str> = ["genre", "games"].into_iter().chain(DesignElement::ALL.iter().map(|e| e.name())).collect();
    for t in &report.genre_elements {
        files.push((out_dir.join(genre_elements_csv(t.platform)), csv_bytes(&genre_header, &genre_rows(t))));
    }
    let mut json = serde_json::to_string_pretty(&report.rounded()).expect("report serializes");
    json.push('\n');
    files.push((out_dir.join(REPORT_JSON), json.into_bytes()));

    let mut written = Vec::new();
    for (path, bytes) in files {
        write_atomic(&path, &bytes).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
