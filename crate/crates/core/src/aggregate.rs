//! Per-game element averages and the merged analytics table.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use crate::quantify::{read_quantified_file, QuantifyError, QUANTIFIED_SUFFIX};
use crate::schema::{DesignElement, GameMetadata, ReviewScores};
use crate::table::{self, TableError};

pub const AVERAGES_FILE: &str = "Tokenized_Reviews_Averages.csv";
pub const MERGED_FILE: &str = "merged_games.csv";

/// Element score at or above which a review (or game) counts as highly rated.
pub const HIGH_RATING: f64 = 4.0;

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("game {0} has no reviews to aggregate")]
    EmptyGame(String),
    #[error("duplicate game ids: {}", .0.join(", "))]
    ConflictingIds(Vec<String>),
    #[error("no games left to aggregate")]
    EmptyDataset,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Quantified(#[from] QuantifyError),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Summary of one element over a game's reviews. Zero scores are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ElementStats {
    pub avg: Option<f64>,
    pub rated_count: u32,
    /// Fraction of rated reviews scoring 4 or 5.
    pub high_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameElementAverages {
    pub game_id: String,
    pub review_count: u32,
    pub elements: [ElementStats; DesignElement::COUNT],
    pub overall_rating: Option<f64>,
    pub total_high_pct: Option<f64>,
}

impl GameElementAverages {
    pub fn element(&self, element: DesignElement) -> &ElementStats {
        &self.elements[element.index()]
    }

    pub fn avg(&self, element: DesignElement) -> Option<f64> {
        self.element(element).avg
    }

    pub fn present_elements(&self) -> impl Iterator<Item = (DesignElement, f64)> + '_ {
        DesignElement::ALL.into_iter().filter_map(|e| self.avg(e).map(|a| (e, a)))
    }
}

fn mean_present(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0u32), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / f64::from(n))
}

/// Averages a game's review records.
pub fn average_elements(game_id: &str, scores: &[ReviewScores]) -> Result<GameElementAverages, AggregateError> {
    if scores.is_empty() {
        return Err(AggregateError::EmptyGame(game_id.to_string()));
    }
    let mut elements = [ElementStats::default(); DesignElement::COUNT];
    for (e, stats) in DesignElement::ALL.into_iter().zip(elements.iter_mut()) {
        // Integer sums keep the result independent of review order.
        let (mut sum, mut rated, mut high) = (0u64, 0u32, 0u32);
        for s in scores {
            let v = s.element(e);
            if v > 0 {
                sum += u64::from(v);
                rated += 1;
                if f64::from(v) >= HIGH_RATING {
                    high += 1;
                }
            }
        }
        if rated > 0 {
            *stats = ElementStats {
                avg: Some(sum as f64 / f64::from(rated)),
                rated_count: rated,
                high_pct: Some(f64::from(high) / f64::from(rated)),
            };
        }
    }
    let mut out = GameElementAverages {
        game_id: game_id.to_string(),
        review_count: scores.len() as u32,
        elements,
        overall_rating: None,
        total_high_pct: mean_present(elements.iter().map(|s| s.high_pct)),
    };
    out.overall_rating = overall_rating(&out);
    Ok(out)
}

/// Unweighted mean of the present element averages.
pub fn overall_rating(averages: &GameElementAverages) -> Option<f64> {
    mean_present(averages.elements.iter().map(|s| s.avg))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergedGameRow {
    pub meta: GameMetadata,
    pub averages: GameElementAverages,
}

impl MergedGameRow {
    pub fn game_id(&self) -> &str {
        &self.meta.game_id
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergeOutcome {
    /// Sorted by game id.
    pub rows: Vec<MergedGameRow>,
    pub unmatched_metadata: Vec<String>,
    pub unmatched_averages: Vec<String>,
}

fn duplicates<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut dup = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            dup.insert(id.to_string());
        }
    }
    dup.into_iter().collect()
}

/// Inner join on game id.
pub fn merge_metadata_averages(
    meta: &[GameMetadata],
    avgs: &[GameElementAverages],
) -> Result<MergeOutcome, AggregateError> {
    let mut dup = duplicates(meta.iter().map(|m| m.game_id.as_str()));
    dup.extend(duplicates(avgs.iter().map(|a| a.game_id.as_str())));
    if !dup.is_empty() {
        dup.sort();
        dup.dedup();
        return Err(AggregateError::ConflictingIds(dup));
    }
    let mut by_id: BTreeMap<&str, &GameElementAverages> = avgs.iter().map(|a| (a.game_id.as_str(), a)).collect();
    let mut out = MergeOutcome::default();
    let mut sorted: Vec<&GameMetadata> = meta.iter().collect();
    sorted.sort_by(|a, b| a.game_id.cmp(&b.game_id));
    for m in sorted {
        match by_id.remove(m.game_id.as_str()) {
            Some(a) => out.rows.push(MergedGameRow { meta: m.clone(), averages: a.clone() }),
            None => out.unmatched_metadata.push(m.game_id.clone()),
        }
    }
    out.unmatched_averages = by_id.into_keys().map(str::to_string).collect();
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetBuild {
    pub averages_path: PathBuf,
    pub merged_path: PathBuf,
    pub averaged_games: usize,
    pub merged_games: usize,
    /// Quantified files that held no rows.
    pub empty_games: Vec<String>,
    pub unmatched_metadata: Vec<String>,
    pub unmatched_averages: Vec<String>,
}

impl DatasetBuild {
    pub fn has_diagnostics(&self) -> bool {
        !(self.empty_games.is_empty() && self.unmatched_metadata.is_empty() && self.unmatched_averages.is_empty())
    }
}

/// Lists `(game_id, path)` for every quantified file in `dir`, sorted by id.
pub fn quantified_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, AggregateError> {
    let io = |source| AggregateError::Io { path: dir.to_path_buf(), source };
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        if let Some(id) = name.strip_suffix(QUANTIFIED_SUFFIX) {
            if !id.is_empty() {
                out.push((id.to_string(), path.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Averages every quantified file, merges with the tokenized metadata and
/// writes both tables into `out_dir`.
pub fn build_dataset(quantified_dir: &Path, metadata_file: &Path, out_dir: &Path) -> Result<DatasetBuild, AggregateError> {
    let meta = table::read_metadata_csv(metadata_file)?;
    let mut averages = Vec::new();
    let mut build = DatasetBuild::default();
    for (game_id, path) in quantified_files(quantified_dir)? {
        let rows = read_quantified_file(&path)?;
        if rows.is_empty() {
            warn!(game = %game_id, "quantified file has no rows, skipping");
            build.empty_games.push(game_id);
            continue;
        }
        let scores: Vec<ReviewScores> = rows.into_iter().map(|(_, s)| s).collect();
        averages.push(average_elements(&game_id, &scores)?);
    }
    if averages.is_empty() {
        return Err(AggregateError::EmptyDataset);
    }
    let merged = merge_metadata_averages(&meta, &averages)?;
    for id in &merged.unmatched_metadata {
        warn!(game = %id, "metadata row has no quantified reviews");
    }
    for id in &merged.unmatched_averages {
        warn!(game = %id, "quantified game missing from metadata");
    }
    if merged.rows.is_empty() {
        return Err(AggregateError::EmptyDataset);
    }
    fs::create_dir_all(out_dir).map_err(|source| AggregateError::Io { path: out_dir.to_path_buf(), source })?;
    build.averages_path = out_dir.join(AVERAGES_FILE);
    build.merged_path = out_dir.join(MERGED_FILE);
    table::write_averages_csv(&build.averages_path, &averages)?;
    table::write_merged_csv(&build.merged_path, &merged.rows)?;
    build.averaged_games = averages.len();
    build.merged_games = merged.rows.len();
    build.unmatched_metadata = merged.unmatched_metadata;
    build.unmatched_averages = merged.unmatched_averages;
    info!(averaged = build.averaged_games, merged = build.merged_games, "dataset built");
    Ok(build)
}
