//! Raw store data: parsing, eligibility filtering, keyword mapping,
//! review files and the Steam reviews client.

mod mapping;
mod raw;
mod reviews;
mod steam_api;

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::Store;

pub use mapping::{map_categories, map_meta_categories, map_steam_categories, MappingTally};
pub use raw::{parse_raw_meta_metadata, parse_raw_steam_metadata, parse_release_date, ParsedMetadata};
pub use reviews::{find_review_file, load_review_file, write_review_file, ReviewFile};
pub use steam_api::{fetch_steam_reviews, FetchOutcome, RateLimiter, SteamClientConfig};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error at byte {offset}: {message}")]
    Parse {
        path: PathBuf,
        offset: usize,
        message: String,
    },
    #[error("{path}: duplicate game id `{id}`")]
    ConflictingIds { path: PathBuf, id: String },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: file name must look like <gameid>_<count>.csv")]
    BadFileName { path: PathBuf },
    #[error("network error: {0}")]
    Network(String),
    #[error("malformed reviews payload: {0}")]
    Payload(String),
}

/// Where a keyword came from in the raw dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KeywordSource {
    Genre,
    TagMapping,
    CategoryFlag,
    GameMode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReleaseDate {
    Parsed(NaiveDate),
    Unparsed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawGameRecord {
    pub game_id: String,
    pub name: String,
    pub store: Store,
    pub release_date: ReleaseDate,
    pub price_usd: Option<f64>,
    pub required_age: Option<u32>,
    pub keyword_bags: BTreeMap<KeywordSource, Vec<String>>,
    pub review_count: u64,
}

/// A raw entry that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryError {
    pub key: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawReview {
    pub review_id: String,
    pub game_id: String,
    pub text: String,
    /// 1 is the highest-rated review of the game.
    pub rating_rank: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExclusionReason {
    TooFewReviews,
    TooOld,
    UnreleasedOrUnknownDate,
}

impl ExclusionReason {
    pub fn name(self) -> &'static str {
        match self {
            ExclusionReason::TooFewReviews => "TooFewReviews",
            ExclusionReason::TooOld => "TooOld",
            ExclusionReason::UnreleasedOrUnknownDate => "UnreleasedOrUnknownDate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EligibilityRules {
    pub min_reviews: u64,
    pub min_year: i32,
}

impl Default for EligibilityRules {
    fn default() -> Self {
        EligibilityRules { min_reviews: 25, min_year: 2020 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub eligible: Vec<RawGameRecord>,
    pub excluded: Vec<(RawGameRecord, ExclusionReason)>,
}

/// Splits records into eligible and excluded. Checks run in a fixed order:
/// review count, then date parseability, then release year.
pub fn filter_eligible_games(records: Vec<RawGameRecord>, rules: EligibilityRules) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for rec in records {
        let reason = if rec.review_count < rules.min_reviews {
            Some(ExclusionReason::TooFewReviews)
        } else {
            match rec.release_date.year() {
                None => Some(ExclusionReason::UnreleasedOrUnknownDate),
                Some(y) if y < rules.min_year => Some(ExclusionReason::TooOld),
                Some(_) => None,
            }
        };
        match reason {
            Some(r) => out.excluded.push((rec, r)),
            None => out.eligible.push(rec),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub total_games: usize,
    pub total_reviews: u64,
    pub top_k: Vec<(String, u64)>,
}

/// Totals plus the `k` games with the most reviews (ties by id ascending).
pub fn summarize_dataset(games: &[(String, u64)], k: usize) -> DatasetSummary {
    let mut sorted: Vec<(String, u64)> = games.to_vec();
    sorted.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    sorted.truncate(k);
    DatasetSummary {
        total_games: games.len(),
        total_reviews: games.iter().map(|(_, c)| *c).sum(),
        top_k: sorted,
    }
}
