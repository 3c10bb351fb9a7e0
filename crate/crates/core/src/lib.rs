//! Game-review mining pipeline: store metadata ingestion, LLM-based review
//! quantification, per-game aggregation, statistical analyses and a
//! gradient-boosted rating model.

pub mod aggregate;
pub mod analytics;
pub mod ingest;
pub mod predict;
pub mod quantify;
pub mod schema;
pub mod table;

pub use schema::{
    DesignElement, GameMetadata, Genre, Language, PlatformFlag, PriceCategory, ReviewField, ReviewScores, Store,
};
