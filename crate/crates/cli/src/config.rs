use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use reviewmine::ingest::{EligibilityRules, SteamClientConfig};
use reviewmine::predict::TrainConfig;
use reviewmine::quantify::QuantifierConfig;
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub steam_metadata: PathBuf,
    pub meta_metadata: PathBuf,
    pub reviews_dir: PathBuf,
    pub metadata_csv: PathBuf,
    pub quantified_dir: PathBuf,
    pub dataset_dir: PathBuf,
    pub reports_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub model: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            steam_metadata: "raw/steam.json".into(),
            meta_metadata: "raw/meta.json".into(),
            reviews_dir: "reviews".into(),
            metadata_csv: "data/metadata.csv".into(),
            quantified_dir: "data/quantified".into(),
            dataset_dir: "data".into(),
            reports_dir: "reports".into(),
            checkpoint: "data/quantified/checkpoint.txt".into(),
            model: "models/model.json".into(),
        }
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.steam_metadata,
            &mut self.meta_metadata,
            &mut self.reviews_dir,
            &mut self.metadata_csv,
            &mut self.quantified_dir,
            &mut self.dataset_dir,
            &mut self.reports_dir,
            &mut self.checkpoint,
            &mut self.model,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Filters {
    pub min_reviews: u64,
    pub min_year: i32,
}

impl Default for Filters {
    fn default() -> Self {
        let r = EligibilityRules::default();
        Filters { min_reviews: r.min_reviews, min_year: r.min_year }
    }
}

impl Filters {
    pub fn rules(&self) -> EligibilityRules {
        EligibilityRules { min_reviews: self.min_reviews, min_year: self.min_year }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Steam {
    pub base_url: String,
    /// Seconds between requests.
    pub interval: f64,
    pub max_reviews: usize,
    pub max_retries: u32,
}

impl Default for Steam {
    fn default() -> Self {
        Steam {
            base_url: SteamClientConfig::default().base_url,
            interval: 1.5,
            max_reviews: 100,
            max_retries: 3,
        }
    }
}

impl Steam {
    pub fn client_config(&self) -> SteamClientConfig {
        SteamClientConfig {
            base_url: self.base_url.clone(),
            max_retries: self.max_retries,
            ..SteamClientConfig::default()
        }
    }

    pub fn interval(&self) -> Duration {
        Duration::try_from_secs_f64(self.interval).unwrap_or_default()
    }
}

/// Everything a command may need. Relative paths are resolved against the
/// directory holding the config file, or the working directory without one.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub quantifier: QuantifierConfig,
    pub filters: Filters,
    pub train: TrainConfig,
    pub steam: Steam,
    /// Only ever read from `QUANT_API_KEY` or `--api-key`.
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<PipelineConfig, String> {
        let (mut cfg, base) = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                let cfg: PipelineConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (cfg, base)
            }
            None => (PipelineConfig::default(), PathBuf::new()),
        };
        let base = if base.as_os_str().is_empty() {
            std::env::current_dir().map_err(|e| format!("working directory: {e}"))?
        } else {
            base
        };
        cfg.paths.resolve(&base);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.filters.min_reviews == 0 {
            return Err("filters.min_reviews must be positive".into());
        }
        if self.filters.min_year <= 0 {
            return Err("filters.min_year must be positive".into());
        }
        let q = &self.quantifier;
        if q.top_n_reviews == 0 {
            return Err("quantifier.top_n_reviews must be positive".into());
        }
        if q.concurrency == 0 {
            return Err("quantifier.concurrency must be positive".into());
        }
        if !(q.temperature.is_finite() && q.temperature >= 0.0) {
            return Err("quantifier.temperature must be a non-negative number".into());
        }
        if !(self.steam.interval.is_finite() && self.steam.interval >= 0.0) {
            return Err("steam.interval must be a non-negative number".into());
        }
        self.train.validate().map_err(|e| e.to_string())
    }
}
