//! Gradient-boosted regression trees over one-hot game features.
//!
//! Prediction is `base_score + learning_rate * sum(tree(x))`. Trees are fit
//! greedily to squared-error residuals; each leaf stores the mean residual of
//! the rows that reach it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

use crate::aggregate::MergedGameRow;
use crate::analytics::Platform;
use crate::quantify::write_atomic;
use crate::schema::{ArgumentError, GameMetadata, Genre, PlatformFlag, PriceCategory};

pub const MODEL_VERSION: u32 = 1;

/// Platform flags used as features; Is_Steam and Is_Early_Access are left out.
pub const FEATURE_FLAGS: [PlatformFlag; 7] = [
    PlatformFlag::IsVr,
    PlatformFlag::Is3d,
    PlatformFlag::IsIndie,
    PlatformFlag::FreeToPlay,
    PlatformFlag::IsCoop,
    PlatformFlag::IsSingleplayer,
    PlatformFlag::IsMultiplayer,
];

pub const FEATURE_COUNT: usize = PriceCategory::ALL.len() + FEATURE_FLAGS.len() + Genre::COUNT;

/// Smallest split gain (reduction in squared error) worth a node.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("no rows with a defined overall rating")]
    EmptyDataset,
    #[error(transparent)]
    Argument(#[from] ArgumentError),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot load model {path}: {message}")]
    Load { path: PathBuf, message: String },
}

pub fn feature_names() -> Vec<&'static str> {
    PriceCategory::ALL
        .iter()
        .map(|c| c.feature_name())
        .chain(FEATURE_FLAGS.iter().map(|f| f.name()))
        .chain(Genre::ALL.iter().map(|g| g.name()))
        .collect()
}

pub fn encode_features(meta: &GameMetadata) -> Vec<f64> {
    let bit = |b: bool| if b { 1.0 } else { 0.0 };
    let mut x = Vec::with_capacity(FEATURE_COUNT);
    x.extend(PriceCategory::ALL.iter().map(|c| bit(*c == meta.price_category)));
    x.extend(FEATURE_FLAGS.iter().map(|f| bit(meta.flag(*f))));
    x.extend(meta.genres.iter().map(|g| bit(*g)));
    x
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureMatrix {
    pub game_ids: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    /// Games left out because their overall rating is absent.
    pub dropped: Vec<String>,
}

pub fn build_feature_matrix(rows: &[MergedGameRow]) -> Result<FeatureMatrix, PredictError> {
    let mut m = FeatureMatrix::default();
    for r in rows {
        match r.averages.overall_rating {
            Some(label) => {
                m.game_ids.push(r.meta.game_id.clone());
                m.features.push(encode_features(&r.meta));
                m.labels.push(label);
            }
            None => {
                warn!(game = %r.meta.game_id, "no overall rating, dropped from training data");
                m.dropped.push(r.meta.game_id.clone());
            }
        }
    }
    if m.labels.is_empty() {
        return Err(PredictError::EmptyDataset);
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Recorded with the model. Training itself has no random choices.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { rounds: 50, learning_rate: 0.1, max_depth: 4, min_samples_leaf: 2, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PredictError> {
        let bad = |m: &str| Err(PredictError::Config(m.to_string()));
        if self.rounds == 0 {
            return bad("rounds must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be positive");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tree {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Tree>,
        right: Box<Tree>,
    },
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Tree::Leaf { value } => return *value,
                Tree::Split { feature, threshold, left, right } => {
                    node = if x[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Tree::Leaf { .. } => 0,
            Tree::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            Tree::Leaf { .. } => 1,
            Tree::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            Tree::Leaf { .. } => None,
            Tree::Split { feature, left, right, .. } => {
                Some((*feature).max(left.max_feature().unwrap_or(0)).max(right.max_feature().unwrap_or(0)))
            }
        }
    }

    fn all_finite(&self) -> bool {
        match self {
            Tree::Leaf { value } => value.is_finite(),
            Tree::Split { threshold, left, right, .. } => threshold.is_finite() && left.all_finite() && right.all_finite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub version: u32,
    pub feature_names: Vec<String>,
    pub base_score: f64,
    pub learning_rate: f64,
    pub config: TrainConfig,
    pub trees: Vec<Tree>,
    /// Training MSE before the first tree and after each tree.
    pub training_history: Vec<f64>,
}

impl GbtModel {
    pub fn constant(base_score: f64, feature_names: Vec<String>) -> GbtModel {
        GbtModel {
            version: MODEL_VERSION,
            feature_names,
            base_score,
            learning_rate: 1.0,
            config: TrainConfig::default(),
            trees: Vec::new(),
            training_history: Vec::new(),
        }
    }

    pub fn arity(&self) -> usize {
        self.feature_names.len()
    }

    fn tree_sum(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum()
    }
}

pub fn predict(model: &GbtModel, x: &[f64]) -> Result<f64, ArgumentError> {
    if x.len() != model.arity() {
        return Err(ArgumentError(format!("expected {} features, got {}", model.arity(), x.len())));
    }
    Ok(model.base_score + model.learning_rate * model.tree_sum(x))
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    arity: usize,
    cfg: &'a TrainConfig,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Grower<'_> {
    fn leaf(&self, idx: &[usize], residual: &[f64]) -> Tree {
        let sum: f64 = idx.iter().map(|&i| residual[i]).sum();
        Tree::Leaf { value: sum / idx.len() as f64 }
    }

    fn best_split(&self, idx: &[usize], residual: &[f64]) -> Option<BestSplit> {
        let n = idx.len();
        let min_leaf = self.cfg.min_samples_leaf;
        let total: f64 = idx.iter().map(|&i| residual[i]).sum();
        let parent = total * total / n as f64;
        let mut best: Option<BestSplit> = None;
        let mut order = idx.to_vec();
        for f in 0..self.arity {
            // Stable: rows with equal values keep canonical order.
            order.copy_from_slice(idx);
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += residual[order[k]];
                let (lo, hi) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                let left_n = k + 1;
                if lo == hi || left_n < min_leaf || n - left_n < min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / left_n as f64 + right_sum * right_sum / (n - left_n) as f64 - parent;
                if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold <= lo {
                        threshold = hi;
                    }
                    best = Some(BestSplit { feature: f, threshold, gain });
                }
            }
        }
        best
    }

    fn grow(&self, idx: &[usize], residual: &[f64], depth: usize) -> Tree {
        if depth >= self.cfg.max_depth || idx.len() < 2 * self.cfg.min_samples_leaf {
            return self.leaf(idx, residual);
        }
        let Some(split) = self.best_split(idx, residual) else {
            return self.leaf(idx, residual);
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x[i][split.feature] < split.threshold);
        Tree::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(self.grow(&left, residual, depth + 1)),
            right: Box::new(self.grow(&right, residual, depth + 1)),
        }
    }
}

fn mse(pred: impl Iterator<Item = f64>, labels: &[f64]) -> f64 {
    pred.zip(labels).map(|(p, y)| (y - p) * (y - p)).sum::<f64>() / labels.len() as f64
}

fn check_matrix(features: &[Vec<f64>], labels: &[f64]) -> Result<usize, ArgumentError> {
    if features.len() != labels.len() {
        return Err(ArgumentError(format!("{} feature rows but {} labels", features.len(), labels.len())));
    }
    let arity = features.first().map_or(0, Vec::len);
    if let Some(bad) = features.iter().position(|r| r.len() != arity) {
        return Err(ArgumentError(format!("row {bad} has {} features, expected {arity}", features[bad].len())));
    }
    if features.iter().flatten().chain(labels).any(|v| !v.is_finite()) {
        return Err(ArgumentError("non-finite value in training data".into()));
    }
    Ok(arity)
}

/// Fits a boosted ensemble. Stops early once a round cannot split the root.
pub fn train_gbt(
    features: &[Vec<f64>],
    labels: &[f64],
    feature_names: &[&str],
    cfg: &TrainConfig,
) -> Result<GbtModel, PredictError> {
    cfg.validate()?;
    let arity = check_matrix(features, labels)?;
    if labels.len() < 2 {
        return Err(ArgumentError(format!("need at least 2 rows, got {}", labels.len())).into());
    }
    if arity == 0 {
        return Err(ArgumentError("need at least one feature".into()).into());
    }
    if feature_names.len() != arity {
        return Err(ArgumentError(format!("{} feature names for {arity} features", feature_names.len())).into());
    }

    // Canonical row order makes the fit independent of input order.
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| {
        features[a]
            .iter()
            .zip(&features[b])
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(labels[a].total_cmp(&labels[b]))
    });
    let x: Vec<Vec<f64>> = order.iter().map(|&i| features[i].clone()).collect();
    let y: Vec<f64> = order.iter().map(|&i| labels[i]).collect();

    let n = y.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let eta = cfg.learning_rate;
    let mut sums = vec![0.0; n];
    let predictions = |sums: &[f64]| sums.iter().map(|s| base + eta * s).collect::<Vec<f64>>();
    let mut model = GbtModel {
        version: MODEL_VERSION,
        feature_names: feature_names.iter().map(|s| s.to_string()).collect(),
        base_score: base,
        learning_rate: eta,
        config: *cfg,
        trees: Vec::new(),
        training_history: vec![mse(predictions(&sums).into_iter(), &y)],
    };
    let grower = Grower { x: &x, arity, cfg };
    let all: Vec<usize> = (0..n).collect();
    for round in 0..cfg.rounds {
        let pred = predictions(&sums);
        let residual: Vec<f64> = y.iter().zip(&pred).map(|(y, p)| y - p).collect();
        let tree = grower.grow(&all, &residual, 0);
        if matches!(tree, Tree::Leaf { .. }) {
            debug!(round, "no split improves the fit, stopping");
            break;
        }
        for (s, row) in sums.iter_mut().zip(&x) {
            *s += tree.predict(row);
        }
        model.trees.push(tree);
        model.training_history.push(mse(predictions(&sums).into_iter(), &y));
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n: usize,
    pub mse: f64,
    pub mae: f64,
    /// Undefined when the labels are constant.
    pub r2: Option<f64>,
}

pub fn evaluate(model: &GbtModel, features: &[Vec<f64>], labels: &[f64]) -> Result<Evaluation, ArgumentError> {
    check_matrix(features, labels)?;
    if labels.is_empty() {
        return Err(ArgumentError("cannot evaluate on zero rows".into()));
    }
    let pred = features.iter().map(|x| predict(model, x)).collect::<Result<Vec<f64>, _>>()?;
    let n = labels.len() as f64;
    let sse: f64 = pred.iter().zip(labels).map(|(p, y)| (y - p) * (y - p)).sum();
    let sae: f64 = pred.iter().zip(labels).map(|(p, y)| (y - p).abs()).sum();
    let mean = labels.iter().sum::<f64>() / n;
    let sst: f64 = labels.iter().map(|y| (y - mean) * (y - mean)).sum();
    Ok(Evaluation { n: labels.len(), mse: sse / n, mae: sae / n, r2: (sst > 0.0).then(|| 1.0 - sse / sst) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreInfluence {
    pub genre: Genre,
    pub games: usize,
    pub predicted: f64,
}

/// Mean prediction per genre over the platform's games carrying that genre,
/// highest first.
pub fn genre_influence(model: &GbtModel, rows: &[MergedGameRow], platform: Platform) -> Result<Vec<GenreInfluence>, ArgumentError> {
    let mut acc = [(0.0, 0usize); Genre::COUNT];
    for r in rows.iter().filter(|r| Platform::of(&r.meta) == platform) {
        let p = predict(model, &encode_features(&r.meta))?;
        for g in r.meta.set_genres() {
            acc[g.index()].0 += p;
            acc[g.index()].1 += 1;
        }
    }
    let mut out: Vec<GenreInfluence> = Genre::ALL
        .into_iter()
        .zip(acc)
        .filter(|(_, (_, n))| *n > 0)
        .map(|(genre, (sum, games))| GenreInfluence { genre, games, predicted: sum / games as f64 })
        .collect();
    out.sort_by(|a, b| b.predicted.total_cmp(&a.predicted).then(a.genre.cmp(&b.genre)));
    Ok(out)
}

pub fn save_model(model: &GbtModel, path: &Path) -> Result<(), PredictError> {
    let mut json = serde_json::to_string_pretty(model).expect("model serializes");
    json.push('\n');
    write_atomic(path, json.as_bytes()).map_err(|source| PredictError::Io { path: path.to_path_buf(), source })
}

pub fn load_model(path: &Path) -> Result<GbtModel, PredictError> {
    let load = |message: String| PredictError::Load { path: path.to_path_buf(), message };
    let text = fs::read_to_string(path).map_err(|e| load(e.to_string()))?;
    let model: GbtModel = serde_json::from_str(&text).map_err(|e| load(e.to_string()))?;
    if model.version != MODEL_VERSION {
        return Err(load(format!("version {} is not supported (expected {MODEL_VERSION})", model.version)));
    }
    if !(model.base_score.is_finite() && model.learning_rate.is_finite()) {
        return Err(load("non-finite base score or learning rate".into()));
    }
    for (i, t) in model.trees.iter().enumerate() {
        if t.max_feature().is_some_and(|f| f >= model.arity()) || !t.all_finite() {
            return Err(load(format!("tree {i} does not fit {} features", model.arity())));
        }
    }
    Ok(model)
}
