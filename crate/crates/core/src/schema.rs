//! Canonical domain types shared by every pipeline stage.
//!
//! A quantified review is a fixed record of seven binary review attributes,
//! a language code, a recommendation flag and twelve design-element scores.
//! Element scores use `0` for "insufficient data" and `1..=5` otherwise.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemaError {
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("value {value} out of range for `{field}`")]
    RangeViolation { field: String, value: i64 },
    #[error("`{0}` must be an integer")]
    TypeViolation(String),
    #[error("conflicting values for `{0}`")]
    ConflictViolation(String),
    #[error("invalid price {0}")]
    InvalidPrice(f64),
    #[error("required age {0} outside 0..=21")]
    InvalidAge(i64),
    #[error("explicit rating {numerator}/{denominator} is not a valid fraction")]
    InvalidRating { numerator: f64, denominator: f64 },
    #[error("unknown {kind} `{value}`")]
    UnknownName { kind: &'static str, value: String },
}

/// Inputs whose shapes do not fit together.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("argument error: {0}")]
pub struct ArgumentError(pub String);

impl SchemaError {
    /// Field the error refers to, when there is one.
    pub fn field(&self) -> Option<&str> {
        match self {
            SchemaError::MissingField(f)
            | SchemaError::TypeViolation(f)
            | SchemaError::ConflictViolation(f)
            | SchemaError::RangeViolation { field: f, .. } => Some(f),
            _ => None,
        }
    }
}

/// The twelve rated design elements, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DesignElement {
    Gameplay,
    Graphics,
    Difficulty,
    Story,
    Audio,
    #[serde(rename = "Avatar_Customization")]
    AvatarCustomization,
    Controls,
    #[serde(rename = "Monetization_Model")]
    MonetizationModel,
    Replayability,
    Community,
    Multiplayer,
    #[serde(rename = "Spatial_Presence")]
    SpatialPresence,
}

impl DesignElement {
    pub const COUNT: usize = 12;

    pub const ALL: [DesignElement; 12] = [
        DesignElement::Gameplay,
        DesignElement::Graphics,
        DesignElement::Difficulty,
        DesignElement::Story,
        DesignElement::Audio,
        DesignElement::AvatarCustomization,
        DesignElement::Controls,
        DesignElement::MonetizationModel,
        DesignElement::Replayability,
        DesignElement::Community,
        DesignElement::Multiplayer,
        DesignElement::SpatialPresence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DesignElement::Gameplay => "Gameplay",
            DesignElement::Graphics => "Graphics",
            DesignElement::Difficulty => "Difficulty",
            DesignElement::Story => "Story",
            DesignElement::Audio => "Audio",
            DesignElement::AvatarCustomization => "Avatar_Customization",
            DesignElement::Controls => "Controls",
            DesignElement::MonetizationModel => "Monetization_Model",
            DesignElement::Replayability => "Replayability",
            DesignElement::Community => "Community",
            DesignElement::Multiplayer => "Multiplayer",
            DesignElement::SpatialPresence => "Spatial_Presence",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for DesignElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DesignElement {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DesignElement::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| SchemaError::UnknownName {
                kind: "design element",
                value: s.to_string(),
            })
    }
}

/// Review language code, `1..=11`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Language {
    Chinese = 1,
    English = 2,
    Russian = 3,
    Spanish = 4,
    Portuguese = 5,
    German = 6,
    Japanese = 7,
    French = 8,
    Polish = 9,
    Turkish = 10,
    Other = 11,
}

impl Language {
    pub const ALL: [Language; 11] = [
        Language::Chinese,
        Language::English,
        Language::Russian,
        Language::Spanish,
        Language::Portuguese,
        Language::German,
        Language::Japanese,
        Language::French,
        Language::Polish,
        Language::Turkish,
        Language::Other,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: i64) -> Option<Language> {
        if (1..=11).contains(&code) {
            Some(Language::ALL[(code - 1) as usize])
        } else {
            None
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Language::Chinese => "Chinese",
            Language::English => "English",
            Language::Russian => "Russian",
            Language::Spanish => "Spanish",
            Language::Portuguese => "Portuguese",
            Language::German => "German",
            Language::Japanese => "Japanese",
            Language::French => "French",
            Language::Polish => "Polish",
            Language::Turkish => "Turkish",
            Language::Other => "Others",
        }
    }
}

/// Every field of a quantified review, in the order the model emits them
/// and the quantified CSV stores them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReviewField {
    IsHelpful,
    IsPro,
    IsCon,
    IsVideo,
    IsSuggestion,
    IsBug,
    Language,
    Recommended,
    Element(DesignElement),
}

impl ReviewField {
    pub const COUNT: usize = 20;

    pub fn all() -> impl Iterator<Item = ReviewField> {
        [
            ReviewField::IsHelpful,
            ReviewField::IsPro,
            ReviewField::IsCon,
            ReviewField::IsVideo,
            ReviewField::IsSuggestion,
            ReviewField::IsBug,
            ReviewField::Language,
            ReviewField::Recommended,
        ]
        .into_iter()
        .chain(DesignElement::ALL.into_iter().map(ReviewField::Element))
    }

    pub fn name(self) -> &'static str {
        match self {
            ReviewField::IsHelpful => "Is_Helpful",
            ReviewField::IsPro => "Is_Pro",
            ReviewField::IsCon => "Is_Con",
            ReviewField::IsVideo => "Is_Video",
            ReviewField::IsSuggestion => "Is_Suggestion",
            ReviewField::IsBug => "Is_Bug",
            ReviewField::Language => "Language",
            ReviewField::Recommended => "Recommended",
            ReviewField::Element(e) => e.name(),
        }
    }

    /// Resolves a key, accepting `Review_Language` as an alias of `Language`.
    pub fn from_key(key: &str) -> Option<ReviewField> {
        if key == "Review_Language" {
            return Some(ReviewField::Language);
        }
        ReviewField::all().find(|f| f.name() == key)
    }

    pub fn range(self) -> std::ops::RangeInclusive<i64> {
        match self {
            ReviewField::Language => 1..=11,
            ReviewField::Element(_) => 0..=5,
            _ => 0..=1,
        }
    }

    fn position(self) -> usize {
        match self {
            ReviewField::IsHelpful => 0,
            ReviewField::IsPro => 1,
            ReviewField::IsCon => 2,
            ReviewField::IsVideo => 3,
            ReviewField::IsSuggestion => 4,
            ReviewField::IsBug => 5,
            ReviewField::Language => 6,
            ReviewField::Recommended => 7,
            ReviewField::Element(e) => 8 + e.index(),
        }
    }
}

/// One quantified review.
///
/// Values are stored in canonical field order; construction goes through
/// [`validate_review_scores`] or [`ReviewScores::from_values`], so every
/// instance satisfies the field ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReviewScores {
    values: [u8; ReviewField::COUNT],
}

impl ReviewScores {
    /// All attributes and elements zero, with the given language.
    pub fn empty(language: Language) -> Self {
        let mut values = [0u8; ReviewField::COUNT];
        values[ReviewField::Language.position()] = language.code();
        ReviewScores { values }
    }

    pub fn get(&self, field: ReviewField) -> u8 {
        self.values[field.position()]
    }

    /// Sets a field, rejecting out-of-range values.
    pub fn set(&mut self, field: ReviewField, value: u8) -> Result<(), SchemaError> {
        if !field.range().contains(&(value as i64)) {
            return Err(SchemaError::RangeViolation {
                field: field.name().to_string(),
                value: value as i64,
            });
        }
        self.values[field.position()] = value;
        Ok(())
    }

    pub fn flag(&self, field: ReviewField) -> bool {
        self.get(field) == 1
    }

    pub fn language(&self) -> Language {
        Language::from_code(self.get(ReviewField::Language) as i64).unwrap_or(Language::Other)
    }

    pub fn element(&self, element: DesignElement) -> u8 {
        self.get(ReviewField::Element(element))
    }

    /// Builds a record from values in canonical order.
    pub fn from_values(values: [i64; ReviewField::COUNT]) -> Result<Self, SchemaError> {
        let mut out = [0u8; ReviewField::COUNT];
        for (field, value) in ReviewField::all().zip(values) {
            if !field.range().contains(&value) {
                return Err(SchemaError::RangeViolation {
                    field: field.name().to_string(),
                    value,
                });
            }
            out[field.position()] = value as u8;
        }
        Ok(ReviewScores { values: out })
    }

    /// Values in canonical order.
    pub fn values(&self) -> [u8; ReviewField::COUNT] {
        self.values
    }

    /// Compact JSON object with keys in canonical order.
    pub fn to_json(&self) -> String {
        let body: Vec<String> = ReviewField::all()
            .map(|f| format!("\"{}\": {}", f.name(), self.get(f)))
            .collect();
        format!("{{{}}}", body.join(", "))
    }
}

/// Checks a raw key/value listing and builds a [`ReviewScores`].
///
/// Entries are taken as an ordered list so that repeated keys survive from
/// the parser. Unknown keys are ignored. A key that appears twice (directly
/// or through the `Review_Language` alias) must carry the same value.
pub fn validate_review_scores<'a, I>(raw: I) -> Result<ReviewScores, SchemaError>
where
    I: IntoIterator<Item = (&'a str, &'a Value)>,
{
    let mut seen: [Option<i64>; ReviewField::COUNT] = [None; ReviewField::COUNT];
    for (key, value) in raw {
        let Some(field) = ReviewField::from_key(key) else {
            continue;
        };
        let int = value
            .as_i64()
            .ok_or_else(|| SchemaError::TypeViolation(field.name().to_string()))?;
        let slot = &mut seen[field.position()];
        match *slot {
            Some(prev) if prev != int => {
                return Err(SchemaError::ConflictViolation(field.name().to_string()));
            }
            _ => *slot = Some(int),
        }
    }
    let mut values = [0i64; ReviewField::COUNT];
    for field in ReviewField::all() {
        values[field.position()] =
            seen[field.position()].ok_or_else(|| SchemaError::MissingField(field.name().to_string()))?;
    }
    ReviewScores::from_values(values)
}

/// Convenience wrapper over [`validate_review_scores`] for a JSON object.
pub fn validate_json_object(obj: &serde_json::Map<String, Value>) -> Result<ReviewScores, SchemaError> {
    validate_review_scores(obj.iter().map(|(k, v)| (k.as_str(), v)))
}

/// Six price tiers, ordered from free to premium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PriceCategory {
    Free,
    LowPricedIndie,
    MidPricedIndie,
    AAGames,
    AAAGames,
    PremiumAAAGames,
}

impl PriceCategory {
    pub const ALL: [PriceCategory; 6] = [
        PriceCategory::Free,
        PriceCategory::LowPricedIndie,
        PriceCategory::MidPricedIndie,
        PriceCategory::AAGames,
        PriceCategory::AAAGames,
        PriceCategory::PremiumAAAGames,
    ];

    /// Display label used in tokenized files.
    pub fn label(self) -> &'static str {
        match self {
            PriceCategory::Free => "Free",
            PriceCategory::LowPricedIndie => "Low-Priced Indie",
            PriceCategory::MidPricedIndie => "Mid-Priced Indie",
            PriceCategory::AAGames => "AA Games",
            PriceCategory::AAAGames => "AAA Games",
            PriceCategory::PremiumAAAGames => "Premium AAA Games",
        }
    }

    /// One-hot column name for the feature matrix.
    pub fn feature_name(self) -> &'static str {
        match self {
            PriceCategory::Free => "Price_Free",
            PriceCategory::LowPricedIndie => "Price_Low_Priced_Indie",
            PriceCategory::MidPricedIndie => "Price_Mid_Priced_Indie",
            PriceCategory::AAGames => "Price_AA_Games",
            PriceCategory::AAAGames => "Price_AAA_Games",
            PriceCategory::PremiumAAAGames => "Price_Premium_AAA_Games",
        }
    }

    pub fn from_ordinal(ordinal: u8) -> Option<PriceCategory> {
        PriceCategory::ALL.get(ordinal as usize).copied()
    }
}

impl FromStr for PriceCategory {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PriceCategory::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| SchemaError::UnknownName {
                kind: "price category",
                value: s.to_string(),
            })
    }
}

impl fmt::Display for PriceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Maps a USD price onto its tier. Tier bounds are half-open `[lo, hi)`.
pub fn price_category_from_price(price_usd: f64) -> Result<PriceCategory, SchemaError> {
    if !price_usd.is_finite() || price_usd < 0.0 {
        return Err(SchemaError::InvalidPrice(price_usd));
    }
    Ok(match price_usd {
        0.0 => PriceCategory::Free,
        p if p < 5.0 => PriceCategory::LowPricedIndie,
        p if p < 15.0 => PriceCategory::MidPricedIndie,
        p if p < 25.0 => PriceCategory::AAGames,
        p if p < 40.0 => PriceCategory::AAAGames,
        _ => PriceCategory::PremiumAAAGames,
    })
}

pub fn encode_price_ordinal(tier: PriceCategory) -> u8 {
    tier as u8
}

/// PEGI age label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pegi {
    Pegi3,
    Pegi7,
    Pegi12,
    Pegi16,
    Pegi18,
}

impl Pegi {
    pub const ALL: [Pegi; 5] = [Pegi::Pegi3, Pegi::Pegi7, Pegi::Pegi12, Pegi::Pegi16, Pegi::Pegi18];

    pub fn age(self) -> u8 {
        match self {
            Pegi::Pegi3 => 3,
            Pegi::Pegi7 => 7,
            Pegi::Pegi12 => 12,
            Pegi::Pegi16 => 16,
            Pegi::Pegi18 => 18,
        }
    }

    pub fn from_age_label(label: u8) -> Option<Pegi> {
        Pegi::ALL.into_iter().find(|p| p.age() == label)
    }
}

/// Smallest PEGI label not below `required_age`; ages above 18 clamp to 18.
pub fn pegi_bucket(required_age: i64) -> Result<Pegi, SchemaError> {
    if !(0..=21).contains(&required_age) {
        return Err(SchemaError::InvalidAge(required_age));
    }
    Ok(Pegi::ALL
        .into_iter()
        .find(|p| i64::from(p.age()) >= required_age)
        .unwrap_or(Pegi::Pegi18))
}

/// Rescales an in-text rating such as "7/10" to `1..=5`, rounding half up.
///
/// An explicit zero maps to 1: zero is reserved for "no data".
pub fn normalize_explicit_rating(numerator: f64, denominator: f64) -> Result<u8, SchemaError> {
    let invalid = || SchemaError::InvalidRating { numerator, denominator };
    if !numerator.is_finite() || !denominator.is_finite() || denominator <= 0.0 {
        return Err(invalid());
    }
    if numerator < 0.0 || numerator > denominator {
        return Err(invalid());
    }
    let scaled = numerator * 5.0 / denominator;
    let rounded = (scaled + 0.5).floor();
    Ok(rounded.clamp(1.0, 5.0) as u8)
}

/// Store a game was listed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Store {
    Steam,
    Meta,
}

impl Store {
    pub fn name(self) -> &'static str {
        match self {
            Store::Steam => "Steam",
            Store::Meta => "Meta",
        }
    }
}

impl FromStr for Store {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Steam" => Ok(Store::Steam),
            "Meta" => Ok(Store::Meta),
            other => Err(SchemaError::UnknownName {
                kind: "store",
                value: other.to_string(),
            }),
        }
    }
}

/// Binary platform and distribution flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlatformFlag {
    IsVr,
    Is3d,
    IsIndie,
    FreeToPlay,
    IsCoop,
    IsSingleplayer,
    IsMultiplayer,
    IsSteam,
    IsEarlyAccess,
}

impl PlatformFlag {
    pub const ALL: [PlatformFlag; 9] = [
        PlatformFlag::IsVr,
        PlatformFlag::Is3d,
        PlatformFlag::IsIndie,
        PlatformFlag::FreeToPlay,
        PlatformFlag::IsCoop,
        PlatformFlag::IsSingleplayer,
        PlatformFlag::IsMultiplayer,
        PlatformFlag::IsSteam,
        PlatformFlag::IsEarlyAccess,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlatformFlag::IsVr => "Is_VR",
            PlatformFlag::Is3d => "Is_3D",
            PlatformFlag::IsIndie => "Is_Indie",
            PlatformFlag::FreeToPlay => "Free_To_Play",
            PlatformFlag::IsCoop => "Is_Coop",
            PlatformFlag::IsSingleplayer => "Is_Singleplayer",
            PlatformFlag::IsMultiplayer => "Is_Multiplayer",
            PlatformFlag::IsSteam => "Is_Steam",
            PlatformFlag::IsEarlyAccess => "Is_Early_Access",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// The seventeen genre flags, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Genre {
    Action,
    Adventure,
    Casual,
    Puzzle,
    #[serde(rename = "Role_Playing_Game")]
    RolePlayingGame,
    Racing,
    Simulation,
    Sports,
    Strategy,
    Fighting,
    Horror,
    #[serde(rename = "Battle_Royale")]
    BattleRoyale,
    Shooter,
    Survival,
    Music,
    Education,
    Entertainment,
}

impl Genre {
    pub const COUNT: usize = 17;

    pub const ALL: [Genre; 17] = [
        Genre::Action,
        Genre::Adventure,
        Genre::Casual,
        Genre::Puzzle,
        Genre::RolePlayingGame,
        Genre::Racing,
        Genre::Simulation,
        Genre::Sports,
        Genre::Strategy,
        Genre::Fighting,
        Genre::Horror,
        Genre::BattleRoyale,
        Genre::Shooter,
        Genre::Survival,
        Genre::Music,
        Genre::Education,
        Genre::Entertainment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Genre::Action => "Action",
            Genre::Adventure => "Adventure",
            Genre::Casual => "Casual",
            Genre::Puzzle => "Puzzle",
            Genre::RolePlayingGame => "Role_Playing_Game",
            Genre::Racing => "Racing",
            Genre::Simulation => "Simulation",
            Genre::Sports => "Sports",
            Genre::Strategy => "Strategy",
            Genre::Fighting => "Fighting",
            Genre::Horror => "Horror",
            Genre::BattleRoyale => "Battle_Royale",
            Genre::Shooter => "Shooter",
            Genre::Survival => "Survival",
            Genre::Music => "Music",
            Genre::Education => "Education",
            Genre::Entertainment => "Entertainment",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Genre {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Genre::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| SchemaError::UnknownName {
                kind: "genre",
                value: s.to_string(),
            })
    }
}

/// One tokenized game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameMetadata {
    pub game_id: String,
    pub name: String,
    pub store: Store,
    /// `None` when the raw release date could not be parsed.
    pub release_year: Option<i32>,
    pub price_usd: f64,
    pub price_category: PriceCategory,
    pub required_age: u8,
    pub pegi: Pegi,
    pub platform: [bool; 9],
    pub genres: [bool; Genre::COUNT],
}

impl GameMetadata {
    pub fn flag(&self, flag: PlatformFlag) -> bool {
        self.platform[flag.index()]
    }

    pub fn set_flag(&mut self, flag: PlatformFlag, on: bool) {
        self.platform[flag.index()] = on;
    }

    pub fn has_genre(&self, genre: Genre) -> bool {
        self.genres[genre.index()]
    }

    pub fn is_vr(&self) -> bool {
        self.flag(PlatformFlag::IsVr)
    }

    pub fn set_genres(&self) -> impl Iterator<Item = Genre> + '_ {
        Genre::ALL.into_iter().filter(|g| self.has_genre(*g))
    }
}
