//! Parsers for the raw store metadata dumps.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use chrono::{DateTime, Datelike, NaiveDate};
use serde_json::{Map, Value};

use super::{EntryError, IngestError, KeywordSource, RawGameRecord, ReleaseDate};
use crate::schema::Store;

/// Parsed records plus the entries that could not be converted.
#[derive(Debug, Clone, Default)]
pub struct ParsedMetadata {
    pub records: Vec<RawGameRecord>,
    pub errors: Vec<EntryError>,
}

/// Reads a Steam dump: a JSON object keyed by AppID.
pub fn parse_raw_steam_metadata(path: &Path) -> Result<ParsedMetadata, IngestError> {
    let text = read(path)?;
    let top: Map<String, Value> = from_str_located(path, &text)?;
    let mut out = ParsedMetadata::default();
    for (app_id, entry) in top {
        match steam_entry(&app_id, &entry) {
            Ok(rec) => out.records.push(rec),
            Err(message) => out.errors.push(EntryError { key: app_id, message }),
        }
    }
    Ok(out)
}

/// Reads a Meta dump: a JSON array of game objects.
pub fn parse_raw_meta_metadata(path: &Path) -> Result<ParsedMetadata, IngestError> {
    let text = read(path)?;
    let top: Vec<Value> = from_str_located(path, &text)?;
    let mut out = ParsedMetadata::default();
    let mut ids = HashSet::new();
    for (i, entry) in top.iter().enumerate() {
        let id = entry.get("id").and_then(id_string);
        if let Some(id) = &id {
            if !ids.insert(id.clone()) {
                return Err(IngestError::ConflictingIds {
                    path: path.to_path_buf(),
                    id: id.clone(),
                });
            }
        }
        match meta_entry(entry) {
            Ok(rec) => out.records.push(rec),
            Err(message) => out.errors.push(EntryError {
                key: id.unwrap_or_else(|| format!("#{i}")),
                message,
            }),
        }
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn from_str_located<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, IngestError> {
    serde_json::from_str(text).map_err(|e| IngestError::Parse {
        path: path.to_path_buf(),
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn steam_entry(app_id: &str, entry: &Value) -> Result<RawGameRecord, String> {
    let obj = entry.as_object().ok_or("entry is not an object")?;
    if app_id.trim().is_empty() {
        return Err("empty AppID".into());
    }
    let mut bags = BTreeMap::new();
    bags.insert(KeywordSource::Genre, string_list(obj.get("genres"), "genres")?);
    bags.insert(KeywordSource::TagMapping, tag_keys(obj.get("tags"))?);
    bags.insert(KeywordSource::CategoryFlag, string_list(obj.get("categories"), "categories")?);
    let review_count = match obj.get("review_count") {
        Some(v) => count(v, "review_count")?,
        None => {
            let pos = obj.get("positive").map(|v| count(v, "positive")).transpose()?;
            let neg = obj.get("negative").map(|v| count(v, "negative")).transpose()?;
            match (pos, neg) {
                (None, None) => obj
                    .get("recommendations")
                    .map(|v| count(v, "recommendations"))
                    .transpose()?
                    .unwrap_or(0),
                (p, n) => p.unwrap_or(0) + n.unwrap_or(0),
            }
        }
    };
    Ok(RawGameRecord {
        game_id: app_id.to_string(),
        name: opt_string(obj.get("name"), "name")?.unwrap_or_default(),
        store: Store::Steam,
        release_date: release_date(obj.get("release_date")),
        price_usd: price(obj.get("price"))?,
        required_age: required_age(obj.get("required_age"))?,
        keyword_bags: bags,
        review_count,
    })
}

fn meta_entry(entry: &Value) -> Result<RawGameRecord, String> {
    let obj = entry.as_object().ok_or("entry is not an object")?;
    let game_id = obj.get("id").and_then(id_string).ok_or("missing or invalid `id`")?;
    if game_id.trim().is_empty() {
        return Err("empty `id`".into());
    }
    let mut bags = BTreeMap::new();
    bags.insert(KeywordSource::Genre, string_list(obj.get("genres"), "genres")?);
    bags.insert(KeywordSource::GameMode, string_list(obj.get("game_modes"), "game_modes")?);
    let review_count = match obj.get("review_count") {
        Some(v) => count(v, "review_count")?,
        None => obj.get("ratings").and_then(Value::as_u64).unwrap_or(0),
    };
    Ok(RawGameRecord {
        game_id,
        name: opt_string(obj.get("name"), "name")?.unwrap_or_default(),
        store: Store::Meta,
        release_date: release_date(obj.get("release_date")),
        price_usd: price(obj.get("price"))?,
        required_age: required_age(obj.get("required_age"))?,
        keyword_bags: bags,
        review_count,
    })
}

fn id_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) if n.is_u64() => Some(n.to_string()),
        _ => None,
    }
}

fn opt_string(v: Option<&Value>, field: &str) -> Result<Option<String>, String> {
    match v {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(format!("`{field}` is not a string")),
    }
}

fn string_list(v: Option<&Value>, field: &str) -> Result<Vec<String>, String> {
    match v {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|i| {
                i.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| format!("`{field}` contains a non-string item"))
            })
            .collect(),
        Some(_) => Err(format!("`{field}` is not a list")),
    }
}

/// Steam tags come as `{tag: votes}`; a plain list is accepted too.
fn tag_keys(v: Option<&Value>) -> Result<Vec<String>, String> {
    match v {
        Some(Value::Object(map)) => Ok(map.keys().cloned().collect()),
        other => string_list(other, "tags"),
    }
}

fn count(v: &Value, field: &str) -> Result<u64, String> {
    v.as_u64().ok_or_else(|| format!("`{field}` is not a non-negative integer"))
}

fn price(v: Option<&Value>) -> Result<Option<f64>, String> {
    let p = match v {
        None | Some(Value::Null) => return Ok(None),
        Some(Value::Number(n)) => n.as_f64().ok_or("`price` is not finite")?,
        Some(Value::String(s)) => {
            let s = s.trim();
            if s.is_empty() {
                return Ok(None);
            }
            if s.to_ascii_lowercase().starts_with("free") {
                0.0
            } else {
                s.trim_start_matches(['$', 'U', 'S', 'D', ' '])
                    .replace(',', "")
                    .parse::<f64>()
                    .map_err(|_| format!("unparseable price `{s}`"))?
            }
        }
        Some(_) => return Err("`price` has an unsupported type".into()),
    };
    if !p.is_finite() || p < 0.0 {
        return Err(format!("invalid price {p}"));
    }
    Ok(Some(p))
}

fn required_age(v: Option<&Value>) -> Result<Option<u32>, String> {
    match v {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(n)) => n
            .as_u64()
            .map(|a| Some(a.min(u32::MAX as u64) as u32))
            .ok_or_else(|| "`required_age` is not a non-negative integer".into()),
        Some(Value::String(s)) => s
            .trim()
            .trim_end_matches('+')
            .parse::<u32>()
            .map(Some)
            .map_err(|_| format!("unparseable required_age `{s}`")),
        Some(_) => Err("`required_age` has an unsupported type".into()),
    }
}

fn release_date(v: Option<&Value>) -> ReleaseDate {
    match v {
        Some(Value::String(s)) => parse_release_date(s),
        Some(Value::Number(n)) => n
            .as_i64()
            .and_then(|ts| DateTime::from_timestamp(ts, 0))
            .map(|dt| ReleaseDate::Parsed(dt.date_naive()))
            .unwrap_or_else(|| ReleaseDate::Unparsed(n.to_string())),
        Some(Value::Null) | None => ReleaseDate::Unparsed(String::new()),
        Some(other) => ReleaseDate::Unparsed(other.to_string()),
    }
}

/// Accepts the date spellings seen in store dumps; anything else stays unparsed.
pub fn parse_release_date(raw: &str) -> ReleaseDate {
    let s = raw.trim();
    const FORMATS: [&str; 7] = ["%b %d, %Y", "%B %d, %Y", "%d %b, %Y", "%d %B, %Y", "%d %b %Y", "%d %B %Y", "%Y-%m-%d"];
    for fmt in FORMATS {
        if let Ok(d) = NaiveDate::parse_from_str(s, fmt) {
            return ReleaseDate::Parsed(d);
        }
    }
    if s.len() > 10 && s.is_char_boundary(10) {
        if let Ok(d) = NaiveDate::parse_from_str(&s[..10], "%Y-%m-%d") {
            return ReleaseDate::Parsed(d);
        }
    }
    for fmt in ["%b %Y", "%B %Y"] {
        if let Ok(d) = NaiveDate::parse_from_str(&format!("1 {s}"), &format!("%d {fmt}")) {
            return ReleaseDate::Parsed(d);
        }
    }
    if s.len() == 4 {
        if let Ok(year) = s.parse::<i32>() {
            if let Some(d) = NaiveDate::from_ymd_opt(year, 1, 1) {
                return ReleaseDate::Parsed(d);
            }
        }
    }
    ReleaseDate::Unparsed(s.to_string())
}

impl ReleaseDate {
    pub fn year(&self) -> Option<i32> {
        match self {
            ReleaseDate::Parsed(d) => Some(d.year()),
            ReleaseDate::Unparsed(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn date_formats() {
        let d = |y, m, day| ReleaseDate::Parsed(NaiveDate::from_ymd_opt(y, m, day).unwrap());
        assert_eq!(parse_release_date("Oct 21, 2008"), d(2008, 10, 21));
        assert_eq!(parse_release_date("21 Oct, 2020"), d(2020, 10, 21));
        assert_eq!(parse_release_date("2021-03-04"), d(2021, 3, 4));
        assert_eq!(parse_release_date("2021-03-04T00:00:00Z"), d(2021, 3, 4));
        assert_eq!(parse_release_date("Mar 2022"), d(2022, 3, 1));
        assert_eq!(parse_release_date("2023"), d(2023, 1, 1));
        assert_eq!(parse_release_date("Coming soon"), ReleaseDate::Unparsed("Coming soon".into()));
    }

    #[test]
    fn prices() {
        assert_eq!(price(Some(&Value::from("Free"))).unwrap(), Some(0.0));
        assert_eq!(price(Some(&Value::from("Free to Play"))).unwrap(), Some(0.0));
        assert_eq!(price(Some(&Value::from("$19.99"))).unwrap(), Some(19.99));
        assert_eq!(price(Some(&Value::from(4.99))).unwrap(), Some(4.99));
        assert_eq!(price(Some(&Value::Null)).unwrap(), None);
        assert!(price(Some(&Value::from(-1.0))).is_err());
        assert!(price(Some(&Value::from("cheap"))).is_err());
    }

    #[test]
    fn offsets() {
        let text = "{\n  \"a\": ,\n}";
        let err = serde_json::from_str::<Value>(text).unwrap_err();
        let off = byte_offset(text, err.line(), err.column());
        assert_eq!(&text[off..off + 1], ",");
    }
}
