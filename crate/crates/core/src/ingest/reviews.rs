use std::fs;
use std::path::{Path, PathBuf};

use super::{IngestError, RawReview};

/// Contents of one `<gameid>_<count>.csv` review file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReviewFile {
    pub game_id: String,
    pub declared_count: u64,
    pub reviews: Vec<RawReview>,
    pub warnings: Vec<String>,
}

fn split_name(path: &Path) -> Option<(String, u64)> {
    if path.extension()?.to_str()? != "csv" {
        return None;
    }
    let stem = path.file_stem()?.to_str()?;
    let (id, count) = stem.rsplit_once('_')?;
    if id.is_empty() {
        return None;
    }
    Some((id.to_string(), count.parse().ok()?))
}

/// Loads a review file; rows are taken in file order, which is rating order.
pub fn load_review_file(path: &Path) -> Result<ReviewFile, IngestError> {
    let (game_id, declared_count) =
        split_name(path).ok_or_else(|| IngestError::BadFileName { path: path.to_path_buf() })?;
    let io = |source| IngestError::Io { path: path.to_path_buf(), source };
    let parse = |e: csv::Error| IngestError::Parse {
        path: path.to_path_buf(),
        offset: e.position().map(|p| p.byte() as usize).unwrap_or(0),
        message: e.to_string(),
    };
    let file = fs::File::open(path).map_err(io)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(file);
    let headers = reader.byte_headers().map_err(parse)?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| String::from_utf8_lossy(h).trim_start_matches('\u{feff}').trim() == name)
            .ok_or_else(|| IngestError::MissingColumn { path: path.to_path_buf(), column: name.to_string() })
    };
    if headers.is_empty() {
        return Err(IngestError::MissingColumn { path: path.to_path_buf(), column: "review_id".into() });
    }
    let id_col = column("review_id")?;
    let text_col = column("text")?;

    let mut reviews = Vec::new();
    let mut warnings = Vec::new();
    for (i, row) in reader.byte_records().enumerate() {
        let row = row.map_err(parse)?;
        let text_bytes = row.get(text_col).unwrap_or_default();
        let text = match std::str::from_utf8(text_bytes) {
            Ok(t) => t.to_string(),
            Err(_) => {
                warnings.push(format!("row {}: text is not valid UTF-8", i + 1));
                String::from_utf8_lossy(text_bytes).into_owned()
            }
        };
        reviews.push(RawReview {
            review_id: String::from_utf8_lossy(row.get(id_col).unwrap_or_default()).into_owned(),
            game_id: game_id.clone(),
            text,
            rating_rank: (i + 1) as u32,
        });
    }
    if reviews.len() as u64 != declared_count {
        warnings.push(format!(
            "file name declares {declared_count} reviews but {} rows were read",
            reviews.len()
        ));
    }
    Ok(ReviewFile { game_id, declared_count, reviews, warnings })
}

/// Finds the review file for `game_id` in `dir`, if any.
pub fn find_review_file(dir: &Path, game_id: &str) -> Result<Option<PathBuf>, IngestError> {
    let entries = fs::read_dir(dir).map_err(|source| IngestError::Io { path: dir.to_path_buf(), source })?;
    let mut hits: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| split_name(p).is_some_and(|(id, _)| id == game_id))
        .collect();
    hits.sort();
    Ok(hits.into_iter().next())
}

/// Writes `reviews` to `<dir>/<gameid>_<count>.csv` in the order given and
/// returns the path.
pub fn write_review_file(dir: &Path, game_id: &str, reviews: &[RawReview]) -> Result<PathBuf, IngestError> {
    let path = dir.join(format!("{game_id}_{}.csv", reviews.len()));
    let io = |source| IngestError::Io { path: path.clone(), source };
    fs::create_dir_all(dir).map_err(|source| IngestError::Io { path: dir.to_path_buf(), source })?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["review_id", "text"]).expect("in-memory write");
    for r in reviews {
        w.write_record([r.review_id.as_str(), r.text.as_str()]).expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory flush");
    crate::quantify::write_atomic(&path, &bytes).map_err(io)?;
    Ok(path)
}
