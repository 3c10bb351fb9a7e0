//! CSV encodings of the tokenized metadata, the per-game averages and the
//! merged analytics table.

use std::path::{Path, PathBuf};

use csv::StringRecord;
use thiserror::Error;

use crate::aggregate::{ElementStats, GameElementAverages, MergedGameRow};
use crate::quantify::write_atomic;
use crate::schema::{
    price_category_from_price, DesignElement, GameMetadata, Genre, Pegi, PlatformFlag, PriceCategory, Store,
};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, row {row}: {message}")]
    Format { path: PathBuf, row: usize, message: String },
}

const METADATA_LEAD: [&str; 8] = [
    "game_id",
    "name",
    "store",
    "release_year",
    "price_usd",
    "price_category",
    "required_age",
    "pegi",
];

pub fn metadata_header() -> Vec<String> {
    METADATA_LEAD
        .iter()
        .map(|s| s.to_string())
        .chain(PlatformFlag::ALL.iter().map(|f| f.name().to_string()))
        .chain(Genre::ALL.iter().map(|g| g.name().to_string()))
        .collect()
}

pub fn averages_header() -> Vec<String> {
    let mut h = vec!["game_id".to_string(), "review_count".to_string()];
    for e in DesignElement::ALL {
        h.push(format!("{e}_avg"));
        h.push(format!("{e}_rated_count"));
        h.push(format!("{e}_high_pct"));
    }
    h.push("overall_rating".into());
    h.push("total_high_pct".into());
    h
}

pub fn merged_header() -> Vec<String> {
    let mut h = metadata_header();
    h.extend(averages_header().into_iter().skip(1));
    h
}

fn bit(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn metadata_fields(m: &GameMetadata) -> Vec<String> {
    let mut row = vec![
        m.game_id.clone(),
        m.name.clone(),
        m.store.name().to_string(),
        m.release_year.map(|y| y.to_string()).unwrap_or_default(),
        m.price_usd.to_string(),
        m.price_category.label().to_string(),
        m.required_age.to_string(),
        m.pegi.age().to_string(),
    ];
    row.extend(m.platform.iter().map(|b| bit(*b)));
    row.extend(m.genres.iter().map(|b| bit(*b)));
    row
}

fn averages_fields(a: &GameElementAverages) -> Vec<String> {
    let mut row = vec![a.review_count.to_string()];
    for s in &a.elements {
        row.push(opt(s.avg));
        row.push(s.rated_count.to_string());
        row.push(opt(s.high_pct));
    }
    row.push(opt(a.overall_rating));
    row.push(opt(a.total_high_pct));
    row
}

/// Cursor over a record's cells that reports which column failed.
struct Cells<'a> {
    rec: &'a StringRecord,
    header: &'a [String],
    pos: usize,
}

impl<'a> Cells<'a> {
    fn next(&mut self) -> Result<&'a str, String> {
        let cell = self.rec.get(self.pos).ok_or_else(|| format!("missing column {}", self.header[self.pos]))?;
        self.pos += 1;
        Ok(cell)
    }

    fn column(&self) -> &str {
        &self.header[self.pos - 1]
    }

    fn parse<T: std::str::FromStr>(&mut self) -> Result<T, String> {
        let cell = self.next()?;
        cell.trim().parse().map_err(|_| format!("{}: cannot parse {cell:?}", self.column()))
    }

    fn opt_f64(&mut self) -> Result<Option<f64>, String> {
        let cell = self.next()?;
        if cell.trim().is_empty() {
            return Ok(None);
        }
        match cell.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ => Err(format!("{}: cannot parse {cell:?}", self.column())),
        }
    }

    fn bit(&mut self) -> Result<bool, String> {
        match self.next()?.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(format!("{}: expected 0 or 1, got {other:?}", self.column())),
        }
    }
}

fn parse_metadata(c: &mut Cells) -> Result<GameMetadata, String> {
    let game_id = c.next()?.to_string();
    let name = c.next()?.to_string();
    let store: Store = c.next()?.parse().map_err(|e: crate::schema::SchemaError| e.to_string())?;
    let year = c.next()?.trim();
    let release_year = if year.is_empty() {
        None
    } else {
        Some(year.parse().map_err(|_| format!("release_year: cannot parse {year:?}"))?)
    };
    let price_usd: f64 = c.parse()?;
    let price_category: PriceCategory = c.next()?.parse().map_err(|e: crate::schema::SchemaError| e.to_string())?;
    let derived = price_category_from_price(price_usd).map_err(|e| e.to_string())?;
    if derived != price_category {
        return Err(format!("price_category {price_category} does not match price {price_usd}"));
    }
    let required_age: u8 = c.parse()?;
    let pegi_label: u8 = c.parse()?;
    let pegi = Pegi::from_age_label(pegi_label).ok_or_else(|| format!("pegi: unknown label {pegi_label}"))?;
    let mut platform = [false; 9];
    for slot in &mut platform {
        *slot = c.bit()?;
    }
    let mut genres = [false; Genre::COUNT];
    for slot in &mut genres {
        *slot = c.bit()?;
    }
    Ok(GameMetadata {
        game_id,
        name,
        store,
        release_year,
        price_usd,
        price_category,
        required_age,
        pegi,
        platform,
        genres,
    })
}

fn parse_averages(game_id: String, c: &mut Cells) -> Result<GameElementAverages, String> {
    let review_count: u32 = c.parse()?;
    let mut elements = [ElementStats::default(); DesignElement::COUNT];
    for s in &mut elements {
        s.avg = c.opt_f64()?;
        s.rated_count = c.parse()?;
        s.high_pct = c.opt_f64()?;
        if s.avg.is_none() != (s.rated_count == 0) {
            return Err(format!("{}: average present iff rated_count > 0", c.column()));
        }
    }
    Ok(GameElementAverages {
        game_id,
        review_count,
        elements,
        overall_rating: c.opt_f64()?,
        total_high_pct: c.opt_f64()?,
    })
}

fn write_table(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<(), TableError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory flush");
    write_atomic(path, &bytes).map_err(|source| TableError::Io { path: path.to_path_buf(), source })
}

fn read_table<T>(
    path: &Path,
    header: &[String],
    mut parse: impl FnMut(&mut Cells) -> Result<T, String>,
) -> Result<Vec<T>, TableError> {
    let format = |row: usize, message: String| TableError::Format { path: path.to_path_buf(), row, message };
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => TableError::Io { path: path.to_path_buf(), source },
        other => format(0, format!("{other:?}")),
    })?;
    let found = reader.headers().map_err(|e| format(0, e.to_string()))?;
    if found.iter().ne(header.iter().map(String::as_str)) {
        return Err(format(0, "unexpected header".into()));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| format(i + 1, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(format(i + 1, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let mut cells = Cells { rec: &rec, header, pos: 0 };
        out.push(parse(&mut cells).map_err(|m| format(i + 1, m))?);
    }
    Ok(out)
}

pub fn write_metadata_csv(path: &Path, games: &[GameMetadata]) -> Result<(), TableError> {
    write_table(path, &metadata_header(), games.iter().map(metadata_fields))
}

pub fn read_metadata_csv(path: &Path) -> Result<Vec<GameMetadata>, TableError> {
    read_table(path, &metadata_header(), parse_metadata)
}

/// Writes the averages table. Rows are sorted by game id.
pub fn write_averages_csv(path: &Path, averages: &[GameElementAverages]) -> Result<(), TableError> {
    let mut sorted: Vec<&GameElementAverages> = averages.iter().collect();
    sorted.sort_by(|a, b| a.game_id.cmp(&b.game_id));
    write_table(
        path,
        &averages_header(),
        sorted.into_iter().map(|a| {
            let mut row = vec![a.game_id.clone()];
            row.extend(averages_fields(a));
            row
        }),
    )
}

pub fn read_averages_csv(path: &Path) -> Result<Vec<GameElementAverages>, TableError> {
    read_table(path, &averages_header(), |c| {
        let id = c.next()?.to_string();
        parse_averages(id, c)
    })
}

pub fn write_merged_csv(path: &Path, rows: &[MergedGameRow]) -> Result<(), TableError> {
    write_table(
        path,
        &merged_header(),
        rows.iter().map(|r| {
            let mut row = metadata_fields(&r.meta);
            row.extend(averages_fields(&r.averages));
            row
        }),
    )
}

pub fn read_merged_csv(path: &Path) -> Result<Vec<MergedGameRow>, TableError> {
    read_table(path, &merged_header(), |c| {
        let meta = parse_metadata(c)?;
        let averages = parse_averages(meta.game_id.clone(), c)?;
        Ok(MergedGameRow { meta, averages })
    })
}
