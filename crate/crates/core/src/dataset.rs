//! CSV ingestion of observation columns.

use serde::{Deserialize, Serialize};

use crate::empirical::Sample;
use crate::error::{invalid, Result, TailError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl Default for Column {
    fn default() -> Self {
        Column::Index(0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    #[serde(default)]
    pub column: Column,
    /// `None` detects a header from a non-numeric first row.
    #[serde(default)]
    pub header: Option<bool>,
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub id: String,
    pub name: String,
    pub sample: Sample,
    /// FNV-1a 64 of the raw bytes, hex.
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub dataset: Dataset,
    pub rows: usize,
    /// 1-based line numbers of blank or non-finite cells that were skipped.
    pub rejected: Vec<usize>,
}

pub fn checksum(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Parses one numeric column. Non-numeric cells are errors carrying their
/// 1-based line number; blank and non-finite cells are skipped and listed.
pub fn ingest_csv(bytes: &[u8], opts: &IngestOptions) -> Result<IngestReport> {
    let text = std::str::from_utf8(bytes).map_err(|e| TailError::Parse { row: 0, message: format!("not UTF-8: {e}") })?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| TailError::Parse { row: i + 1, message: e.to_string() })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 1);
        records.push((line, rec));
    }
    if records.is_empty() {
        return Err(TailError::Parse { row: 0, message: "empty file".into() });
    }
    let header = match opts.header {
        Some(h) => h,
        None => {
            let first = &records[0].1;
            let idx = match &opts.column {
                Column::Index(i) => *i,
                Column::Name(_) => 0,
            };
            matches!(opts.column, Column::Name(_)) || first.get(idx).is_some_and(|c| !c.is_empty() && c.parse::<f64>().is_err())
        }
    };
    let idx = match &opts.column {
        Column::Index(i) => *i,
        Column::Name(name) => {
            if !header {
                return Err(invalid("selecting a column by name needs a header row"));
            }
            records[0].1.iter().position(|c| c == name).ok_or_else(|| invalid(format!("no column named '{name}'")))?
        }
    };
    let body = if header { &records[1..] } else { &records[..] };
    let mut values = Vec::with_capacity(body.len());
    let mut rejected = Vec::new();
    for (line, rec) in body {
        let cell = rec.get(idx).unwrap_or("");
        if cell.is_empty() {
            rejected.push(*line);
            continue;
        }
        let v: f64 = cell
            .parse()
            .map_err(|_| TailError::Parse { row: *line, message: format!("non-numeric cell '{cell}'") })?;
        if v.is_finite() {
            values.push(v);
        } else {
            rejected.push(*line);
        }
    }
    if values.is_empty() {
        return Err(TailError::Parse { row: 0, message: "no numeric observations".into() });
    }
    let sum = checksum(bytes);
    let id = opts.id.clone().unwrap_or_else(|| format!("ds-{}", &sum[..12]));
    let name = opts.name.clone().unwrap_or_else(|| id.clone());
    Ok(IngestReport {
        rows: body.len(),
        rejected,
        dataset: Dataset { id, name, sample: Sample::new(values)?, checksum: sum },
    })
}
