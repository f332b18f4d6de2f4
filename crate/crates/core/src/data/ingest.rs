use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub label: u8,
    pub hour_stamp: String,
    pub fields: Vec<String>,
}

/// Records plus the names of the categorical columns they carry.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawLog {
    pub field_names: Vec<String>,
    pub records: Vec<RawRecord>,
}

impl RawLog {
    pub fn num_fields(&self) -> usize {
        self.field_names.len()
    }
}

/// Column mapping for a headered delimited log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormatDescriptor {
    pub label: String,
    pub hour: String,
    #[serde(default)]
    pub ignore: Vec<String>,
    /// Feature columns in order; empty selects every remaining column.
    #[serde(default)]
    pub features: Vec<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

impl FormatDescriptor {
    /// `id, click, hour, <categorical columns...>`
    pub fn avazu() -> Self {
        FormatDescriptor {
            label: "click".into(),
            hour: "hour".into(),
            ignore: vec!["id".into()],
            features: Vec::new(),
            delimiter: ',',
        }
    }
}

impl Default for FormatDescriptor {
    fn default() -> Self {
        Self::avazu()
    }
}

/// Reads a headered log. Rows come back in file order.
pub fn ingest<R: Read>(source: R, desc: &FormatDescriptor) -> Result<RawLog> {
    if !desc.delimiter.is_ascii() {
        return Err(Error::config("delimiter must be a single ASCII character"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .delimiter(desc.delimiter as u8)
        .from_reader(source);

    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let position = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let label_col = position(&desc.label)?;
    let hour_col = position(&desc.hour)?;
    let feature_cols: Vec<usize> = if desc.features.is_empty() {
        for name in &desc.ignore {
            position(name)?;
        }
        (0..header.len())
            .filter(|&i| {
                i != label_col && i != hour_col && !desc.ignore.contains(&header[i])
            })
            .collect()
    } else {
        desc.features
            .iter()
            .map(|f| position(f))
            .collect::<Result<_>>()?
    };
    if feature_cols.is_empty() {
        return Err(Error::config("layout selects no feature columns"));
    }

    let mut records = Vec::new();
    let mut row = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut row).map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != header.len() {
            return Err(Error::FieldCount {
                line,
                expected: header.len(),
                found: row.len(),
            });
        }
        let label = match row[label_col].trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::LabelDomain {
                    line,
                    value: other.to_string(),
                })
            }
        };
        records.push(RawRecord {
            label,
            hour_stamp: row[hour_col].trim().to_string(),
            fields: feature_cols.iter().map(|&i| row[i].to_string()).collect(),
        });
    }
    Ok(RawLog {
        field_names: feature_cols.iter().map(|&i| header[i].clone()).collect(),
        records,
    })
}
