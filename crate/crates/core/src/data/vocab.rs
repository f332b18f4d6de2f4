use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::hour::parse_hour_stamp;
use super::ingest::RawRecord;
use crate::error::{Error, Result};

/// Index reserved in every field for tokens below the frequency threshold.
pub const OOV_INDEX: u32 = 0;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodedSample {
    pub field_indices: Vec<u32>,
    pub label: u8,
    pub hour_index: u32,
}

/// Per-field token tables. Index 0 is OOV; kept tokens get 1.. in order of
/// first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabFile", into = "VocabFile")]
pub struct VocabMap {
    min_count: u32,
    fields: Vec<IndexMap<String, u32>>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    min_count: u32,
    /// Tokens of each field in index order, starting at index 1.
    fields: Vec<Vec<String>>,
}

impl From<VocabFile> for VocabMap {
    fn from(f: VocabFile) -> Self {
        let fields = f
            .fields
            .into_iter()
            .map(|toks| {
                toks.into_iter()
                    .enumerate()
                    .map(|(i, t)| (t, i as u32 + 1))
                    .collect()
            })
            .collect();
        VocabMap {
            min_count: f.min_count,
            fields,
        }
    }
}

impl From<VocabMap> for VocabFile {
    fn from(v: VocabMap) -> Self {
        VocabFile {
            min_count: v.min_count,
            fields: v
                .fields
                .into_iter()
                .map(|m| m.into_keys().collect())
                .collect(),
        }
    }
}

impl VocabMap {
    pub fn min_count(&self) -> u32 {
        self.min_count
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    /// Cardinality of each field including the OOV slot.
    pub fn sizes(&self) -> Vec<usize> {
        self.fields.iter().map(|m| m.len() + 1).collect()
    }

    pub fn index(&self, field: usize, token: &str) -> u32 {
        self.fields[field].get(token).copied().unwrap_or(OOV_INDEX)
    }

    /// Token stored at `index`, `None` for OOV or out of range.
    pub fn token(&self, field: usize, index: u32) -> Option<&str> {
        if index == OOV_INDEX {
            return None;
        }
        self.fields[field]
            .get_index(index as usize - 1)
            .map(|(k, _)| k.as_str())
    }
}

pub fn build_vocab(records: &[RawRecord], num_fields: usize, min_count: u32) -> Result<VocabMap> {
    if min_count == 0 {
        return Err(Error::config("min_count must be at least 1"));
    }
    let mut counts: Vec<IndexMap<&str, u32>> = vec![IndexMap::new(); num_fields];
    for (i, rec) in records.iter().enumerate() {
        if rec.fields.len() != num_fields {
            return Err(Error::FieldCount {
                line: i as u64 + 2,
                expected: num_fields,
                found: rec.fields.len(),
            });
        }
        for (f, tok) in rec.fields.iter().enumerate() {
            *counts[f].entry(tok.as_str()).or_insert(0) += 1;
        }
    }
    let fields = counts
        .into_iter()
        .map(|c| {
            let mut map = IndexMap::new();
            for (tok, n) in c {
                if n >= min_count {
                    let next = map.len() as u32 + 1;
                    map.insert(tok.to_string(), next);
                }
            }
            map
        })
        .collect();
    Ok(VocabMap { min_count, fields })
}

/// Maps tokens through `vocab` and re-indexes hours relative to `hour_origin`.
pub fn encode(records: &[RawRecord], vocab: &VocabMap, hour_origin: &str) -> Result<Vec<EncodedSample>> {
    let origin = parse_hour_stamp(hour_origin)?;
    records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            if rec.fields.len() != vocab.num_fields() {
                return Err(Error::FieldCount {
                    line: i as u64 + 2,
                    expected: vocab.num_fields(),
                    found: rec.fields.len(),
                });
            }
            let hour = parse_hour_stamp(&rec.hour_stamp)?;
            if hour < origin {
                return Err(Error::HourBeforeOrigin {
                    stamp: rec.hour_stamp.clone(),
                    origin: hour_origin.to_string(),
                });
            }
            Ok(EncodedSample {
                field_indices: rec
                    .fields
                    .iter()
                    .enumerate()
                    .map(|(f, t)| vocab.index(f, t))
                    .collect(),
                label: rec.label,
                hour_index: (hour - origin) as u32,
            })
        })
        .collect()
}
