//! Scan datasets and their CSV form.
//!
//! ```text
//! # metadata: {"kind":"hwp","seed":7,...}
//! x,y,sigma_y
//! 0,0.0,12.5
//! ...
//! ```
//!
//! The first line is optional when ingesting external data.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ConfigDocument;

const METADATA_PREFIX: &str = "# metadata: ";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed metadata line: {0}")]
    Metadata(#[from] serde_json::Error),
    #[error("dataset kind is {found}, expected {expected}")]
    KindMismatch { expected: ScanKind, found: ScanKind },
    #[error("dataset kind unknown: no metadata line and no kind given")]
    UnknownKind,
    #[error("expected header x,y,sigma_y, found {0}")]
    Header(String),
    #[error("non-finite value in row {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanKind {
    /// x: delay (s), y: probability of |↑⟩.
    Ramsey,
    /// x: beam power (mW), y: shift (Hz).
    Power,
    /// x: HWP angle (deg), y: shift (Hz).
    Hwp,
    /// x: ion position (μm), y: shift (Hz).
    Position,
    /// x: ion position (μm), y: two-beam Rabi frequency (Hz).
    Rabi,
}

impl ScanKind {
    pub const ALL: [ScanKind; 5] = [
        ScanKind::Ramsey,
        ScanKind::Power,
        ScanKind::Hwp,
        ScanKind::Position,
        ScanKind::Rabi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScanKind::Ramsey => "ramsey",
            ScanKind::Power => "power",
            ScanKind::Hwp => "hwp",
            ScanKind::Position => "position",
            ScanKind::Rabi => "rabi",
        }
    }
}

impl fmt::Display for ScanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScanKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScanKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown scan kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub x: f64,
    pub y: f64,
    pub sigma_y: f64,
}

/// Provenance carried on the first CSV line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub kind: ScanKind,
    pub seed: u64,
    pub fast: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_index: Option<usize>,
    pub config: ConfigDocument,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanDataset {
    pub kind: ScanKind,
    pub records: Vec<ScanRecord>,
    pub metadata: Option<ScanMetadata>,
}

impl ScanDataset {
    /// Builds a dataset with records sorted by x.
    pub fn new(
        kind: ScanKind,
        mut records: Vec<ScanRecord>,
        metadata: Option<ScanMetadata>,
    ) -> Self {
        records.sort_by(|a, b| a.x.total_cmp(&b.x));
        ScanDataset {
            kind,
            records,
            metadata,
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y).collect()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.sigma_y).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn expect_kind(&self, expected: ScanKind) -> Result<(), DatasetError> {
        if self.kind != expected {
            return Err(DatasetError::KindMismatch {
                expected,
                found: self.kind,
            });
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(meta) = &self.metadata {
            out.push_str(METADATA_PREFIX);
            out.push_str(&serde_json::to_string(meta).expect("metadata serializes"));
            out.push('\n');
        }
        let mut writer = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            writer.serialize(r).expect("in-memory CSV write");
        }
        if self.records.is_empty() {
            writer
                .write_record(["x", "y", "sigma_y"])
                .expect("in-memory CSV write");
        }
        let body = writer.into_inner().expect("in-memory CSV flush");
        out.push_str(std::str::from_utf8(&body).expect("CSV is UTF-8"));
        out
    }

    /// Parse CSV text. `kind` is required when the text has no metadata
    /// line, and must agree with it otherwise.
    pub fn from_csv(text: &str, kind: Option<ScanKind>) -> Result<Self, DatasetError> {
        let metadata = match text.lines().next() {
            Some(first) if first.starts_with(METADATA_PREFIX) => {
                Some(serde_json::from_str::<ScanMetadata>(
                    &first[METADATA_PREFIX.len()..],
                )?)
            }
            _ => None,
        };
        let found = metadata.as_ref().map(|m| m.kind);
        let kind = match (kind, found) {
            (Some(expected), Some(found)) if expected != found => {
                return Err(DatasetError::KindMismatch { expected, found })
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(DatasetError::UnknownKind),
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?;
        if headers.iter().collect::<Vec<_>>() != ["x", "y", "sigma_y"] {
            return Err(DatasetError::Header(
                headers.iter().collect::<Vec<_>>().join(","),
            ));
        }
        let mut records = Vec::new();
        for (i, row) in reader.deserialize::<ScanRecord>().enumerate() {
            let r = row?;
            if !(r.x.is_finite() && r.y.is_finite() && r.sigma_y.is_finite()) {
                return Err(DatasetError::NonFinite(i));
            }
            records.push(r);
        }
        Ok(ScanDataset::new(kind, records, metadata))
    }
}
