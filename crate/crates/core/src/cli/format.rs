//! Line-delimited JSON files: one header line, then one record per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ModelKind, RunConfig};
use crate::{Error, Result};

pub const DATASET_FORMAT: &str = "delayppl-dataset";
pub const RESULT_FORMAT: &str = "delayppl-result";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub model: ModelKind,
    /// `simulate`, `filter` or `kalman`.
    pub mode: String,
    pub seed: u64,
    pub steps: usize,
    pub config: RunConfig,
}

/// Per-step quantities of the Kalman filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KalmanRecord {
    pub t: usize,
    pub predicted_mean: f64,
    pub predicted_var: f64,
    pub filtered_mean: f64,
    pub filtered_var: f64,
    pub log_increment: f64,
}

/// One object over its lifetime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackRecord {
    pub id: usize,
    pub birth_time: usize,
    /// Position at each time from `birth_time` on.
    pub positions: Vec<Vec<f64>>,
    /// Index into that time's observation list, `null` when no observation
    /// was associated.
    pub associations: Vec<Option<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryRecord {
    pub log_z: f64,
    pub per_step_log_increments: Vec<f64>,
    pub ess: Vec<f64>,
    pub resampled: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    /// Scalar observation at time `t`; `x` is the state when known.
    Observation {
        t: usize,
        y: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x: Option<f64>,
    },
    /// The list of points observed at time `t`.
    Scan { t: usize, points: Vec<Vec<f64>> },
    Track(TrackRecord),
    Parameter { theta: f64 },
    Summary(SummaryRecord),
    State { t: usize, x: f64 },
    Kalman(KalmanRecord),
}

/// Header plus records.
#[derive(Clone, Debug)]
pub struct RecordFile {
    pub header: Header,
    pub records: Vec<Record>,
}

impl RecordFile {
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let line = serde_json::to_string(&self.header).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(out, "{line}")?;
        for r in &self.records {
            let line = serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?;
            writeln!(out, "{line}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        Ok(buf)
    }

    /// Parses a file, checking the header's format name and version.
    pub fn read<R: BufRead>(input: R, expected_format: &str) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let header: Header = match lines.next() {
            Some((_, line)) => serde_json::from_str(&line?).map_err(|e| Error::Format(format!("header: {e}")))?,
            None => return Err(Error::Format("empty file".into())),
        };
        if header.format != expected_format {
            return Err(Error::Format(format!(
                "expected a {expected_format} file, found {}",
                header.format
            )));
        }
        if header.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {}", header.version)));
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?);
        }
        Ok(Self { header, records })
    }
}
