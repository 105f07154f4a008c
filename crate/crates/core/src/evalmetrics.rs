//! Offline accuracy metrics over prediction files.
//!
//! A prediction file holds one JSON object per line:
//!
//! ```text
//! {"id": "img-001", "pred": [0.1, 0.2, 0.5, 0.6], "gt": [0.12, 0.2, 0.5, 0.61]}
//! ```

use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};

/// The ten thresholds averaged by [`pseudo_map`]: 0.50, 0.55, ..., 0.95.
pub const MAP_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub id: String,
    pub pred: BBox,
    pub gt: BBox,
}

impl PredictionRecord {
    pub fn iou(&self) -> f64 {
        iou(&self.pred, &self.gt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub a50: f64,
    pub a80: f64,
    pub map: f64,
}

/// Fraction of records whose IoU is at least `tau`.
pub fn accuracy_at(records: &[PredictionRecord], tau: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::input("no prediction records"));
    }
    let hits = records.iter().filter(|r| r.iou() >= tau).count();
    Ok(hits as f64 / records.len() as f64)
}

/// Mean of [`accuracy_at`] over [`MAP_THRESHOLDS`].
///
/// Hits are counted over all thresholds first and divided once.
pub fn pseudo_map(records: &[PredictionRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::input("no prediction records"));
    }
    let hits: usize = records
        .iter()
        .map(|r| {
            let v = r.iou();
            MAP_THRESHOLDS.iter().filter(|&&t| v >= t).count()
        })
        .sum();
    Ok(hits as f64 / (records.len() * MAP_THRESHOLDS.len()) as f64)
}

pub fn summarize(records: &[PredictionRecord]) -> Result<EvalSummary> {
    Ok(EvalSummary {
        a50: accuracy_at(records, 0.5)?,
        a80: accuracy_at(records, 0.8)?,
        map: pseudo_map(records)?,
    })
}

/// Parse line-delimited records, rejecting duplicate ids and invalid boxes.
pub fn read_predictions<R: BufRead>(reader: R) -> Result<Vec<PredictionRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord = serde_json::from_str(&line)
            .map_err(|e| Error::input(format!("line {}: {e}", lineno + 1)))?;
        if !seen.insert(rec.id.clone()) {
            return Err(Error::input(format!(
                "line {}: duplicate id `{}`",
                lineno + 1,
                rec.id
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = std::fs::File::open(path)?;
    read_predictions(std::io::BufReader::new(file))
}
