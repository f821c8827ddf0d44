// SPDX-License-Identifier: Apache-2.0

//! File formats: timeseries CSV input, JSON documents for posteriors and
//! rectangles, and plain-text edge lists.
//!
//! Floats are written in shortest round-trip form, so reading a document and
//! writing it again reproduces it byte for byte. Edge lists use 1-based
//! variable indices.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::comparison::PairDiff;
use crate::error::{Error, Result};
use crate::linalg::{dim_from_pair_count, pair_count, pair_of};
use crate::posterior::{PosteriorSpec, TimeseriesMatrix};
use crate::rectangles::{Method, QuantileRectangle};
use crate::support::{SupportEstimate, SupportMethod};

pub const FORMAT_VERSION: u32 = 1;
pub const ORDERING: &str = "row-major-upper";

/// Reads an `n × p` table, rows are observations.
///
/// A first row that does not parse as numbers is taken as column labels.
/// With `transpose`, rows are variables instead and any header is dropped.
pub fn load_timeseries_csv(path: &Path, transpose: bool) -> Result<TimeseriesMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_error(path, e))?;

    let mut labels: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;
    let mut data = Vec::new();
    let mut rows = 0;
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_error(path, e))?;
        let line = record.position().map_or(index as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if let Some(w) = width {
            if record.len() != w {
                return Err(Error::RaggedRows {
                    path: path.to_path_buf(),
                    line,
                    expected: w,
                    found: record.len(),
                });
            }
        } else {
            width = Some(record.len());
            if index == 0 && record.iter().any(|c| c.parse::<f64>().is_err()) {
                labels = Some(record.iter().map(str::to_string).collect());
                continue;
            }
        }
        for (column, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                Error::NonNumericCell {
                    path: path.to_path_buf(),
                    line,
                    column: column + 1,
                    value: cell.to_string(),
                }
            })?;
            data.push(v);
        }
        rows += 1;
    }
    let p = width.unwrap_or(0);
    if rows == 0 || p == 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "no numeric rows".into(),
        });
    }
    let x = TimeseriesMatrix::new(rows, p, data)?;
    if transpose {
        return Ok(x.transpose());
    }
    match labels {
        Some(l) => x.with_labels(l),
        None => Ok(x),
    }
}

fn parse_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// What produced an artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: serde_json::Value,
    pub seed: u64,
}

impl Provenance {
    pub fn new<C: Serialize>(config: &C, seed: u64) -> Result<Self> {
        Ok(Self {
            config: serde_json::to_value(config)?,
            seed,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectangleDocument {
    pub version: u32,
    pub p: usize,
    pub d: usize,
    pub ordering: String,
    pub alpha: f64,
    pub level_t: f64,
    pub method: Method,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub provenance: Provenance,
}

impl RectangleDocument {
    pub fn new(rect: &QuantileRectangle, provenance: Provenance) -> Result<Self> {
        let p = dim_from_pair_count(rect.d()).ok_or_else(|| {
            Error::InvalidArgument(format!("{} is not a pair count p(p-1)/2", rect.d()))
        })?;
        Ok(Self {
            version: FORMAT_VERSION,
            p,
            d: rect.d(),
            ordering: ORDERING.into(),
            alpha: rect.nominal_alpha(),
            level_t: rect.level_t(),
            method: rect.method(),
            lower: rect.lower().to_vec(),
            upper: rect.upper().to_vec(),
            provenance,
        })
    }

    pub fn rectangle(&self) -> Result<QuantileRectangle> {
        if self.version != FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported rectangle format version {}",
                self.version
            )));
        }
        if self.ordering != ORDERING {
            return Err(Error::InvalidArgument(format!(
                "unsupported coordinate ordering {:?}",
                self.ordering
            )));
        }
        if self.d != pair_count(self.p) || self.lower.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: pair_count(self.p),
                got: self.lower.len(),
            });
        }
        QuantileRectangle::new(
            self.lower.clone(),
            self.upper.clone(),
            self.level_t,
            self.alpha,
            self.method,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDocument {
    pub version: u32,
    pub posterior: PosteriorSpec,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportSummary {
    pub method: SupportMethod,
    pub alpha: f64,
    pub n_edges: usize,
    pub p: usize,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffSummary {
    pub globally_different: bool,
    pub n_gained: usize,
    pub n_lost: usize,
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub p: usize,
    pub provenance: Provenance,
}

impl DiffSummary {
    pub fn new(diff: &PairDiff, p: usize, provenance: Provenance) -> Self {
        use crate::comparison::Direction;
        let gained = diff.disjoint.iter().filter(|(_, d)| *d == Direction::Gained).count();
        Self {
            globally_different: diff.globally_different,
            n_gained: gained,
            n_lost: diff.disjoint.len() - gained,
            alpha_a: diff.alpha_a,
            alpha_b: diff.alpha_b,
            p,
            provenance,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn read_rectangle(path: &Path) -> Result<(QuantileRectangle, RectangleDocument)> {
    let doc: RectangleDocument = read_json(path)?;
    Ok((doc.rectangle()?, doc))
}

/// One line `i j direction` per separated coordinate.
pub fn write_diff_edges<W: Write>(mut out: W, diff: &PairDiff, p: usize) -> Result<()> {
    for &(idx, dir) in &diff.disjoint {
        let (i, j) = pair_of(p, idx);
        writeln!(out, "{} {} {}", i + 1, j + 1, dir.as_str())?;
    }
    Ok(())
}

/// One line `i j` per edge.
pub fn write_support_edges<W: Write>(mut out: W, est: &SupportEstimate) -> Result<()> {
    for &(i, j) in &est.edges {
        writeln!(out, "{} {}", i + 1, j + 1)?;
    }
    Ok(())
}
