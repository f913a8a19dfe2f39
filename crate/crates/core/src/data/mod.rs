//! Dataset container, cleaning and feature projection.

mod csv_io;
mod synthetic;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::FeatureSet;

pub use csv_io::{load_csv, write_csv, ColumnMapping, LoadStats};
pub use synthetic::{generate_synthetic, sf_for_snr, SyntheticConfig};

/// A LoRa spreading factor, always in `7..=12`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Sf(u8);

impl Sf {
    pub const MIN: u8 = 7;
    pub const MAX: u8 = 12;

    pub fn new(value: u8) -> Option<Sf> {
        (Self::MIN..=Self::MAX).contains(&value).then_some(Sf(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = Sf> {
        (Self::MIN..=Self::MAX).map(Sf)
    }
}

impl TryFrom<u8> for Sf {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        Sf::new(v).ok_or_else(|| format!("spreading factor {v} outside 7..=12"))
    }
}

impl From<Sf> for u8 {
    fn from(sf: Sf) -> u8 {
        sf.0
    }
}

impl fmt::Display for Sf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SF{}", self.0)
    }
}

/// Numeric feature table with one SF label per row.
///
/// Values are stored row-major in a single buffer. A `Dataset` is never
/// mutated after construction; every transformation returns a new one.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    values: Vec<f64>,
    labels: Vec<Sf>,
}

impl Dataset {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<Sf>) -> Result<Self> {
        let p = columns.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::LengthMismatch {
                left: p,
                right: bad.len(),
            });
        }
        Self::from_flat(columns, rows.concat(), labels)
    }

    pub fn from_flat(columns: Vec<String>, values: Vec<f64>, labels: Vec<Sf>) -> Result<Self> {
        let p = columns.len();
        if p == 0 {
            return Err(Error::InvalidConfig("dataset needs at least one column".into()));
        }
        if values.len() != p * labels.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: p * labels.len(),
            });
        }
        Ok(Dataset {
            columns,
            values,
            labels,
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols())
    }

    /// Row-major value buffer.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[Sf] {
        &self.labels
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Rows at `indices`, in the order given.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let p = self.n_cols();
        let mut values = Vec::with_capacity(indices.len() * p);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            columns: self.columns.clone(),
            values,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Project onto the columns of `fs`, in canonical feature order.
    pub fn select_features(&self, fs: &FeatureSet) -> Result<Dataset> {
        let idx = fs
            .members()
            .into_iter()
            .map(|f| {
                self.column_index(f.column_name())
                    .ok_or_else(|| Error::FeatureAbsent(f.column_name().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = self
            .rows()
            .flat_map(|r| idx.iter().map(move |&j| r[j]))
            .collect();
        Ok(Dataset {
            columns: idx.iter().map(|&j| self.columns[j].clone()).collect(),
            values,
            labels: self.labels.clone(),
        })
    }

    /// Drop rows holding NaN or infinite values, preserving order.
    pub fn clean(&self) -> Result<(Dataset, CleanStats)> {
        let mut stats = CleanStats {
            input_rows: self.n_rows(),
            ..CleanStats::default()
        };
        let mut keep = Vec::with_capacity(self.n_rows());
        for (i, row) in self.rows().enumerate() {
            if row.iter().any(|v| v.is_nan()) {
                stats.nan += 1;
            } else if row.iter().any(|v| v.is_infinite()) {
                stats.infinite += 1;
            } else {
                keep.push(i);
            }
        }
        stats.output_rows = keep.len();
        if keep.is_empty() && self.n_rows() > 0 {
            return Err(Error::EmptyAfterCleaning);
        }
        let cleaned = if keep.len() == self.n_rows() {
            self.clone()
        } else {
            self.subset(&keep)
        };
        Ok((cleaned, stats))
    }

    /// Number of rows per SF class, ascending by SF.
    pub fn label_histogram(&self) -> Vec<(Sf, usize)> {
        Sf::all()
            .map(|sf| (sf, self.labels.iter().filter(|&&l| l == sf).count()))
            .filter(|&(_, n)| n > 0)
            .collect()
    }

    /// SHA-256 over column names, value bits and labels.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.columns {
            h.update(c.as_bytes());
            h.update([0u8]);
        }
        h.update((self.n_rows() as u64).to_le_bytes());
        for v in &self.values {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update(self.labels.iter().map(|l| l.value()).collect::<Vec<u8>>());
        hex::encode(h.finalize())
    }

    /// Whether every value is finite.
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Row counts dropped by [`Dataset::clean`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanStats {
    pub input_rows: usize,
    pub output_rows: usize,
    pub nan: usize,
    pub infinite: usize,
}

impl CleanStats {
    pub fn dropped(&self) -> usize {
        self.nan + self.infinite
    }
}
