//! Tabular datasets with a binary label and a binary sensitive attribute.
//!
//! A [`Dataset`] stores standardized features row-major together with the
//! label `y` and sensitive attribute `a` of each sample. Label access is
//! counted so callers can prove that a split (typically the test set) was
//! not consulted before final evaluation.

mod ingest;
mod prepared;
mod presets;
mod standardize;

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ingest::{
    load_dataset, CsvFormat, DataSource, FilterOp, GroupPositiveRates, IngestConfig, LoadedSplits,
    MissingPolicy, RowFilter, SplitGroupCounts, SplitMetadata, SplitSizes, SplitSpec, ValueSet,
};
pub use prepared::{
    dataset_from_csv, dataset_to_csv, read_prepared, split_file, write_prepared, METADATA_FILE,
};
pub use presets::DatasetId;
pub use standardize::{standardize, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Val,
    Test,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Val => "val",
            Role::Test => "test",
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One sample viewed inside a dataset.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub x: &'a [f64],
    pub y: u8,
    pub a: u8,
}

/// Cell counts indexed as `counts[a][y]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroupCounts(pub [[usize; 2]; 2]);

impl GroupCounts {
    pub fn get(&self, a: u8, y: u8) -> usize {
        self.0[a as usize][y as usize]
    }

    pub fn total(&self) -> usize {
        self.0.iter().flatten().sum()
    }

    /// Fraction of positive labels within sensitive group `a`.
    pub fn positive_rate(&self, a: u8) -> Option<f64> {
        let row = self.0[a as usize];
        let n = row[0] + row[1];
        (n > 0).then(|| row[1] as f64 / n as f64)
    }
}

#[derive(Debug)]
pub struct Dataset {
    role: Role,
    feature_names: Vec<String>,
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<u8>,
    sensitive: Vec<u8>,
    label_reads: AtomicUsize,
}

impl Clone for Dataset {
    fn clone(&self) -> Self {
        Dataset {
            role: self.role,
            feature_names: self.feature_names.clone(),
            features: self.features.clone(),
            n_features: self.n_features,
            labels: self.labels.clone(),
            sensitive: self.sensitive.clone(),
            label_reads: AtomicUsize::new(0),
        }
    }
}

impl Dataset {
    /// Builds a dataset from row-major features.
    pub fn new(
        role: Role,
        feature_names: Vec<String>,
        features: Vec<f64>,
        labels: Vec<u8>,
        sensitive: Vec<u8>,
    ) -> Result<Self> {
        let n = labels.len();
        let d = feature_names.len();
        if sensitive.len() != n {
            return Err(Error::Dimension(format!(
                "{} labels but {} sensitive values",
                n,
                sensitive.len()
            )));
        }
        if features.len() != n * d {
            return Err(Error::Dimension(format!(
                "feature buffer has {} values, expected {n} x {d}",
                features.len()
            )));
        }
        if let Some(v) = labels.iter().find(|&&v| v > 1) {
            return Err(Error::NonBinary {
                column: "y".into(),
                value: v.to_string(),
            });
        }
        if let Some(v) = sensitive.iter().find(|&&v| v > 1) {
            return Err(Error::NonBinary {
                column: "a".into(),
                value: v.to_string(),
            });
        }
        Ok(Dataset {
            role,
            feature_names,
            features,
            n_features: d,
            labels,
            sensitive,
            label_reads: AtomicUsize::new(0),
        })
    }

    /// Convenience constructor from per-row vectors.
    pub fn from_rows(
        role: Role,
        feature_names: Vec<String>,
        rows: &[Vec<f64>],
        labels: Vec<u8>,
        sensitive: Vec<u8>,
    ) -> Result<Self> {
        let d = feature_names.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::Dimension(format!(
                "row has {} features, expected {d}",
                bad.len()
            )));
        }
        let flat = rows.iter().flatten().copied().collect();
        Dataset::new(role, feature_names, flat, labels, sensitive)
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn sensitive(&self) -> &[u8] {
        &self.sensitive
    }

    /// Labels of every sample. Each call is recorded in [`Dataset::label_reads`].
    pub fn labels(&self) -> &[u8] {
        self.label_reads.fetch_add(1, Ordering::Relaxed);
        &self.labels
    }

    pub fn sample(&self, i: usize) -> Sample<'_> {
        self.label_reads.fetch_add(1, Ordering::Relaxed);
        Sample {
            x: self.row(i),
            y: self.labels[i],
            a: self.sensitive[i],
        }
    }

    /// Number of times labels were handed out by this handle.
    pub fn label_reads(&self) -> usize {
        self.label_reads.load(Ordering::Relaxed)
    }

    pub fn group_counts(&self) -> GroupCounts {
        let mut counts = GroupCounts::default();
        for (&y, &a) in self.labels().iter().zip(&self.sensitive) {
            counts.0[a as usize][y as usize] += 1;
        }
        counts
    }

    /// Copy of this dataset with the label of sample `i` inverted.
    pub fn with_label_flipped(&self, i: usize) -> Dataset {
        let mut out = self.clone();
        out.labels[i] = 1 - out.labels[i];
        out
    }

    /// Copy with the sensitive attribute of every sample inverted.
    pub fn with_groups_swapped(&self) -> Dataset {
        let mut out = self.clone();
        for a in &mut out.sensitive {
            *a = 1 - *a;
        }
        out
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            role: self.role,
            feature_names: self.feature_names.clone(),
            features,
            n_features: self.n_features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            sensitive: indices.iter().map(|&i| self.sensitive[i]).collect(),
            label_reads: AtomicUsize::new(0),
        }
    }

    /// Fails if any `(a, y)` cell is empty.
    pub fn check_subgroups(&self) -> Result<()> {
        let counts = self.group_counts();
        for a in 0..2u8 {
            for y in 0..2u8 {
                if counts.get(a, y) == 0 {
                    return Err(Error::EmptySubgroup {
                        split: self.role.to_string(),
                        a,
                        y,
                    });
                }
            }
        }
        Ok(())
    }
}
