//! Labeled datasets and the ways they are produced and split across clients.

mod idx;
mod partition;
mod synthetic;

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};

use crate::cgan::Batch;
use crate::error::{Error, Result};

pub use idx::{load_idx, parse_idx_images, parse_idx_labels, pixel_to_feature, IdxImages};
pub use partition::{
    partition_iid, partition_noniid, partition_noniid_with, skewness_report, LeftoverRule,
    PartitionMode, PartitionPlan, SkewnessReport,
};
pub use synthetic::{gen_gaussian_mixture, MixtureSpec};

const RANGE_TOLERANCE: f64 = 1e-9;

/// Feature matrix with values in `[-1, 1]` and integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::config("classes", "must be >= 1"));
        }
        if features.nrows() != labels.len() {
            return Err(Error::Contract(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= n_classes) {
            return Err(Error::Contract(format!(
                "label {y} at row {i} out of range for {n_classes} classes"
            )));
        }
        if let Some(v) = features
            .iter()
            .find(|v| !v.is_finite() || v.abs() > 1.0 + RANGE_TOLERANCE)
        {
            return Err(Error::Contract(format!(
                "feature value {v} outside [-1, 1]"
            )));
        }
        Ok(LabeledDataset {
            features,
            labels,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Rows at `indices`, in that order (duplicates allowed).
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }

    pub fn batch(&self, indices: &[usize]) -> Result<Batch> {
        let sub = self.subset(indices);
        Batch::new(sub.features, sub.labels, self.n_classes)
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.n_classes];
        self.labels.iter().for_each(|&y| h[y] += 1);
        h
    }

    /// Full (unpartitioned) datasets must contain every class.
    pub fn check_class_coverage(&self) -> Result<()> {
        match self.class_histogram().iter().position(|&c| c == 0) {
            Some(c) => Err(Error::Contract(format!("class {c} has no samples"))),
            None => Ok(()),
        }
    }

    /// Writes `feature_0..feature_{d-1},label` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("feature_{j}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (row, &y) in self.features.rows().into_iter().zip(&self.labels) {
            let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            record.push(y.to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
