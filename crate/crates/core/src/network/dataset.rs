use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Labelled samples stored one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Array2<f64>,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(inputs: Array2<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if inputs.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "dataset inputs vs labels",
                expected: inputs.nrows(),
                got: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::invalid(format!(
                "label {bad} outside {classes} classes"
            )));
        }
        Ok(Dataset {
            inputs,
            labels,
            classes,
        })
    }

    pub fn inputs(&self) -> &Array2<f64> {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn sample(&self, i: usize) -> (ArrayView1<'_, f64>, usize) {
        (self.inputs.row(i), self.labels[i])
    }

    /// Rows `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Dataset {
        Dataset {
            inputs: self
                .inputs
                .slice_axis(Axis(0), range.clone().into())
                .to_owned(),
            labels: self.labels[range].to_vec(),
            classes: self.classes,
        }
    }

    /// Splits off the last `tail` samples, e.g. as a validation set.
    pub fn split_tail(&self, tail: usize) -> (Dataset, Dataset) {
        let cut = self.len().saturating_sub(tail);
        (self.slice(0..cut), self.slice(cut..self.len()))
    }

    /// Input rows as owned vectors, for query-style consumers.
    pub fn rows(&self, limit: usize) -> Vec<Vec<f64>> {
        self.inputs
            .axis_iter(Axis(0))
            .take(limit)
            .map(|r| r.to_vec())
            .collect()
    }
}
