//! Labeled matrix datasets and their per-class statistics.

use crate::error::{CrpError, Result};
use crate::kronlin::Matrix;

/// One sample: an `l1 × l2` matrix and its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub data: Matrix,
    pub label: usize,
}

impl LabeledMatrix {
    pub fn new(data: Matrix, label: usize) -> Self {
        Self { data, label }
    }
}

/// Samples of a common shape, labeled with classes `0..classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<LabeledMatrix>,
    classes: usize,
    rows: usize,
    cols: usize,
}

impl Dataset {
    /// Validates shapes, labels and finiteness.
    pub fn new(
        rows: usize,
        cols: usize,
        classes: usize,
        samples: Vec<LabeledMatrix>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(CrpError::Dimension(format!(
                "invalid sample shape {rows}x{cols}"
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.data.shape() != (rows, cols) {
                return Err(CrpError::Dimension(format!(
                    "sample {i} has shape {:?}, expected {rows}x{cols}",
                    s.data.shape()
                )));
            }
            if s.label >= classes {
                return Err(CrpError::Dimension(format!(
                    "sample {i} has label {} outside 0..{classes}",
                    s.label
                )));
            }
            if s.data.iter().any(|x| !x.is_finite()) {
                return Err(CrpError::NumericalFailure(format!(
                    "sample {i} has non-finite entries"
                )));
            }
        }
        Ok(Self {
            samples,
            classes,
            rows,
            cols,
        })
    }

    /// Like [`Dataset::new`], with the class count taken as `max label + 1`.
    pub fn from_samples(rows: usize, cols: usize, samples: Vec<LabeledMatrix>) -> Result<Self> {
        let classes = samples.iter().map(|s| s.label + 1).max().unwrap_or(0);
        Self::new(rows, cols, classes, samples)
    }

    pub fn samples(&self) -> &[LabeledMatrix] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<LabeledMatrix> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Same labels and class count, new sample matrices.
    pub fn map_samples(&self, mut f: impl FnMut(&Matrix) -> Matrix) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .map(|s| LabeledMatrix::new(f(&s.data), s.label))
            .collect::<Vec<_>>();
        let (rows, cols) = samples
            .first()
            .map(|s| s.data.shape())
            .unwrap_or((self.rows, self.cols));
        Self::new(rows, cols, self.classes, samples)
    }

    /// Subset by sample index, preserving the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            classes: self.classes,
            rows: self.rows,
            cols: self.cols,
        }
    }
}

/// Class means, global mean and per-class counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub class_means: Vec<Matrix>,
    pub global_mean: Matrix,
    pub counts: Vec<usize>,
}

impl ClassStats {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Class means are summed class by class in stored sample order, so the
/// result depends only on the per-class sample sequence.
pub fn compute_class_stats(d: &Dataset) -> Result<ClassStats> {
    if d.is_empty() {
        return Err(CrpError::EmptyDataset);
    }
    let (rows, cols) = d.dims();
    let mut sums = vec![Matrix::zeros(rows, cols); d.classes()];
    let mut counts = vec![0usize; d.classes()];
    for s in d.samples() {
        sums[s.label] += &s.data;
        counts[s.label] += 1;
    }
    if let Some(empty) = counts.iter().position(|&n| n == 0) {
        return Err(CrpError::EmptyClass(empty));
    }
    let mut global = Matrix::zeros(rows, cols);
    for sum in &sums {
        global += sum;
    }
    global /= d.len() as f64;
    let class_means = sums
        .into_iter()
        .zip(&counts)
        .map(|(sum, &n)| sum / n as f64)
        .collect();
    Ok(ClassStats {
        class_means,
        global_mean: global,
        counts,
    })
}

/// `X̄_i − X̄` for each class, without the `n_i` weight.
pub fn between_deviations(s: &ClassStats) -> Vec<Matrix> {
    s.class_means.iter().map(|m| m - &s.global_mean).collect()
}

/// `X_j − X̄_{label(j)}` for each sample, in dataset order.
pub fn within_deviations(d: &Dataset, s: &ClassStats) -> Vec<Matrix> {
    d.samples()
        .iter()
        .map(|x| &x.data - &s.class_means[x.label])
        .collect()
}
