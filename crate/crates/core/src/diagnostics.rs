//! Per-class metrics and the initial-guessing-bias probe.
//!
//! Classes with no samples yield `None` rather than a number, so a tiny
//! validation shard can never report a fake 0% or 100%.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::MlpModel;
use crate::numerics::Matrix;

fn check_inputs(probs: &Matrix, labels: &[usize], num_classes: usize) -> Result<()> {
    if labels.is_empty() || probs.rows() == 0 {
        return Err(Error::domain("metrics need at least one sample"));
    }
    if probs.rows() != labels.len() {
        return Err(Error::config(format!(
            "{} probability rows for {} labels",
            probs.rows(),
            labels.len()
        )));
    }
    if probs.cols() != num_classes {
        return Err(Error::config(format!(
            "{} probability columns for {num_classes} classes",
            probs.cols()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::domain(format!("label {bad} out of range")));
    }
    Ok(())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Average of `p(k | x)` over the samples whose label is k.
pub fn mean_pred_prob_per_class(
    probs: &Matrix,
    labels: &[usize],
    num_classes: usize,
) -> Result<Vec<Option<f64>>> {
    check_inputs(probs, labels, num_classes)?;
    let mut sums = vec![0.0; num_classes];
    let mut counts = vec![0usize; num_classes];
    for (row, &y) in probs.row_iter().zip(labels) {
        sums[y] += row[y];
        counts[y] += 1;
    }
    Ok(finish_means(sums, counts))
}

/// Column means over every sample, ignoring labels.
pub fn overall_mean_prob_per_class(probs: &Matrix) -> Result<Vec<f64>> {
    if probs.rows() == 0 {
        return Err(Error::domain("metrics need at least one sample"));
    }
    let n = probs.rows() as f64;
    Ok(probs.column_sums().into_iter().map(|s| s / n).collect())
}

/// Fraction of class-k samples whose argmax prediction is k.
pub fn per_class_accuracy(
    probs: &Matrix,
    labels: &[usize],
    num_classes: usize,
) -> Result<Vec<Option<f64>>> {
    check_inputs(probs, labels, num_classes)?;
    let mut hits = vec![0.0; num_classes];
    let mut counts = vec![0usize; num_classes];
    for (row, &y) in probs.row_iter().zip(labels) {
        if argmax(row) == y {
            hits[y] += 1.0;
        }
        counts[y] += 1;
    }
    Ok(finish_means(hits, counts))
}

fn finish_means(sums: Vec<f64>, counts: Vec<usize>) -> Vec<Option<f64>> {
    sums.into_iter()
        .zip(counts)
        .map(|(s, c)| (c > 0).then(|| s / c as f64))
        .collect()
}

/// Share of samples whose argmax is each class.
pub fn argmax_share(probs: &Matrix) -> Result<Vec<f64>> {
    if probs.rows() == 0 {
        return Err(Error::domain("metrics need at least one sample"));
    }
    let mut counts = vec![0.0; probs.cols()];
    for row in probs.row_iter() {
        counts[argmax(row)] += 1.0;
    }
    let n = probs.rows() as f64;
    Ok(counts.into_iter().map(|c| c / n).collect())
}

/// The three per-class vectors recorded at every logging point.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassMetrics {
    pub mean_prob_subset: Vec<Option<f64>>,
    pub mean_prob_overall: Vec<f64>,
    pub accuracy: Vec<Option<f64>>,
}

impl ClassMetrics {
    pub fn from_probs(probs: &Matrix, labels: &[usize], num_classes: usize) -> Result<Self> {
        Ok(ClassMetrics {
            mean_prob_subset: mean_pred_prob_per_class(probs, labels, num_classes)?,
            mean_prob_overall: overall_mean_prob_per_class(probs)?,
            accuracy: per_class_accuracy(probs, labels, num_classes)?,
        })
    }

    /// Mean of the defined per-class accuracies.
    pub fn mean_accuracy(&self) -> f64 {
        mean_defined(&self.accuracy)
    }

    /// Population standard deviation of the whole-set mean probabilities
    /// across classes.
    pub fn overall_spread(&self) -> f64 {
        let k = self.mean_prob_overall.len() as f64;
        let mean = self.mean_prob_overall.iter().sum::<f64>() / k;
        (self
            .mean_prob_overall
            .iter()
            .map(|p| (p - mean).powi(2))
            .sum::<f64>()
            / k)
            .sqrt()
    }
}

pub fn mean_defined(values: &[Option<f64>]) -> f64 {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        f64::NAN
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    }
}

const EVAL_CHUNK: usize = 1024;

/// Softmax outputs for a whole dataset, computed in fixed-size chunks.
pub fn predict_dataset(model: &MlpModel, ds: &Dataset) -> Result<Matrix> {
    let n = ds.len();
    let k = model.num_classes();
    let mut values = Vec::with_capacity(n * k);
    let mut start = 0;
    while start < n {
        let end = (start + EVAL_CHUNK).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let probs = model.predict(&ds.features().select_rows(&idx))?;
        values.extend_from_slice(probs.as_slice());
        start = end;
    }
    Matrix::from_vec(n, k, values)
}

pub fn evaluate(model: &MlpModel, ds: &Dataset) -> Result<ClassMetrics> {
    if model.num_classes() != ds.num_classes() {
        return Err(Error::config(format!(
            "model has {} classes, dataset {}",
            model.num_classes(),
            ds.num_classes()
        )));
    }
    let probs = predict_dataset(model, ds)?;
    ClassMetrics::from_probs(&probs, ds.labels(), ds.num_classes())
}

/// How strongly a model prefers some classes regardless of input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IgbReport {
    pub overall_mean_probs: Vec<f64>,
    pub argmax_share: Vec<f64>,
    pub favoured_class: usize,
    pub favoured_share: f64,
}

impl IgbReport {
    pub fn from_probs(probs: &Matrix) -> Result<Self> {
        let overall_mean_probs = overall_mean_prob_per_class(probs)?;
        let argmax_share = argmax_share(probs)?;
        let favoured_class = argmax(&argmax_share);
        Ok(IgbReport {
            favoured_share: argmax_share[favoured_class],
            overall_mean_probs,
            argmax_share,
            favoured_class,
        })
    }
}

pub fn igb_report(model: &MlpModel, ds: &Dataset) -> Result<IgbReport> {
    IgbReport::from_probs(&predict_dataset(model, ds)?)
}
