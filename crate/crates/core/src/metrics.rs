//! Accuracy, confusion matrices, and report files.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Batch;
use crate::error::{Error, Result};
use crate::model::SenetModel;
use crate::tensor::Real;

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let c = class_names.len();
        ConfusionMatrix { class_names, counts: vec![vec![0; c]; c] }
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    /// `trace / total`; zero for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.trace() as f64 / n as f64,
        }
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Each row divided by its sum; empty rows stay zero.
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|r| {
                let s: u64 = r.iter().sum();
                r.iter().map(|&v| if s == 0 { 0.0 } else { v as f64 / s as f64 }).collect()
            })
            .collect()
    }

    fn header(&self) -> String {
        let mut s = String::from("true\\predicted");
        for n in &self.class_names {
            s.push(',');
            s.push_str(&csv_field(n));
        }
        s.push('\n');
        s
    }

    /// Header of class names, then one row of counts per true class.
    pub fn to_csv(&self) -> String {
        let mut s = self.header();
        for (name, row) in self.class_names.iter().zip(&self.counts) {
            s.push_str(&csv_field(name));
            for v in row {
                write!(s, ",{v}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn to_normalized_csv(&self) -> String {
        let mut s = self.header();
        for (name, row) in self.class_names.iter().zip(self.normalized()) {
            s.push_str(&csv_field(name));
            for v in row {
                write!(s, ",{v:.6}").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Inference-mode accuracy and confusion matrix over a stream of batches.
pub fn evaluate<T: Real>(
    model: &SenetModel<T>,
    class_names: &[String],
    batches: impl IntoIterator<Item = Result<Batch>>,
) -> Result<(f64, ConfusionMatrix)> {
    if class_names.len() != model.num_classes() {
        return Err(Error::Data(format!(
            "model has {} classes, data has {}",
            model.num_classes(),
            class_names.len()
        )));
    }
    let mut m = ConfusionMatrix::new(class_names.to_vec());
    let c = model.num_classes();
    for batch in batches {
        let batch = batch?;
        let probs = model.predict(&batch.images.cast())?;
        for (row, &label) in probs.data().chunks(c).zip(&batch.labels) {
            m.record(label, argmax(row));
        }
    }
    Ok((m.accuracy(), m))
}

/// Per-epoch training summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    /// Counted from 1.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
    pub seconds: f64,
}

pub fn epochs_csv(reports: &[EpochReport]) -> String {
    let mut s = String::from("epoch,train_loss,train_accuracy,validation_accuracy,seconds\n");
    for r in reports {
        writeln!(
            s,
            "{},{},{},{},{:.3}",
            r.epoch, r.train_loss, r.train_accuracy, r.validation_accuracy, r.seconds
        )
        .unwrap();
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}
