use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::HybridError;
use crate::nn::{Dataset, Mode, Model, NnError, Tensor};
use crate::signal::FaultLabel;

const K: usize = FaultLabel::COUNT;

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Confusion counts (row = true class, column = prediction) and the scores
/// derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: [[usize; K]; K],
    pub accuracy: f64,
    pub precision: [f64; K],
    pub recall: [f64; K],
    pub f1: [f64; K],
    pub support: [usize; K],
    /// Some precision or recall had a zero denominator and was set to 0.
    pub zero_division: bool,
}

impl Metrics {
    pub fn from_confusion(confusion: [[usize; K]; K]) -> Self {
        let total: usize = confusion.iter().flatten().sum();
        let trace: usize = (0..K).map(|i| confusion[i][i]).sum();
        let mut m = Metrics {
            confusion,
            accuracy: if total == 0 { 0.0 } else { trace as f64 / total as f64 },
            precision: [0.0; K],
            recall: [0.0; K],
            f1: [0.0; K],
            support: [0; K],
            zero_division: false,
        };
        for c in 0..K {
            let row: usize = confusion[c].iter().sum();
            let col: usize = (0..K).map(|r| confusion[r][c]).sum();
            m.support[c] = row;
            let diag = confusion[c][c] as f64;
            if col == 0 || row == 0 {
                m.zero_division = true;
            }
            m.precision[c] = if col == 0 { 0.0 } else { diag / col as f64 };
            m.recall[c] = if row == 0 { 0.0 } else { diag / row as f64 };
            m.f1[c] = f1_score(m.precision[c], m.recall[c]);
        }
        m
    }

    pub fn from_predictions(truth: &[usize], predicted: &[usize]) -> Self {
        let mut confusion = [[0; K]; K];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        Metrics::from_confusion(confusion)
    }

    pub fn total(&self) -> usize {
        self.support.iter().sum()
    }

    pub fn errors(&self) -> usize {
        self.total() - (0..K).map(|i| self.confusion[i][i]).sum::<usize>()
    }

    /// CSV with class names along the first row and column.
    pub fn write_confusion_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let names: Vec<&str> = FaultLabel::ALL.iter().map(|l| l.name()).collect();
        writeln!(w, "true\\predicted,{}", names.join(","))?;
        for (r, name) in names.iter().enumerate() {
            let cells: Vec<String> = self.confusion[r].iter().map(|v| v.to_string()).collect();
            writeln!(w, "{name},{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn report(&self) -> ClassificationReport {
        ClassificationReport {
            rows: FaultLabel::ALL
                .iter()
                .map(|&l| {
                    let c = l.index();
                    ClassReportRow {
                        class: l,
                        precision: self.precision[c],
                        recall: self.recall[c],
                        f1: self.f1[c],
                        support: self.support[c],
                    }
                })
                .collect(),
            accuracy: self.accuracy,
            total: self.total(),
            zero_division: self.zero_division,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReportRow {
    pub class: FaultLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub rows: Vec<ClassReportRow>,
    pub accuracy: f64,
    pub total: usize,
    pub zero_division: bool,
}

impl ClassificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }

    /// Fixed-width table, two decimals.
    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.class.display_name().len())
            .max()
            .unwrap_or(0)
            .max("accuracy".len());
        let mut s = String::new();
        let _ = writeln!(s, "{:width$}  {:>9}  {:>6}  {:>8}  {:>7}", "", "precision", "recall", "f1-score", "support");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:width$}  {:>9.2}  {:>6.2}  {:>8.2}  {:>7}",
                r.class.display_name(),
                r.precision,
                r.recall,
                r.f1,
                r.support
            );
        }
        let _ = writeln!(s, "{:width$}  {:>9}  {:>6}  {:>8.2}  {:>7}", "accuracy", "", "", self.accuracy, self.total);
        s
    }
}

const PREDICT_CHUNK: usize = 64;

/// Argmax class per example in eval mode; ties go to the lowest index.
pub fn predict(model: &mut Model, data: &Dataset) -> Result<Vec<usize>, NnError> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut out = Vec::with_capacity(data.len());
    for chunk in idx.chunks(PREDICT_CHUNK) {
        let part = data.select(chunk);
        let logits: Tensor = model.forward_logits(part.inputs(), Mode::Eval)?;
        out.extend(logits.data().chunks(logits.item_len()).map(crate::nn::argmax));
    }
    Ok(out)
}

pub fn evaluate(model: &mut Model, data: &Dataset) -> Result<Metrics, HybridError> {
    if data.is_empty() {
        return Err(NnError::Empty("evaluation set").into());
    }
    if data.targets.item_len() != K {
        return Err(NnError::Shape(format!("targets must have {K} columns")).into());
    }
    let predicted = predict(model, data)?;
    Ok(Metrics::from_predictions(&data.labels(), &predicted))
}
