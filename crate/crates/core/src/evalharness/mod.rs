//! Held-out evaluation of problem graders.

mod sweep;

pub use sweep::{size_sweep, sweep_partition, sweep_sizes, write_sweep_csv, SweepConfig, SweepPoint};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::grader::{GraderError, LabeledSet, ProblemGrader};
use crate::rubric::{RubricId, RubricVector, RUBRIC_COUNT};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("{0} needs at least {1} values")]
    TooShort(&'static str, usize),
    #[error("pearson correlation is undefined for a constant vector")]
    ZeroVariance,
    #[error("{0}")]
    Insufficient(String),
    #[error(transparent)]
    Grader(#[from] GraderError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binary confusion counts with "correct" as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> Result<f64, EvalError> {
        if self.total() == 0 {
            return Err(EvalError::TooShort("accuracy", 1));
        }
        Ok((self.tp + self.tn) as f64 / self.total() as f64)
    }

    /// `2tp / (2tp + fp + fn)`, or 1 when nothing was positive in either
    /// predictions or truth.
    pub fn f1(&self) -> Result<f64, EvalError> {
        if self.total() == 0 {
            return Err(EvalError::TooShort("f1", 1));
        }
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            return Ok(1.0);
        }
        Ok(2.0 * self.tp as f64 / denom as f64)
    }
}

pub fn confusion(predictions: &[bool], truth: &[bool]) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            left: predictions.len(),
            right: truth.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::TooShort("confusion", 1));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truth) {
        match (p, t) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    cm.accuracy()
}

pub fn f1(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    cm.f1()
}

/// Total score of each vector on a 0–100 scale.
pub fn total_scores(vectors: &[RubricVector]) -> Vec<f64> {
    vectors
        .iter()
        .map(|v| 100.0 * v.passed() as f64 / RUBRIC_COUNT as f64)
        .collect()
}

pub fn rmse(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(EvalError::TooShort("rmse", 1));
    }
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sq / x.len() as f64).sqrt())
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(EvalError::TooShort("pearson", 2));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RubricMetrics {
    pub rubric_id: RubricId,
    pub accuracy: f64,
    pub f1: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub problem_id: String,
    pub provider_id: String,
    pub n_test: usize,
    pub per_rubric: Vec<RubricMetrics>,
    pub mean_accuracy: f64,
    pub rmse_totals: f64,
    /// `None` when predicted or true totals are constant over the test set.
    pub pearson_totals: Option<f64>,
}

/// Scores predicted rubric vectors against the truth.
pub fn evaluate_predictions(
    problem_id: &str,
    provider_id: &str,
    predicted: &[RubricVector],
    truth: &[RubricVector],
) -> Result<MetricsReport, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::Insufficient("the test split is empty".into()));
    }
    let mut per_rubric = Vec::with_capacity(RUBRIC_COUNT);
    for id in RubricId::ALL {
        let p: Vec<bool> = predicted.iter().map(|v| v.get(id)).collect();
        let t: Vec<bool> = truth.iter().map(|v| v.get(id)).collect();
        let cm = confusion(&p, &t)?;
        per_rubric.push(RubricMetrics {
            rubric_id: id,
            accuracy: cm.accuracy()?,
            f1: cm.f1()?,
            confusion: cm,
        });
    }
    let mean_accuracy = per_rubric.iter().map(|m| m.accuracy).sum::<f64>() / RUBRIC_COUNT as f64;
    let pred_totals = total_scores(predicted);
    let true_totals = total_scores(truth);
    let pearson_totals = match pearson(&pred_totals, &true_totals) {
        Ok(r) => Some(r),
        Err(EvalError::ZeroVariance | EvalError::TooShort(..)) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricsReport {
        problem_id: problem_id.to_string(),
        provider_id: provider_id.to_string(),
        n_test: truth.len(),
        per_rubric,
        mean_accuracy,
        rmse_totals: rmse(&pred_totals, &true_totals)?,
        pearson_totals,
    })
}

pub fn evaluate_problem(grader: &ProblemGrader, test: &LabeledSet) -> Result<MetricsReport, EvalError> {
    let predicted = (0..test.len())
        .map(|i| grader.grade_embedding(test.x.row(i)))
        .collect::<Result<Vec<_>, _>>()?;
    evaluate_predictions(grader.problem_id(), grader.provider_id(), &predicted, &test.labels)
}

/// Writes `problem,rubric,accuracy,f1,tp,fp,tn,fn` rows for every report.
pub fn write_metrics_csv<W: Write>(out: W, reports: &[MetricsReport]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["problem", "rubric", "accuracy", "f1", "tp", "fp", "tn", "fn"])?;
    for r in reports {
        for m in &r.per_rubric {
            w.write_record([
                r.problem_id.clone(),
                m.rubric_id.to_string(),
                m.accuracy.to_string(),
                m.f1.to_string(),
                m.confusion.tp.to_string(),
                m.confusion.fp.to_string(),
                m.confusion.tn.to_string(),
                m.confusion.fn_.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Plain-text summary table, one line per problem.
pub fn format_summary(reports: &[MetricsReport]) -> String {
    let mut s = format!(
        "{:<8} {:<16} {:>6} {:>9} {:>8} {:>8}\n",
        "problem", "provider", "n", "accuracy", "rmse", "r"
    );
    for r in reports {
        let pr = r.pearson_totals.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        s.push_str(&format!(
            "{:<8} {:<16} {:>6} {:>8.1}% {:>8.2} {:>8}\n",
            r.problem_id,
            r.provider_id,
            r.n_test,
            100.0 * r.mean_accuracy,
            r.rmse_totals,
            pr
        ));
    }
    s
}
