use serde::{Deserialize, Serialize};

use super::GraderError;
use crate::rubric::{RubricId, RubricVector, RUBRIC_COUNT};

/// Row-major `n × dim` matrix of embeddings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    dim: usize,
}

impl FeatureMatrix {
    pub fn new(dim: usize) -> Self {
        Self { data: Vec::new(), dim }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, GraderError> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::new(dim);
        for r in rows {
            m.push(r.as_ref())?;
        }
        Ok(m)
    }

    pub fn push(&mut self, row: &[f64]) -> Result<(), GraderError> {
        if row.len() != self.dim {
            return Err(GraderError::DimensionMismatch {
                expected: self.dim,
                got: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// A new matrix holding the given rows, in order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Self { data, dim: self.dim }
    }
}

/// Two-class linear softmax head: logits `W·x + b` with `W` stored row-major
/// as `[w_incorrect..., w_correct...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub weights: Vec<f64>,
    pub bias: [f64; 2],
}

impl LinearHead {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; 2 * dim],
            bias: [0.0; 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len() / 2
    }

    pub fn logits(&self, x: &[f64]) -> [f64; 2] {
        let d = self.dim();
        let (w0, w1) = self.weights.split_at(d);
        let mut z = self.bias;
        for ((a, b), &xi) in w0.iter().zip(w1).zip(x) {
            z[0] += a * xi;
            z[1] += b * xi;
        }
        z
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

/// Numerically stable two-way softmax.
pub fn softmax2(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRubricModel {
    pub rubric_id: RubricId,
    pub problem_id: String,
    pub provider_id: String,
    pub head: LinearHead,
    pub trained_epochs: usize,
    pub seed: u64,
    pub train_loss_final: f64,
}

impl LinearRubricModel {
    pub fn dim(&self) -> usize {
        self.head.dim()
    }

    /// `(p_incorrect, p_correct)`.
    pub fn predict_proba(&self, embedding: &[f64]) -> Result<(f64, f64), GraderError> {
        if embedding.len() != self.dim() {
            return Err(GraderError::DimensionMismatch {
                expected: self.dim(),
                got: embedding.len(),
            });
        }
        let [p0, p1] = softmax2(self.head.logits(embedding));
        Ok((p0, p1))
    }

    /// Correct iff `p_correct > 0.5`; an exact tie counts as incorrect.
    pub fn predict(&self, embedding: &[f64]) -> Result<bool, GraderError> {
        let (_, p1) = self.predict_proba(embedding)?;
        Ok(p1 > 0.5)
    }
}

/// The seven rubric models for one problem, stored in R1..R7 order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemGrader {
    problem_id: String,
    provider_id: String,
    dim: usize,
    models: Vec<LinearRubricModel>,
}

impl ProblemGrader {
    pub fn new(models: Vec<LinearRubricModel>) -> Result<Self, GraderError> {
        if models.len() != RUBRIC_COUNT {
            return Err(GraderError::Invalid(format!(
                "a problem grader needs {RUBRIC_COUNT} rubric models, got {}",
                models.len()
            )));
        }
        let first = &models[0];
        for (i, m) in models.iter().enumerate() {
            if m.rubric_id.index() != i {
                return Err(GraderError::Invalid(format!(
                    "model {i} is for {}, expected R{}",
                    m.rubric_id,
                    i + 1
                )));
            }
            if m.provider_id != first.provider_id || m.problem_id != first.problem_id {
                return Err(GraderError::Invalid(format!(
                    "{} belongs to {}/{}, expected {}/{}",
                    m.rubric_id, m.problem_id, m.provider_id, first.problem_id, first.provider_id
                )));
            }
            if m.dim() != first.dim() || m.head.weights.len() % 2 != 0 {
                return Err(GraderError::Invalid(format!(
                    "{} has dim {}, expected {}",
                    m.rubric_id,
                    m.dim(),
                    first.dim()
                )));
            }
            if !m.head.is_finite() {
                return Err(GraderError::Invalid(format!(
                    "{} has non-finite parameters",
                    m.rubric_id
                )));
            }
        }
        Ok(Self {
            problem_id: first.problem_id.clone(),
            provider_id: first.provider_id.clone(),
            dim: first.dim(),
            models,
        })
    }

    pub fn problem_id(&self) -> &str {
        &self.problem_id
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn models(&self) -> &[LinearRubricModel] {
        &self.models
    }

    pub fn model(&self, id: RubricId) -> &LinearRubricModel {
        &self.models[id.index()]
    }

    /// Seven predictions for one embedding.
    pub fn grade_embedding(&self, embedding: &[f64]) -> Result<RubricVector, GraderError> {
        let mut v = RubricVector::default();
        for m in &self.models {
            v.set(m.rubric_id, m.predict(embedding)?);
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(head: LinearHead) -> LinearRubricModel {
        LinearRubricModel {
            rubric_id: RubricId::R1,
            problem_id: "P1".into(),
            provider_id: "test".into(),
            head,
            trained_epochs: 100,
            seed: 0,
            train_loss_final: 0.0,
        }
    }

    #[test]
    fn zero_model_is_uniform_and_predicts_incorrect() {
        let m = model(LinearHead::zeros(3));
        assert_eq!(m.predict_proba(&[1.0, 2.0, 3.0]).unwrap(), (0.5, 0.5));
        assert!(!m.predict(&[1.0, 2.0, 3.0]).unwrap());
    }

    #[test]
    fn bias_ln3_gives_quarter_three_quarters() {
        let mut head = LinearHead::zeros(2);
        head.bias = [0.0, 3f64.ln()];
        let (p0, p1) = model(head).predict_proba(&[0.3, -0.2]).unwrap();
        assert!((p0 - 0.25).abs() < 1e-15);
        assert!((p1 - 0.75).abs() < 1e-15);
    }

    #[test]
    fn threshold_rule() {
        let mut head = LinearHead::zeros(1);
        head.bias = [0.0, (0.7f64 / 0.3).ln()];
        assert!(model(head.clone()).predict(&[0.0]).unwrap());
        head.bias = [0.0, (0.3f64 / 0.7).ln()];
        assert!(!model(head).predict(&[0.0]).unwrap());
    }

    #[test]
    fn dimension_mismatch() {
        let m = model(LinearHead::zeros(3));
        assert!(matches!(
            m.predict_proba(&[1.0]),
            Err(GraderError::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn problem_grader_needs_seven_consistent_models() {
        let models: Vec<_> = RubricId::ALL
            .iter()
            .map(|&r| LinearRubricModel {
                rubric_id: r,
                ..model(LinearHead::zeros(2))
            })
            .collect();
        assert!(ProblemGrader::new(models.clone()).is_ok());
        assert!(ProblemGrader::new(models[..6].to_vec()).is_err());
        let mut mixed = models.clone();
        mixed[3].provider_id = "other".into();
        assert!(ProblemGrader::new(mixed).is_err());
        let mut wrong_dim = models;
        wrong_dim[6].head = LinearHead::zeros(3);
        assert!(ProblemGrader::new(wrong_dim).is_err());
    }

    fn head_and_input() -> impl Strategy<Value = (LinearHead, Vec<f64>)> {
        (1usize..8).prop_flat_map(|d| {
            (
                proptest::collection::vec(-5.0f64..5.0, 2 * d),
                proptest::array::uniform2(-5.0f64..5.0),
                proptest::collection::vec(-3.0f64..3.0, d),
            )
                .prop_map(|(weights, bias, x)| (LinearHead { weights, bias }, x))
        })
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one((head, x) in head_and_input()) {
            let (p0, p1) = model(head).predict_proba(&x).unwrap();
            prop_assert!(p0 > 0.0 && p1 > 0.0);
            prop_assert!((p0 + p1 - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn predict_is_argmax_with_tie_to_incorrect((head, x) in head_and_input()) {
            let m = model(head);
            let (p0, p1) = m.predict_proba(&x).unwrap();
            prop_assert_eq!(m.predict(&x).unwrap(), p1 > p0);
        }

        #[test]
        fn positive_scaling_keeps_prediction_without_bias(
            (mut head, x) in head_and_input(),
            scale in 0.01f64..100.0,
        ) {
            head.bias = [0.0, 0.0];
            let m = model(head);
            let z = m.head.logits(&x);
            prop_assume!((z[1] - z[0]).abs() > 1e-9);
            let scaled: Vec<f64> = x.iter().map(|v| v * scale).collect();
            prop_assert_eq!(m.predict(&x).unwrap(), m.predict(&scaled).unwrap());
        }
    }
}
