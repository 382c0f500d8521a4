//! Per-rubric linear classifiers over proof embeddings.

mod format;
mod model;
mod schedule;
mod train;

pub use format::{from_bytes, load, save, to_bytes, MODEL_FORMAT_VERSION};
pub use model::{softmax2, FeatureMatrix, LinearHead, LinearRubricModel, ProblemGrader};
pub use schedule::{lr_at, SelectionSplit, TrainConfig};
pub use train::{
    accuracy_of, fit, loss_and_gradient, rubric_seed, train_problem_grader, train_rubric_model, FitOutcome, LabeledSet,
    RubricSelection, SelectionReport,
};

use serde::{Deserialize, Serialize};

use crate::corpus::ProofRecord;
use crate::embeddings::{EmbedError, Embedder};
use crate::mathtext::normalize;
use crate::rubric::RubricVector;

#[derive(Debug, thiserror::Error)]
pub enum GraderError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("embedding dimension {got} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label {value} at row {row} is not binary")]
    NonBinaryLabel { row: usize, value: u8 },
    #[error("no training data")]
    EmptyData,
    #[error("the {0} split has no proofs for this problem")]
    EmptySplit(&'static str),
    #[error("training diverged at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("{0}")]
    Invalid(String),
    #[error("grader was trained with provider {model}, but the embedder is {embedder}")]
    ProviderMismatch { model: String, embedder: String },
    #[error("malformed grader file: {0}")]
    Format(String),
    #[error("grader file version {found} is not supported (expected {expected})")]
    Version { found: u16, expected: u16 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Embeds `records` in one batch and pairs them with their labels.
pub fn embed_records(records: &[&ProofRecord], embedder: &Embedder) -> Result<LabeledSet, GraderError> {
    let texts: Vec<&str> = records.iter().map(|r| r.body_markdown.as_str()).collect();
    let vectors = embedder.embed_batch(&texts)?;
    let mut x = FeatureMatrix::new(embedder.dim());
    for v in &vectors {
        x.push(&v.values)?;
    }
    Ok(LabeledSet {
        x,
        labels: records.iter().map(|r| r.labels()).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeOutcome {
    pub rubric: RubricVector,
    /// The body was blank after normalization; every rubric is marked
    /// incorrect without consulting the models.
    pub empty: bool,
}

pub fn grade_proof(grader: &ProblemGrader, body: &str, embedder: &Embedder) -> Result<GradeOutcome, GraderError> {
    if grader.provider_id() != embedder.provider_id() {
        return Err(GraderError::ProviderMismatch {
            model: grader.provider_id().to_string(),
            embedder: embedder.provider_id().to_string(),
        });
    }
    if normalize(body).is_empty() {
        return Ok(GradeOutcome {
            rubric: RubricVector::ALL_INCORRECT,
            empty: true,
        });
    }
    let v = embedder.embed(body)?;
    Ok(GradeOutcome {
        rubric: grader.grade_embedding(&v.values)?,
        empty: false,
    })
}
