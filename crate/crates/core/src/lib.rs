//! Rubric-based grading of induction proofs from text embeddings.

pub mod attemptlog;
pub mod corpus;
pub mod embeddings;
pub mod evalharness;
pub mod feedback;
pub mod grader;
pub mod mathtext;
pub mod rng;
pub mod rubric;
pub mod studystats;
pub mod synthetic;

pub use corpus::{DatasetSplit, Problem, ProofRecord, SplitPart};
pub use embeddings::{Embedder, EmbeddingVector, ProviderConfig};
pub use feedback::{FeedbackBundle, FeedbackCatalog, Strategy};
pub use grader::{GradeOutcome, LinearRubricModel, ProblemGrader, TrainConfig};
pub use rubric::{RubricId, RubricVector, RUBRIC_COUNT};
