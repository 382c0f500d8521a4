//! Turning predicted rubric vectors into the feedback a student sees.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, PortableRng};
use crate::rubric::{RubricId, RubricVector, DEFAULT_DESCRIPTIONS, RUBRIC_COUNT};

#[derive(Debug, thiserror::Error)]
pub enum FeedbackError {
    #[error("malformed feedback catalog: {0}")]
    Malformed(String),
    #[error("cannot read catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse catalog: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    /// Control condition: a rubric checklist, no score, no model output.
    SelfEval,
    #[serde(rename = "First", alias = "FirstIncorrect")]
    FirstIncorrect,
    #[serde(rename = "Random", alias = "RandomIncorrect")]
    RandomIncorrect,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::SelfEval, Strategy::FirstIncorrect, Strategy::RandomIncorrect];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::SelfEval => "SelfEval",
            Strategy::FirstIncorrect => "First",
            Strategy::RandomIncorrect => "Random",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "selfeval" | "self-eval" | "self_eval" => Ok(Strategy::SelfEval),
            "first" | "firstincorrect" => Ok(Strategy::FirstIncorrect),
            "random" | "randomincorrect" => Ok(Strategy::RandomIncorrect),
            _ => Err(format!("unknown strategy {s:?}")),
        }
    }
}

/// A general message that applies from `min` (inclusive) up to the next
/// band's `min` (exclusive). The last band runs through 100 inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub min: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFeedback {
    pub rubric_descriptions: Vec<String>,
    pub failure_sentences: Vec<String>,
    pub bands: Vec<Band>,
}

const DEFAULT_FAILURE_SENTENCES: [&str; RUBRIC_COUNT] = [
    "It appears the identification of your base case is missing or incorrect.",
    "It appears your proof of the base case is missing or incorrect.",
    "It appears the statement of your inductive hypothesis is missing or incorrect.",
    "It appears your inductive hypothesis is missing or incorrect.",
    "It appears the goal of your inductive step is missing or incorrect.",
    "It appears the breakdown of your inductive step is missing or incorrect.",
    "It appears your application of the inductive hypothesis is missing or incorrect.",
];

pub const SELF_EVAL_MESSAGE: &str = "Check your proof against each rubric point below.";

impl Default for ProblemFeedback {
    fn default() -> Self {
        let band = |min: f64, m: &str| Band {
            min,
            message: m.to_string(),
        };
        Self {
            rubric_descriptions: DEFAULT_DESCRIPTIONS.iter().map(|s| s.to_string()).collect(),
            failure_sentences: DEFAULT_FAILURE_SENTENCES.iter().map(|s| s.to_string()).collect(),
            bands: vec![
                band(0.0, "Your proof needs more work."),
                band(40.0, "You're making progress."),
                band(70.0, "You are almost there."),
                band(100.0, "All rubric points passed, well done!"),
            ],
        }
    }
}

impl ProblemFeedback {
    pub fn validate(&self) -> Result<(), FeedbackError> {
        let bad = |m: String| Err(FeedbackError::Malformed(m));
        if self.rubric_descriptions.len() != RUBRIC_COUNT {
            return bad(format!(
                "{} rubric descriptions, expected {RUBRIC_COUNT}",
                self.rubric_descriptions.len()
            ));
        }
        if self.failure_sentences.len() != RUBRIC_COUNT {
            return bad(format!(
                "{} failure sentences, expected {RUBRIC_COUNT}",
                self.failure_sentences.len()
            ));
        }
        match self.bands.first() {
            Some(b) if b.min == 0.0 => {}
            _ => return bad("the first band must start at 0".into()),
        }
        if self.bands.iter().any(|b| !(0.0..=100.0).contains(&b.min)) {
            return bad("band thresholds must lie in [0, 100]".into());
        }
        if self.bands.windows(2).any(|w| w[0].min >= w[1].min) {
            return bad("band thresholds must be strictly ascending".into());
        }
        Ok(())
    }

    pub fn failure_sentence(&self, id: RubricId) -> &str {
        &self.failure_sentences[id.index()]
    }
}

/// Feedback text for every problem, with a shared fallback.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeedbackCatalog {
    #[serde(default)]
    pub default: ProblemFeedback,
    #[serde(default)]
    pub problems: BTreeMap<String, ProblemFeedback>,
}

impl FeedbackCatalog {
    pub fn parse(text: &str) -> Result<Self, FeedbackError> {
        let catalog: Self = toml::from_str(text)?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeedbackError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), FeedbackError> {
        self.default.validate()?;
        for (id, p) in &self.problems {
            p.validate()
                .map_err(|e| FeedbackError::Malformed(format!("{id}: {e}")))?;
        }
        Ok(())
    }

    pub fn for_problem(&self, problem_id: &str) -> &ProblemFeedback {
        self.problems.get(problem_id).unwrap_or(&self.default)
    }
}

pub fn score_percent(rubric: &RubricVector) -> f64 {
    100.0 * rubric.passed() as f64 / RUBRIC_COUNT as f64
}

pub fn general_message(score: f64, feedback: &ProblemFeedback) -> Result<&str, FeedbackError> {
    feedback.validate()?;
    if !(0.0..=100.0).contains(&score) {
        return Err(FeedbackError::Malformed(format!("score {score} outside [0, 100]")));
    }
    let band = feedback
        .bands
        .iter()
        .rev()
        .find(|b| score >= b.min)
        .expect("first band starts at 0");
    Ok(&band.message)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevealedRubric {
    pub rubric_id: RubricId,
    pub sentence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackBundle {
    pub strategy: Strategy,
    /// Absent for the self-evaluation condition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_percent: Option<f64>,
    pub general_message: String,
    pub revealed: Vec<RevealedRubric>,
    /// Rubric descriptions shown to self-evaluating students.
    pub checklist: Vec<String>,
}

/// Seed for the random-reveal draw. Identical resubmissions reuse it, so
/// resubmitting unchanged work cannot surface a different rubric.
pub fn reveal_seed(student_id: &str, problem_id: &str, body_hash: &str) -> u64 {
    derive_seed(&["reveal", student_id, problem_id, body_hash])
}

pub fn select_feedback(
    rubric: &RubricVector,
    strategy: Strategy,
    feedback: &ProblemFeedback,
    seed: u64,
) -> Result<FeedbackBundle, FeedbackError> {
    feedback.validate()?;
    if strategy == Strategy::SelfEval {
        return Ok(FeedbackBundle {
            strategy,
            score_percent: None,
            general_message: SELF_EVAL_MESSAGE.to_string(),
            revealed: Vec::new(),
            checklist: feedback.rubric_descriptions.clone(),
        });
    }
    let score = score_percent(rubric);
    let failed = rubric.failed();
    let pick = match (strategy, failed.as_slice()) {
        (_, []) => None,
        (Strategy::FirstIncorrect, [first, ..]) => Some(*first),
        (_, many) => Some(many[PortableRng::new(seed).below(many.len())]),
    };
    Ok(FeedbackBundle {
        strategy,
        score_percent: Some(score),
        general_message: general_message(score, feedback)?.to_string(),
        revealed: pick
            .map(|id| RevealedRubric {
                rubric_id: id,
                sentence: feedback.failure_sentence(id).to_string(),
            })
            .into_iter()
            .collect(),
        checklist: Vec::new(),
    })
}
