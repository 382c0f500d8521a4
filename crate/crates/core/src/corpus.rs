//! Labeled proof corpus: loading, label collapsing and train/test/validation
//! splits.
//!
//! The corpus is a JSON Lines file, one proof per line:
//!
//! ```json
//! {"proof_id":"p-001","problem_id":"P2","author_ref":"s17","body_markdown":"...","raw_labels":[2,2,0,0,0,2,2]}
//! ```
//!
//! `author_ref` is optional. Raw labels are the original 0/1/2 grades
//! (absent / partial / complete) for R1..R7.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::PortableRng;
use crate::rubric::{RubricVector, DEFAULT_DESCRIPTIONS, RUBRIC_COUNT};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line} ({proof_id}): raw_labels has {len} entries, expected 7")]
    LabelCount { line: usize, proof_id: String, len: usize },
    #[error("line {line} ({proof_id}): raw label {value} at R{} is outside {{0,1,2}}", .position + 1)]
    LabelValue {
        line: usize,
        proof_id: String,
        position: usize,
        value: i64,
    },
    #[error("raw label {0} is outside {{0,1,2}}")]
    InvalidLabel(i64),
    #[error("cannot split an empty record list")]
    EmptySplit,
    #[error("split fractions must be nonnegative and sum to 1, got {0:?}")]
    BadFractions((f64, f64, f64)),
}

/// A student proof with its original 0/1/2 rubric grades.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofRecord {
    pub proof_id: String,
    pub problem_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_ref: Option<String>,
    pub body_markdown: String,
    pub raw_labels: [u8; RUBRIC_COUNT],
}

impl ProofRecord {
    /// Binary labels (0,1 → incorrect; 2 → correct).
    pub fn labels(&self) -> RubricVector {
        collapse_labels(&self.raw_labels).expect("raw labels validated on load")
    }
}

#[derive(Deserialize)]
struct RawRecord {
    proof_id: String,
    problem_id: String,
    #[serde(default)]
    author_ref: Option<String>,
    body_markdown: String,
    raw_labels: Vec<i64>,
}

/// Reads every record of a JSON Lines corpus in file order. Blank lines are
/// skipped; duplicates are kept.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<ProofRecord>, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text)
}

pub fn parse_corpus(text: &str) -> Result<Vec<ProofRecord>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if raw.raw_labels.len() != RUBRIC_COUNT {
            return Err(CorpusError::LabelCount {
                line: line_no,
                proof_id: raw.proof_id,
                len: raw.raw_labels.len(),
            });
        }
        let mut labels = [0u8; RUBRIC_COUNT];
        for (position, (&value, slot)) in raw.raw_labels.iter().zip(&mut labels).enumerate() {
            if !(0..=2).contains(&value) {
                return Err(CorpusError::LabelValue {
                    line: line_no,
                    proof_id: raw.proof_id,
                    position,
                    value,
                });
            }
            *slot = value as u8;
        }
        out.push(ProofRecord {
            proof_id: raw.proof_id,
            problem_id: raw.problem_id,
            author_ref: raw.author_ref,
            body_markdown: raw.body_markdown,
            raw_labels: labels,
        });
    }
    Ok(out)
}

/// Writes records back out as JSON Lines.
pub fn write_corpus(path: impl AsRef<Path>, records: &[ProofRecord]) -> std::io::Result<()> {
    let mut buf = String::new();
    for r in records {
        buf.push_str(&serde_json::to_string(r).expect("records serialize"));
        buf.push('\n');
    }
    fs::write(path, buf)
}

/// Drops records whose body is empty or whitespace-only.
pub fn filter_nonempty(records: Vec<ProofRecord>) -> Vec<ProofRecord> {
    records
        .into_iter()
        .filter(|r| !r.body_markdown.trim().is_empty())
        .collect()
}

/// Elementwise 0 ↦ 0, 1 ↦ 0, 2 ↦ 1.
pub fn collapse_labels(raw: &[u8; RUBRIC_COUNT]) -> Result<RubricVector, CorpusError> {
    let mut bits = [false; RUBRIC_COUNT];
    for (slot, &v) in bits.iter_mut().zip(raw) {
        *slot = match v {
            0 | 1 => false,
            2 => true,
            other => return Err(CorpusError::InvalidLabel(i64::from(other))),
        };
    }
    Ok(RubricVector::new(bits))
}

/// Fractions of (train, test, validation).
pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.70, 0.15, 0.15);

/// A seeded partition of proof ids. Not stratified by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub validation_ids: Vec<String>,
    pub seed: u64,
    pub fractions: (f64, f64, f64),
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.train_ids.len() + self.test_ids.len() + self.validation_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| CorpusError::Malformed {
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Selects the records of one partition, keeping corpus order.
    pub fn select<'a>(&self, records: &'a [ProofRecord], part: SplitPart) -> Vec<&'a ProofRecord> {
        let ids: HashSet<&str> = self.ids(part).iter().map(String::as_str).collect();
        records.iter().filter(|r| ids.contains(r.proof_id.as_str())).collect()
    }

    pub fn ids(&self, part: SplitPart) -> &[String] {
        match part {
            SplitPart::Train => &self.train_ids,
            SplitPart::Test => &self.test_ids,
            SplitPart::Validation => &self.validation_ids,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitPart {
    Train,
    Test,
    Validation,
}

/// `floor(n * frac)`, tolerant of products like `100 * 0.15` landing a hair
/// below an integer.
pub(crate) fn floor_count(n: usize, frac: f64) -> usize {
    (n as f64 * frac + 1e-9).floor() as usize
}

/// Shuffles the record ids with the portable generator, then assigns the
/// leading block to train, the next to test and the last to validation.
/// Test and validation get `floor(n * frac)` rows; the remainder goes to
/// train.
pub fn split_dataset(
    records: &[ProofRecord],
    seed: u64,
    fractions: (f64, f64, f64),
) -> Result<DatasetSplit, CorpusError> {
    let (a, b, c) = fractions;
    if a < 0.0 || b < 0.0 || c < 0.0 || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadFractions(fractions));
    }
    if records.is_empty() {
        return Err(CorpusError::EmptySplit);
    }
    let mut ids: Vec<String> = records.iter().map(|r| r.proof_id.clone()).collect();
    PortableRng::new(seed).shuffle(&mut ids);

    let n = ids.len();
    let n_test = floor_count(n, b);
    let n_val = floor_count(n, c);
    let n_train = n - n_test - n_val;
    let validation_ids = ids.split_off(n_train + n_test);
    let test_ids = ids.split_off(n_train);
    Ok(DatasetSplit {
        train_ids: ids,
        test_ids,
        validation_ids,
        seed,
        fractions,
    })
}

/// A problem statement plus the rubric descriptions shown to students.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub problem_id: String,
    pub statement_markdown: String,
    #[serde(default = "default_rubric_descriptions")]
    pub rubric_descriptions: Vec<String>,
}

fn default_rubric_descriptions() -> Vec<String> {
    DEFAULT_DESCRIPTIONS.iter().map(|s| s.to_string()).collect()
}

const DEFAULT_PROBLEMS: &str = include_str!("../../../data/problems.jsonl");

/// The four induction problems shipped with the project.
pub fn default_problems() -> Vec<Problem> {
    parse_problems(DEFAULT_PROBLEMS).expect("bundled problems parse")
}

pub fn load_problems(path: impl AsRef<Path>) -> Result<Vec<Problem>, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_problems(&text)
}

pub fn parse_problems(text: &str) -> Result<Vec<Problem>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: Problem = serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        if p.rubric_descriptions.len() != RUBRIC_COUNT {
            return Err(CorpusError::Malformed {
                line: i + 1,
                message: format!(
                    "rubric_descriptions has {} entries, expected 7",
                    p.rubric_descriptions.len()
                ),
            });
        }
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(id: &str, body: &str) -> ProofRecord {
        ProofRecord {
            proof_id: id.into(),
            problem_id: "P1".into(),
            author_ref: None,
            body_markdown: body.into(),
            raw_labels: [0; 7],
        }
    }

    fn records(n: usize) -> Vec<ProofRecord> {
        (0..n).map(|i| record(&format!("p{i}"), "x")).collect()
    }

    #[test]
    fn parses_labels_in_file_order() {
        let text = concat!(
            r#"{"proof_id":"a","problem_id":"P2","body_markdown":"P(1) holds","raw_labels":[2,2,0,0,0,2,2]}"#,
            "\n\n",
            r#"{"proof_id":"b","problem_id":"P2","author_ref":"s1","body_markdown":"","raw_labels":[0,0,0,0,0,0,0]}"#,
            "\n"
        );
        let recs = parse_corpus(text).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].raw_labels, [2, 2, 0, 0, 0, 2, 2]);
        assert_eq!(recs[1].author_ref.as_deref(), Some("s1"));
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(parse_corpus("").unwrap().is_empty());
    }

    #[test]
    fn six_labels_names_the_entry() {
        let text = r#"{"proof_id":"short","problem_id":"P1","body_markdown":"x","raw_labels":[2,2,0,0,0,2]}"#;
        let err = parse_corpus(text).unwrap_err();
        assert!(matches!(err, CorpusError::LabelCount { line: 1, len: 6, .. }));
        assert!(err.to_string().contains("short"));
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let text = r#"{"proof_id":"q","problem_id":"P1","body_markdown":"x","raw_labels":[2,2,3,0,0,2,2]}"#;
        let err = parse_corpus(text).unwrap_err();
        assert!(matches!(
            err,
            CorpusError::LabelValue {
                position: 2,
                value: 3,
                ..
            }
        ));
    }

    #[test]
    fn malformed_line_reports_line_and_field() {
        let text = "\n{\"proof_id\":\"q\",\"problem_id\":\"P1\",\"raw_labels\":[0,0,0,0,0,0,0]}";
        let err = parse_corpus(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("line 2"), "{msg}");
        assert!(msg.contains("body_markdown"), "{msg}");
    }

    #[test]
    fn missing_file_errors() {
        assert!(matches!(
            load_corpus("/nonexistent/corpus.jsonl"),
            Err(CorpusError::Io { .. })
        ));
    }

    #[test]
    fn filter_drops_blank_bodies() {
        let recs = vec![record("a", "…text…"), record("b", "   "), record("c", "\n\t")];
        let kept = filter_nonempty(recs);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].proof_id, "a");

        let all = vec![record("a", "x"), record("b", "y")];
        assert_eq!(filter_nonempty(all.clone()), all);
        assert!(filter_nonempty(vec![record("a", ""), record("b", " ")]).is_empty());
    }

    #[test]
    fn collapse_examples() {
        let c = |r: [u8; 7]| collapse_labels(&r).unwrap().bits();
        assert_eq!(c([2; 7]), [1; 7]);
        assert_eq!(c([0, 1, 0, 1, 0, 1, 0]), [0; 7]);
        assert_eq!(c([2, 2, 1, 0, 0, 2, 2]), [1, 1, 0, 0, 0, 1, 1]);
        assert!(collapse_labels(&[0, 0, 0, 0, 0, 0, 3]).is_err());
    }

    #[test]
    fn split_sizes() {
        let s = split_dataset(&records(100), 1, DEFAULT_FRACTIONS).unwrap();
        assert_eq!(
            (s.train_ids.len(), s.test_ids.len(), s.validation_ids.len()),
            (70, 15, 15)
        );
        let s = split_dataset(&records(101), 1, DEFAULT_FRACTIONS).unwrap();
        assert_eq!(
            (s.train_ids.len(), s.test_ids.len(), s.validation_ids.len()),
            (71, 15, 15)
        );
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(matches!(
            split_dataset(&[], 1, DEFAULT_FRACTIONS),
            Err(CorpusError::EmptySplit)
        ));
        assert!(matches!(
            split_dataset(&records(3), 1, (0.5, 0.5, 0.5)),
            Err(CorpusError::BadFractions(_))
        ));
    }

    #[test]
    fn default_problems_cover_p1_to_p4() {
        let ps = default_problems();
        let ids: Vec<_> = ps.iter().map(|p| p.problem_id.as_str()).collect();
        assert_eq!(ids, ["P1", "P2", "P3", "P4"]);
        assert!(ps[1]
            .statement_markdown
            .starts_with("Prove the following statement by induction"));
        assert_eq!(ps[0].rubric_descriptions[0], "Identifying the base case(s)");
    }

    proptest! {
        #[test]
        fn split_partitions_and_is_deterministic(n in 1usize..300, seed in any::<u64>()) {
            let recs = records(n);
            let s = split_dataset(&recs, seed, DEFAULT_FRACTIONS).unwrap();
            let again = split_dataset(&recs, seed, DEFAULT_FRACTIONS).unwrap();
            prop_assert_eq!(&s, &again);

            let mut all: Vec<&String> = s.train_ids.iter()
                .chain(&s.test_ids)
                .chain(&s.validation_ids)
                .collect();
            prop_assert_eq!(all.len(), n);
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), n);
        }

        #[test]
        fn collapse_is_stable_under_reencoding(raw in proptest::array::uniform7(0u8..=2)) {
            let once = collapse_labels(&raw).unwrap();
            let reencoded = once.bits().map(|b| if b == 1 { 2 } else { 0 });
            prop_assert_eq!(collapse_labels(&reencoded).unwrap(), once);
        }
    }
}
