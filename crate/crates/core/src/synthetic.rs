//! Synthetic corpora with a planted, linearly separable labelling.
//!
//! Every proof carries one marker token per rubric, chosen from a "pass" or
//! a "fail" marker according to its label, padded with filler words. Markers
//! are picked so that under the hash-embedding provider at the given
//! dimension and seed no two markers share a bucket and no filler word lands
//! in a marker bucket. Each label is then a linear function of the
//! embedding's sign pattern.

use std::collections::BTreeSet;

use crate::corpus::ProofRecord;
use crate::embeddings::hashing::hash_features;
use crate::rng::PortableRng;
use crate::rubric::RUBRIC_COUNT;

const FILLER: &[&str] = &[
    "assume",
    "suppose",
    "therefore",
    "hence",
    "thus",
    "since",
    "integer",
    "natural",
    "number",
    "sum",
    "product",
    "holds",
    "true",
    "equality",
    "inequality",
    "case",
    "step",
    "claim",
    "follows",
    "we",
    "have",
    "show",
    "that",
    "for",
    "all",
    "every",
    "some",
    "let",
    "then",
    "so",
    "by",
    "definition",
    "induction",
    "base",
    "hypothesis",
    "divisible",
    "even",
    "odd",
    "term",
    "sequence",
    "bound",
    "least",
    "greater",
    "value",
    "proof",
    "done",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub problem_id: String,
    pub n: usize,
    /// Embedding dimension and seed of the hash provider the corpus targets.
    pub dim: usize,
    pub provider_seed: u64,
    pub seed: u64,
    pub marker_repeats: usize,
    pub filler_range: (usize, usize),
}

impl SyntheticSpec {
    pub fn new(problem_id: &str, n: usize, dim: usize, provider_seed: u64, seed: u64) -> Self {
        Self {
            problem_id: problem_id.to_string(),
            n,
            dim,
            provider_seed,
            seed,
            marker_repeats: 3,
            filler_range: (4, 12),
        }
    }
}

fn bucket(token: &str, dim: usize, seed: u64) -> usize {
    hash_features(token, dim, seed)
        .iter()
        .position(|&v| v != 0.0)
        .expect("a single token hashes to one bucket")
}

/// `(pass, fail)` marker pair for each rubric.
pub fn markers(dim: usize, provider_seed: u64) -> Vec<(String, String)> {
    assert!(dim > 2 * RUBRIC_COUNT, "dimension {dim} too small for distinct markers");
    let mut used = BTreeSet::new();
    let mut next = |stem: String| {
        (0..)
            .map(|j| format!("{stem}{j}"))
            .find(|t| used.insert(bucket(t, dim, provider_seed)))
            .expect("some candidate is free")
    };
    (1..=RUBRIC_COUNT)
        .map(|k| (next(format!("rubric{k}pass")), next(format!("rubric{k}fail"))))
        .collect()
}

/// Filler words whose buckets avoid every marker bucket.
pub fn filler_vocabulary(dim: usize, provider_seed: u64) -> Vec<&'static str> {
    let taken: BTreeSet<usize> = markers(dim, provider_seed)
        .iter()
        .flat_map(|(a, b)| [bucket(a, dim, provider_seed), bucket(b, dim, provider_seed)])
        .collect();
    FILLER
        .iter()
        .copied()
        .filter(|w| !taken.contains(&bucket(w, dim, provider_seed)))
        .collect()
}

pub fn synthetic_corpus(spec: &SyntheticSpec) -> Vec<ProofRecord> {
    let markers = markers(spec.dim, spec.provider_seed);
    let vocab = filler_vocabulary(spec.dim, spec.provider_seed);
    assert!(!vocab.is_empty(), "no filler word avoids the marker buckets");
    let mut rng = PortableRng::new(spec.seed);
    let (lo, hi) = spec.filler_range;
    (0..spec.n)
        .map(|i| {
            let mut raw = [0u8; RUBRIC_COUNT];
            let mut tokens: Vec<&str> = Vec::new();
            for (k, (pass, fail)) in markers.iter().enumerate() {
                let correct = rng.below(2) == 1;
                // Incorrect points get a raw grade of 0 or 1 so the corpus
                // exercises label collapsing.
                raw[k] = if correct { 2 } else { rng.below(2) as u8 };
                let m = if correct { pass } else { fail };
                tokens.extend(std::iter::repeat_n(m.as_str(), spec.marker_repeats));
            }
            let fill = lo + rng.below(hi - lo + 1);
            tokens.extend((0..fill).map(|_| vocab[rng.below(vocab.len())]));
            rng.shuffle(&mut tokens);
            ProofRecord {
                proof_id: format!("{}-syn-{i:05}", spec.problem_id),
                problem_id: spec.problem_id.clone(),
                author_ref: None,
                body_markdown: tokens.join(" "),
                raw_labels: raw,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markers_occupy_distinct_buckets() {
        for dim in [16, 64, 256] {
            let m = markers(dim, 7);
            let buckets: BTreeSet<usize> = m
                .iter()
                .flat_map(|(a, b)| [bucket(a, dim, 7), bucket(b, dim, 7)])
                .collect();
            assert_eq!(buckets.len(), 2 * RUBRIC_COUNT);
            for w in filler_vocabulary(dim, 7) {
                assert!(!buckets.contains(&bucket(w, dim, 7)));
            }
        }
    }

    #[test]
    fn labels_match_markers_and_collapse() {
        let spec = SyntheticSpec::new("P1", 200, 64, 3, 11);
        let corpus = synthetic_corpus(&spec);
        let m = markers(64, 3);
        let mut positives = [0usize; RUBRIC_COUNT];
        for r in &corpus {
            let labels = r.labels();
            for (k, id) in crate::rubric::RubricId::ALL.iter().enumerate() {
                let token = if labels.get(*id) { &m[k].0 } else { &m[k].1 };
                assert!(r.body_markdown.split(' ').any(|t| t == token));
                positives[k] += labels.get(*id) as usize;
            }
        }
        assert!(positives.iter().all(|&p| (60..=140).contains(&p)), "{positives:?}");
        assert!(corpus.iter().any(|r| r.raw_labels.contains(&1)));
    }

    #[test]
    fn deterministic() {
        let spec = SyntheticSpec::new("P2", 50, 64, 0, 5);
        assert_eq!(synthetic_corpus(&spec), synthetic_corpus(&spec));
    }
}
