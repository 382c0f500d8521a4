//! Likert survey coding and reliability.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::feedback::Strategy;

/// Negatively worded items whose sign flips before analysis.
pub const DEFAULT_REVERSE_CODED: [&str; 1] = ["S04"];

/// Maps a Likert label or an integer in −2..=2 to its numeric code.
pub fn parse_likert(raw: &str) -> Result<i8, StatsError> {
    let s = raw.trim();
    if let Ok(v) = s.parse::<i8>() {
        if (-2..=2).contains(&v) {
            return Ok(v);
        }
    }
    match s.to_ascii_lowercase().as_str() {
        "strongly disagree" => Ok(-2),
        "disagree" => Ok(-1),
        "neutral" | "neither agree nor disagree" => Ok(0),
        "agree" => Ok(1),
        "strongly agree" => Ok(2),
        _ => Err(StatsError::Input(format!("{raw:?} is not a Likert response"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikertResponse {
    pub student_id: String,
    pub group: Strategy,
    pub question_id: String,
    pub value: i8,
}

/// Applies reverse coding: listed questions map `v ↦ −v`.
pub fn code_likert(responses: &[LikertResponse], reverse: &[&str]) -> Vec<f64> {
    responses
        .iter()
        .map(|r| {
            let v = r.value as f64;
            if reverse.contains(&r.question_id.as_str()) {
                -v
            } else {
                v
            }
        })
        .collect()
}

#[derive(Deserialize)]
struct SurveyRow {
    student_id: String,
    group: String,
    question_id: String,
    value: String,
}

/// Reads `student_id,group,question_id,value` rows.
pub fn read_survey<R: Read>(input: R) -> Result<Vec<LikertResponse>, StatsError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<SurveyRow>().enumerate() {
        let row = row.map_err(|e| StatsError::Input(format!("survey row {}: {e}", i + 2)))?;
        let group = row
            .group
            .parse()
            .map_err(|e| StatsError::Input(format!("survey row {}: {e}", i + 2)))?;
        out.push(LikertResponse {
            student_id: row.student_id,
            group,
            question_id: row.question_id.trim().to_string(),
            value: parse_likert(&row.value)?,
        });
    }
    Ok(out)
}

/// Cronbach's α for an `n × k` matrix of item scores.
pub fn cronbach_alpha(items: &[Vec<f64>]) -> Result<f64, StatsError> {
    let n = items.len();
    let k = items.first().map_or(0, |r| r.len());
    if n < 2 || k < 2 {
        return Err(StatsError::Degenerate(
            "Cronbach's alpha needs two respondents and two items".into(),
        ));
    }
    if items.iter().any(|r| r.len() != k) {
        return Err(StatsError::Degenerate("ragged item matrix".into()));
    }
    let var = |xs: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = xs.collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
    };
    let item_var: f64 = (0..k).map(|j| var(&mut items.iter().map(|r| r[j]))).sum();
    let total_var = var(&mut items.iter().map(|r| r.iter().sum::<f64>()));
    if total_var == 0.0 {
        return Err(StatsError::Degenerate("total scores have zero variance".into()));
    }
    let k = k as f64;
    Ok(k / (k - 1.0) * (1.0 - item_var / total_var))
}

/// Coded responses keyed by student, then question.
pub fn response_table(responses: &[LikertResponse], reverse: &[&str]) -> BTreeMap<String, BTreeMap<String, f64>> {
    let coded = code_likert(responses, reverse);
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (r, v) in responses.iter().zip(coded) {
        out.entry(r.student_id.clone())
            .or_default()
            .insert(r.question_id.clone(), v);
    }
    out
}

/// Rows of respondents who answered every one of `questions`.
pub fn complete_rows(table: &BTreeMap<String, BTreeMap<String, f64>>, questions: &[&str]) -> Vec<Vec<f64>> {
    table
        .values()
        .filter_map(|answers| questions.iter().map(|q| answers.get(*q).copied()).collect())
        .collect()
}

/// Each student's group, taken from their first response.
pub fn groups_of(responses: &[LikertResponse]) -> BTreeMap<String, Strategy> {
    let mut out = BTreeMap::new();
    for r in responses {
        out.entry(r.student_id.clone()).or_insert(r.group);
    }
    out
}

pub fn questions(responses: &[LikertResponse]) -> BTreeSet<String> {
    responses.iter().map(|r| r.question_id.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::Strategy;
    use crate::rng::PortableRng;
    use proptest::prelude::*;

    fn resp(q: &str, v: i8) -> LikertResponse {
        LikertResponse {
            student_id: "s".into(),
            group: Strategy::FirstIncorrect,
            question_id: q.into(),
            value: v,
        }
    }

    #[test]
    fn reverse_coding_examples() {
        let r = [resp("S04", 2), resp("S04", 0), resp("S01", 1)];
        assert_eq!(code_likert(&r, &DEFAULT_REVERSE_CODED), vec![-2.0, 0.0, 1.0]);
    }

    #[test]
    fn labels_parse() {
        assert_eq!(parse_likert("Disagree").unwrap(), -1);
        assert_eq!(parse_likert("Strongly agree").unwrap(), 2);
        assert_eq!(parse_likert(" -2 ").unwrap(), -2);
        assert!(parse_likert("3").is_err());
        assert!(parse_likert("maybe").is_err());
    }

    #[test]
    fn survey_csv() {
        let text = "student_id,group,question_id,value\na,First,S01,2\nb,SelfEval,S04,Disagree\n";
        let r = read_survey(text.as_bytes()).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[1].group, Strategy::SelfEval);
        assert_eq!(r[1].value, -1);
        assert!(read_survey("student_id,group,question_id,value\na,Nope,S01,2\n".as_bytes()).is_err());
    }

    #[test]
    fn identical_columns_give_alpha_one() {
        let rows: Vec<Vec<f64>> = [1.0, -1.0, 2.0, 0.0, 1.0].iter().map(|&v| vec![v; 4]).collect();
        assert!((cronbach_alpha(&rows).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_columns_give_alpha_near_zero() {
        let mut rng = PortableRng::new(2);
        let rows: Vec<Vec<f64>> = (0..5000).map(|_| (0..5).map(|_| rng.normal()).collect()).collect();
        assert!(cronbach_alpha(&rows).unwrap().abs() <= 0.1);
    }

    #[test]
    fn complete_rows_drop_partial_respondents() {
        let mut rs = vec![resp("S08", 1), resp("S09", 2)];
        rs.push(LikertResponse {
            student_id: "t".into(),
            ..resp("S08", 0)
        });
        let table = response_table(&rs, &[]);
        assert_eq!(complete_rows(&table, &["S08", "S09"]), vec![vec![1.0, 2.0]]);
    }

    proptest! {
        #[test]
        fn alpha_is_shift_invariant(
            rows in proptest::collection::vec(proptest::collection::vec(-2i8..=2, 3), 3..30),
            col in 0usize..3,
            shift in -5.0f64..5.0,
        ) {
            let m: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
            let mut shifted = m.clone();
            for r in &mut shifted {
                r[col] += shift;
            }
            match (cronbach_alpha(&m), cronbach_alpha(&shifted)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0)),
                (Err(_), Err(_)) => {}
                (a, b) => return Err(TestCaseError::fail(format!("{a:?} vs {b:?}"))),
            }
        }
    }
}
