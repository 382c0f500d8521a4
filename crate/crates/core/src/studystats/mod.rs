//! Statistics for the classroom study: score outcomes by group and survey
//! responses.

mod dist;
mod hypothesis;
mod ols;
mod survey;

pub use dist::{chi2_sf, f_sf, normal_two_sided, t_two_sided};
pub use hypothesis::{
    anova_oneway, average_ranks, kruskal_wallis, mann_whitney, paired_t, posthoc_mann_whitney, welch_t, Anova,
    KruskalWallis, MannWhitney, PairwiseComparison, TTest,
};
pub use ols::{ols_fit, Coefficient, OlsFit};
pub use survey::{
    code_likert, complete_rows, cronbach_alpha, groups_of, parse_likert, questions, read_survey, response_table,
    LikertResponse, DEFAULT_REVERSE_CODED,
};

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::attemptlog::AttemptRecord;
use crate::feedback::{score_percent, Strategy};

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("{0}")]
    Degenerate(String),
    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient { column: String },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Group order used by every output table.
pub const TABLE_GROUPS: [Strategy; 3] = [Strategy::SelfEval, Strategy::RandomIncorrect, Strategy::FirstIncorrect];

pub const DEFAULT_MIN_CHARS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExclusionReason {
    /// No attempts, or only whitespace.
    Blank,
    /// Something was typed, but never `min_chars` non-whitespace characters.
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortReport {
    pub included: Vec<String>,
    pub excluded: Vec<(String, ExclusionReason)>,
}

/// Drops students who made no real attempt at any problem.
///
/// `roster` lists every enrolled student, including those who never
/// submitted; students present only in `attempts` are screened too.
pub fn screen_effort(roster: &[String], attempts: &[AttemptRecord], min_chars: usize) -> EffortReport {
    let mut bodies: BTreeMap<&str, Vec<&str>> = roster.iter().map(|s| (s.as_str(), Vec::new())).collect();
    for a in attempts {
        bodies.entry(&a.student_id).or_default().push(&a.body_markdown);
    }
    let mut report = EffortReport {
        included: Vec::new(),
        excluded: Vec::new(),
    };
    for (student, bs) in bodies {
        let lengths: Vec<usize> = bs
            .iter()
            .map(|b| b.chars().filter(|c| !c.is_whitespace()).count())
            .collect();
        if lengths.iter().any(|&n| n >= min_chars) {
            report.included.push(student.to_string());
        } else if lengths.iter().all(|&n| n == 0) {
            report.excluded.push((student.to_string(), ExclusionReason::Blank));
        } else {
            report.excluded.push((student.to_string(), ExclusionReason::Trivial));
        }
    }
    report
}

/// Checks that scores agree with rubric vectors and that attempt indices
/// increase within each (student, problem) stream.
pub fn validate_attempts(attempts: &[AttemptRecord]) -> Result<(), StatsError> {
    let mut last: BTreeMap<(&str, &str), u32> = BTreeMap::new();
    for (i, a) in attempts.iter().enumerate() {
        if let (Some(s), Some(r)) = (a.score_percent, a.rubric) {
            if s != score_percent(&r) {
                return Err(StatsError::Input(format!(
                    "record {i}: score {s} disagrees with rubric {r}"
                )));
            }
        }
        let key = (a.student_id.as_str(), a.problem_id.as_str());
        if let Some(&prev) = last.get(&key) {
            if a.attempt_index <= prev {
                return Err(StatsError::Input(format!(
                    "record {i}: attempt index {} follows {prev} for {}/{}",
                    a.attempt_index, a.student_id, a.problem_id
                )));
            }
        }
        last.insert(key, a.attempt_index);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialBest {
    pub student_id: String,
    pub problem_id: String,
    pub group: Strategy,
    pub initial: f64,
    pub best: f64,
    pub attempts: usize,
}

/// First and highest graded score per (student, problem), ordered by
/// timestamp then attempt index. Ungraded attempts are ignored.
pub fn initial_best(attempts: &[AttemptRecord]) -> Vec<InitialBest> {
    let mut streams: BTreeMap<(&str, &str), Vec<&AttemptRecord>> = BTreeMap::new();
    for a in attempts.iter().filter(|a| a.score_percent.is_some()) {
        streams.entry((&a.student_id, &a.problem_id)).or_default().push(a);
    }
    streams
        .into_iter()
        .map(|((student, problem), mut s)| {
            s.sort_by(|a, b| a.ts.cmp(&b.ts).then(a.attempt_index.cmp(&b.attempt_index)));
            let scores: Vec<f64> = s.iter().map(|a| a.score_percent.unwrap()).collect();
            InitialBest {
                student_id: student.to_string(),
                problem_id: problem.to_string(),
                group: s[0].group,
                initial: scores[0],
                best: scores.iter().copied().fold(f64::MIN, f64::max),
                attempts: scores.len(),
            }
        })
        .collect()
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, f64::NAN);
    }
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: Strategy,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestScoreRow {
    pub problem_id: String,
    pub groups: Vec<GroupSummary>,
    pub kruskal: KruskalWallis,
    pub posthoc: Vec<PairwiseComparison>,
}

/// Best-score distribution by group for each problem, with a
/// Kruskal-Wallis test and Bonferroni-adjusted pairwise Mann-Whitney tests.
pub fn best_score_table(rows: &[InitialBest]) -> Result<Vec<BestScoreRow>, StatsError> {
    let mut by_problem: BTreeMap<&str, BTreeMap<Strategy, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        by_problem
            .entry(&r.problem_id)
            .or_default()
            .entry(r.group)
            .or_default()
            .push(r.best);
    }
    let mut out = Vec::new();
    for (problem, groups) in by_problem {
        let present: Vec<(Strategy, &[f64])> = TABLE_GROUPS
            .iter()
            .filter_map(|g| groups.get(g).map(|v| (*g, v.as_slice())))
            .collect();
        let samples: Vec<&[f64]> = present.iter().map(|(_, v)| *v).collect();
        let kruskal = kruskal_wallis(&samples).map_err(|e| StatsError::Degenerate(format!("{problem}: {e}")))?;
        let named: Vec<(&str, &[f64])> = present.iter().map(|(g, v)| (g.as_str(), *v)).collect();
        out.push(BestScoreRow {
            problem_id: problem.to_string(),
            groups: TABLE_GROUPS
                .iter()
                .map(|g| {
                    let v = groups.get(g).map_or(&[][..], |v| v.as_slice());
                    let (mean, sd) = mean_sd(v);
                    GroupSummary {
                        group: *g,
                        n: v.len(),
                        mean,
                        sd,
                    }
                })
                .collect(),
            kruskal,
            posthoc: posthoc_mann_whitney(&named)?,
        });
    }
    Ok(out)
}

/// Regresses best score on initial score, per-problem intercepts and
/// treatment indicators: `BEST = μ_problem + α·I + β1·[Random] + β2·[First]`.
pub fn score_gain_regression(rows: &[InitialBest]) -> Result<OlsFit, StatsError> {
    let mut problems: Vec<&str> = rows.iter().map(|r| r.problem_id.as_str()).collect();
    problems.sort_unstable();
    problems.dedup();
    let y: Vec<f64> = rows.iter().map(|r| r.best).collect();
    let indicator = |f: &dyn Fn(&InitialBest) -> bool| rows.iter().map(|r| f(r) as u8 as f64).collect::<Vec<_>>();
    let mut columns = vec![
        ("alpha".to_string(), rows.iter().map(|r| r.initial).collect()),
        (
            "beta1".to_string(),
            indicator(&|r| r.group == Strategy::RandomIncorrect),
        ),
        ("beta2".to_string(), indicator(&|r| r.group == Strategy::FirstIncorrect)),
    ];
    for p in problems {
        columns.push((format!("mu_{p}"), indicator(&|r| r.problem_id == p)));
    }
    ols_fit(&y, &columns)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestKind {
    Welch,
    Paired,
}

/// Human-grader item paired with its autograder counterpart.
pub const PERCEPTION_PAIRS: [(&str, &str, &str); 3] = [
    ("accuracy", "S01", "S08"),
    ("helpfulness", "S02", "S09"),
    ("satisfaction", "S03", "S10"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionCell {
    pub aspect: String,
    pub human_mean: f64,
    pub ai_mean: Option<f64>,
    pub test: Option<TTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionRow {
    pub group: Strategy,
    pub kind: TTestKind,
    pub cells: Vec<PerceptionCell>,
}

fn values_for(table: &BTreeMap<String, BTreeMap<String, f64>>, members: &[&String], q: &str) -> Vec<f64> {
    members.iter().filter_map(|s| table[*s].get(q).copied()).collect()
}

/// Human-versus-autograder perception comparison within each group.
pub fn perception_table(
    responses: &[LikertResponse],
    reverse: &[&str],
    kind: TTestKind,
) -> Result<Vec<PerceptionRow>, StatsError> {
    let table = response_table(responses, reverse);
    let groups = groups_of(responses);
    let mut out = Vec::new();
    for g in TABLE_GROUPS {
        let members: Vec<&String> = groups.iter().filter(|(_, gg)| **gg == g).map(|(s, _)| s).collect();
        if members.is_empty() {
            continue;
        }
        let mut cells = Vec::new();
        for (aspect, hq, aq) in PERCEPTION_PAIRS {
            let human = values_for(&table, &members, hq);
            let ai = values_for(&table, &members, aq);
            let test = match kind {
                _ if ai.len() < 2 || human.len() < 2 => None,
                TTestKind::Welch => Some(welch_t(&human, &ai)?),
                TTestKind::Paired => {
                    let (h, a): (Vec<f64>, Vec<f64>) = members
                        .iter()
                        .filter_map(|s| Some((table[*s].get(hq).copied()?, table[*s].get(aq).copied()?)))
                        .unzip();
                    Some(paired_t(&h, &a)?)
                }
            };
            cells.push(PerceptionCell {
                aspect: aspect.to_string(),
                human_mean: mean_sd(&human).0,
                ai_mean: (!ai.is_empty()).then(|| mean_sd(&ai).0),
                test,
            });
        }
        out.push(PerceptionRow { group: g, kind, cells });
    }
    Ok(out)
}

pub const ATTITUDE_QUESTIONS: [&str; 4] = ["S04", "S05", "S06", "S07"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttitudeRow {
    pub question_id: String,
    /// Mean coded response per group in table order.
    pub means: Vec<f64>,
    pub anova: Anova,
}

/// One-way ANOVA across groups for each attitude item.
pub fn attitude_table(responses: &[LikertResponse], reverse: &[&str]) -> Result<Vec<AttitudeRow>, StatsError> {
    let table = response_table(responses, reverse);
    let groups = groups_of(responses);
    let mut out = Vec::new();
    for q in ATTITUDE_QUESTIONS {
        let samples: Vec<Vec<f64>> = TABLE_GROUPS
            .iter()
            .map(|g| {
                let members: Vec<&String> = groups.iter().filter(|(_, gg)| *gg == g).map(|(s, _)| s).collect();
                values_for(&table, &members, q)
            })
            .collect();
        if samples.iter().all(|s| s.is_empty()) {
            continue;
        }
        let present: Vec<&[f64]> = samples.iter().filter(|s| !s.is_empty()).map(|s| s.as_slice()).collect();
        out.push(AttitudeRow {
            question_id: q.to_string(),
            means: samples.iter().map(|s| mean_sd(s).0).collect(),
            anova: anova_oneway(&present).map_err(|e| StatsError::Degenerate(format!("{q}: {e}")))?,
        });
    }
    Ok(out)
}

pub const SURVEY_SUBSECTIONS: [(&str, &[&str]); 3] = [
    ("human graders", &["S01", "S02", "S03"]),
    ("AI adoption", &["S04", "S05", "S06", "S07"]),
    ("AI graders", &["S08", "S09", "S10"]),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRow {
    pub subsection: String,
    pub questions: Vec<String>,
    pub respondents: usize,
    pub alpha: Option<f64>,
}

/// Cronbach's α per survey subsection over complete respondents.
pub fn reliability_table(responses: &[LikertResponse], reverse: &[&str]) -> Vec<ReliabilityRow> {
    let table = response_table(responses, reverse);
    SURVEY_SUBSECTIONS
        .iter()
        .map(|(name, qs)| {
            let rows = complete_rows(&table, qs);
            ReliabilityRow {
                subsection: name.to_string(),
                questions: qs.iter().map(|q| q.to_string()).collect(),
                respondents: rows.len(),
                alpha: cronbach_alpha(&rows).ok(),
            }
        })
        .collect()
}

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), num)
}

pub fn write_best_score_csv<W: Write>(out: W, rows: &[BestScoreRow]) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["problem".to_string()];
    for g in TABLE_GROUPS {
        header.push(format!("{g}_mean"));
        header.push(format!("{g}_sd"));
        header.push(format!("{g}_n"));
    }
    header.extend(["H", "p", "degenerate"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.problem_id.clone()];
        for g in &r.groups {
            rec.extend([num(g.mean), num(g.sd), g.n.to_string()]);
        }
        rec.extend([num(r.kruskal.h), num(r.kruskal.p), r.kruskal.degenerate.to_string()]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_posthoc_csv<W: Write>(out: W, rows: &[BestScoreRow]) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["problem", "group_a", "group_b", "U", "p", "p_bonferroni"])?;
    for r in rows {
        for c in &r.posthoc {
            w.write_record([
                r.problem_id.clone(),
                c.a.clone(),
                c.b.clone(),
                num(c.u),
                num(c.p),
                num(c.p_adjusted),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_regression_csv<W: Write>(out: W, fit: &OlsFit) -> Result<(), StatsError> {
    let describe = |name: &str| match name {
        "alpha" => "Control for initial score".to_string(),
        "beta1" => "Effect of the Random group".to_string(),
        "beta2" => "Effect of the First group".to_string(),
        n => format!("Control for difficulty of {}", n.trim_start_matches("mu_")),
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["coefficient", "description", "value", "std_err", "t", "p"])?;
    for c in &fit.coefficients {
        w.write_record([
            c.name.clone(),
            describe(&c.name),
            num(c.value),
            num(c.std_err),
            num(c.t),
            num(c.p),
        ])?;
    }
    w.write_record([
        "R2".to_string(),
        "Coefficient of determination".into(),
        num(fit.r_squared),
        String::new(),
        String::new(),
        String::new(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn write_perception_csv<W: Write>(out: W, rows: &[PerceptionRow]) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["group".to_string(), "test".to_string()];
    for (aspect, hq, aq) in PERCEPTION_PAIRS {
        header.extend([
            hq.to_string(),
            aq.to_string(),
            format!("t_{aspect}"),
            format!("p_{aspect}"),
        ]);
    }
    w.write_record(&header)?;
    for r in rows {
        let kind = match r.kind {
            TTestKind::Welch => "welch",
            TTestKind::Paired => "paired",
        };
        let mut rec = vec![r.group.to_string(), kind.to_string()];
        for c in &r.cells {
            rec.extend([
                num(c.human_mean),
                opt(c.ai_mean),
                opt(c.test.map(|t| t.t)),
                opt(c.test.map(|t| t.p)),
            ]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_attitude_csv<W: Write>(out: W, rows: &[AttitudeRow]) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["survey".to_string()];
    header.extend(TABLE_GROUPS.iter().map(|g| g.to_string()));
    header.extend(["F".to_string(), "p".to_string()]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.question_id.clone()];
        rec.extend(r.means.iter().map(|&m| num(m)));
        rec.extend([num(r.anova.f), num(r.anova.p)]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_reliability_csv<W: Write>(out: W, rows: &[ReliabilityRow]) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["subsection", "questions", "respondents", "alpha"])?;
    for r in rows {
        w.write_record([
            r.subsection.clone(),
            r.questions.join(" "),
            r.respondents.to_string(),
            opt(r.alpha),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod unit {
    use super::*;
    use crate::attemptlog::body_hash;
    use crate::rubric::RubricVector;
    use chrono::DateTime;

    fn attempt(student: &str, group: Strategy, problem: &str, i: u32, passed: usize, body: &str) -> AttemptRecord {
        let mut bits = [0u8; 7];
        bits[..passed].fill(1);
        let rubric = RubricVector::from_bits(&bits).unwrap();
        AttemptRecord {
            ts: DateTime::from_timestamp(1_700_000_000 + i as i64 * 60, 0).unwrap(),
            student_id: student.into(),
            group,
            problem_id: problem.into(),
            attempt_index: i,
            score_percent: Some(score_percent(&rubric)),
            rubric: Some(rubric),
            body_hash: body_hash(body),
            body_markdown: body.into(),
            revealed_rubric: None,
            latency_ms: 5,
        }
    }

    const PROOF: &str = "Base case n = 1 holds. Assume P(k) and show P(k+1).";

    #[test]
    fn effort_screening() {
        let attempts = vec![
            attempt("hello", Strategy::SelfEval, "P1", 1, 0, "hello"),
            attempt("hello", Strategy::SelfEval, "P2", 1, 0, "hello"),
            attempt("blank", Strategy::SelfEval, "P1", 1, 0, "   \n"),
            attempt("good", Strategy::FirstIncorrect, "P1", 1, 0, "?"),
            attempt("good", Strategy::FirstIncorrect, "P2", 1, 3, PROOF),
        ];
        let roster = vec!["absent".to_string(), "good".to_string()];
        let r = screen_effort(&roster, &attempts, DEFAULT_MIN_CHARS);
        assert_eq!(r.included, vec!["good"]);
        assert_eq!(
            r.excluded,
            vec![
                ("absent".into(), ExclusionReason::Blank),
                ("blank".into(), ExclusionReason::Blank),
                ("hello".into(), ExclusionReason::Trivial),
            ]
        );
    }

    #[test]
    fn initial_and_best() {
        // scores 2/7, 4/7, 3/7
        let a = vec![
            attempt("s", Strategy::RandomIncorrect, "P1", 1, 2, PROOF),
            attempt("s", Strategy::RandomIncorrect, "P1", 2, 4, PROOF),
            attempt("s", Strategy::RandomIncorrect, "P1", 3, 3, PROOF),
            attempt("s", Strategy::RandomIncorrect, "P2", 1, 7, PROOF),
        ];
        let ib = initial_best(&a);
        assert_eq!(ib.len(), 2);
        assert!((ib[0].initial - 28.571428571428573).abs() < 1e-12);
        assert!((ib[0].best - 57.142857142857146).abs() < 1e-12);
        assert_eq!((ib[1].initial, ib[1].best), (100.0, 100.0));
        assert!(ib.iter().all(|r| r.best >= r.initial));
        validate_attempts(&a).unwrap();
    }

    #[test]
    fn validation_catches_inconsistent_records() {
        let mut a = vec![attempt("s", Strategy::FirstIncorrect, "P1", 2, 2, PROOF)];
        a.push(attempt("s", Strategy::FirstIncorrect, "P1", 2, 2, PROOF));
        assert!(validate_attempts(&a).is_err());
        let mut b = attempt("s", Strategy::FirstIncorrect, "P1", 1, 2, PROOF);
        b.score_percent = Some(50.0);
        assert!(validate_attempts(&[b]).is_err());
    }

    #[test]
    fn regression_recovers_planted_effects() {
        let mut rows = Vec::new();
        let mut rng = crate::rng::PortableRng::new(5);
        let mu = [("P1", 26.5), ("P2", 20.2), ("P3", 20.0)];
        for s in 0..90 {
            let group = TABLE_GROUPS[s % 3];
            for (p, m) in mu {
                let initial = 100.0 * rng.next_f64();
                let effect = match group {
                    Strategy::RandomIncorrect => 11.3,
                    Strategy::FirstIncorrect => 11.6,
                    Strategy::SelfEval => 0.0,
                };
                rows.push(InitialBest {
                    student_id: format!("s{s}"),
                    problem_id: p.into(),
                    group,
                    initial,
                    best: m + 0.693 * initial + effect,
                    attempts: 1,
                });
            }
        }
        let fit = score_gain_regression(&rows).unwrap();
        for (name, v) in [
            ("alpha", 0.693),
            ("beta1", 11.3),
            ("beta2", 11.6),
            ("mu_P1", 26.5),
            ("mu_P3", 20.0),
        ] {
            assert!((fit.get(name).unwrap().value - v).abs() < 1e-9, "{name}");
        }
        let mut buf = Vec::new();
        write_regression_csv(&mut buf, &fit).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("coefficient,description,value,std_err,t,p\nalpha,Control for initial score,"));
    }

    #[test]
    fn regression_without_a_group_is_rank_deficient() {
        let rows: Vec<InitialBest> = (0..10)
            .map(|i| InitialBest {
                student_id: format!("s{i}"),
                problem_id: "P1".into(),
                group: if i % 2 == 0 {
                    Strategy::SelfEval
                } else {
                    Strategy::FirstIncorrect
                },
                initial: i as f64,
                best: 2.0 * i as f64,
                attempts: 1,
            })
            .collect();
        match score_gain_regression(&rows) {
            Err(StatsError::RankDeficient { column }) => assert_eq!(column, "beta1"),
            other => panic!("{other:?}"),
        }
    }

    fn survey() -> Vec<LikertResponse> {
        let mut out = Vec::new();
        let mut rng = crate::rng::PortableRng::new(12);
        for s in 0..60 {
            let group = TABLE_GROUPS[s % 3];
            for q in 1..=10 {
                if group == Strategy::SelfEval && q >= 8 {
                    continue;
                }
                out.push(LikertResponse {
                    student_id: format!("s{s}"),
                    group,
                    question_id: format!("S{q:02}"),
                    value: rng.below(5) as i8 - 2,
                });
            }
        }
        out
    }

    #[test]
    fn survey_tables() {
        let r = survey();
        let perception = perception_table(&r, &DEFAULT_REVERSE_CODED, TTestKind::Welch).unwrap();
        assert_eq!(perception.len(), 3);
        assert!(perception[0]
            .cells
            .iter()
            .all(|c| c.ai_mean.is_none() && c.test.is_none()));
        assert!(perception[1].cells.iter().all(|c| c.test.is_some()));
        let paired = perception_table(&r, &DEFAULT_REVERSE_CODED, TTestKind::Paired).unwrap();
        assert_eq!(paired[2].cells[0].test.unwrap().df, 19.0);
        let attitudes = attitude_table(&r, &DEFAULT_REVERSE_CODED).unwrap();
        assert_eq!(attitudes.len(), 4);
        assert_eq!(attitudes[0].anova.df_between, 2);
        let rel = reliability_table(&r, &DEFAULT_REVERSE_CODED);
        assert_eq!(rel[2].respondents, 40);
        let mut buf = Vec::new();
        write_attitude_csv(&mut buf, &attitudes).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("survey,SelfEval,Random,First,F,p\n"));
        let mut buf = Vec::new();
        write_perception_csv(&mut buf, &perception).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("group,test,S01,S08,t_accuracy,p_accuracy,"));
    }

    #[test]
    fn best_score_table_shape() {
        let mut a = Vec::new();
        for s in 0..30u32 {
            let g = TABLE_GROUPS[s as usize % 3];
            let passed = match g {
                Strategy::SelfEval => (s % 4) as usize,
                _ => 4 + (s % 4) as usize,
            };
            a.push(attempt(&format!("s{s}"), g, "P1", 1, passed, PROOF));
        }
        let rows = best_score_table(&initial_best(&a)).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].kruskal.p < 0.01);
        assert_eq!(rows[0].posthoc.len(), 3);
        let mut buf = Vec::new();
        write_best_score_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("problem,SelfEval_mean,SelfEval_sd,SelfEval_n,Random_mean,"));
    }
}
