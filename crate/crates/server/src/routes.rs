use std::time::Instant;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::Json;
use chrono::{DateTime, Utc};
use proofgrade::attemptlog::{body_hash, AttemptRecord};
use proofgrade::feedback::{reveal_seed, score_percent, select_feedback};
use proofgrade::grader::{grade_proof, GraderError};
use proofgrade::{FeedbackBundle, RubricId, RubricVector, Strategy};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::state::{hashed_group, AppState, Session};

pub const MAX_BODY_BYTES: usize = 64 * 1024;

#[derive(Debug, Serialize)]
pub struct ProblemSummary {
    pub problem_id: String,
    pub statement_markdown: String,
}

pub async fn list_problems(State(state): State<AppState>) -> Json<Vec<ProblemSummary>> {
    Json(
        state
            .0
            .problems
            .iter()
            .map(|p| ProblemSummary {
                problem_id: p.problem_id.clone(),
                statement_markdown: p.statement_markdown.clone(),
            })
            .collect(),
    )
}

#[derive(Debug, Deserialize)]
pub struct SessionRequest {
    pub student_id: String,
    #[serde(default)]
    pub roster_group: Option<Strategy>,
}

pub async fn create_session(
    State(state): State<AppState>,
    Json(req): Json<SessionRequest>,
) -> Result<Json<Session>, ApiError> {
    let student_id = req.student_id.trim();
    if student_id.is_empty() {
        return Err(ApiError::bad_request("student_id must be non-empty"));
    }
    let mut store = state.0.store.lock().await;
    if let Some(existing) = store.sessions.get(student_id) {
        return match req.roster_group {
            Some(g) if g != existing.group => Err(ApiError::new(
                StatusCode::CONFLICT,
                format!("{student_id} is already in group {}", existing.group),
            )),
            _ => Ok(Json(existing.clone())),
        };
    }
    let session = Session {
        student_id: student_id.to_string(),
        group: req.roster_group.unwrap_or_else(|| hashed_group(student_id)),
        created: Utc::now(),
    };
    store.record_session(session.clone()).map_err(|e| {
        tracing::error!(path = %store.session_path().display(), "session append failed: {e}");
        ApiError::internal("could not persist session")
    })?;
    tracing::info!(student = %session.student_id, group = %session.group, "new session");
    Ok(Json(session))
}

#[derive(Debug, Deserialize)]
pub struct AttemptRequest {
    pub student_id: String,
    pub body_markdown: String,
}

#[derive(Debug, Serialize)]
pub struct AttemptResponse {
    pub problem_id: String,
    pub student_id: String,
    pub attempt_index: u32,
    pub group: Strategy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rubric: Option<RubricVector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score_percent: Option<f64>,
    /// The submission had no gradable content.
    pub empty: bool,
    pub feedback: FeedbackBundle,
}

pub async fn submit_attempt(
    State(state): State<AppState>,
    Path(problem_id): Path<String>,
    Json(req): Json<AttemptRequest>,
) -> Result<Json<AttemptResponse>, ApiError> {
    let started = Instant::now();
    let shared = &state.0;
    if req.body_markdown.len() > MAX_BODY_BYTES {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("proof exceeds {MAX_BODY_BYTES} bytes"),
        ));
    }
    if !shared.problems.iter().any(|p| p.problem_id == problem_id) {
        return Err(ApiError::not_found(format!("unknown problem {problem_id}")));
    }
    let group = {
        let store = shared.store.lock().await;
        let session = store
            .sessions
            .get(&req.student_id)
            .ok_or_else(|| ApiError::not_found(format!("no session for {}", req.student_id)))?;
        check_cap(shared.max_attempts, store.attempts_on(&req.student_id, &problem_id))?;
        session.group
    };

    let grader_present = shared.graders.contains_key(&problem_id);
    if !grader_present && group != Strategy::SelfEval {
        return Err(ApiError::not_found(format!("no grader loaded for {problem_id}")));
    }
    let outcome = if grader_present {
        let st = state.clone();
        let (pid, body) = (problem_id.clone(), req.body_markdown.clone());
        let graded = tokio::task::spawn_blocking(move || grade_proof(&st.0.graders[&pid], &body, &st.0.embedder))
            .await
            .map_err(|e| ApiError::internal(format!("grading task failed: {e}")))?;
        match graded {
            Ok(o) => Some(o),
            Err(GraderError::Embed(e)) if e.is_outage() => {
                tracing::warn!(problem = %problem_id, "embedding provider unavailable: {e}");
                return Err(ApiError::unavailable(
                    "embedding provider unavailable, please retry",
                    shared.retry_after_secs,
                ));
            }
            Err(e) => return Err(ApiError::internal(e.to_string())),
        }
    } else {
        None
    };

    let hash = body_hash(&req.body_markdown);
    let rubric = outcome.as_ref().map(|o| o.rubric);
    let bundle = select_feedback(
        &rubric.unwrap_or(RubricVector::ALL_INCORRECT),
        group,
        shared.feedback.for_problem(&problem_id),
        reveal_seed(&req.student_id, &problem_id, &hash),
    )
    .map_err(|e| ApiError::internal(e.to_string()))?;

    let mut store = shared.store.lock().await;
    check_cap(shared.max_attempts, store.attempts_on(&req.student_id, &problem_id))?;
    let record = AttemptRecord {
        ts: Utc::now(),
        student_id: req.student_id.clone(),
        group,
        problem_id: problem_id.clone(),
        attempt_index: store.next_index(&req.student_id, &problem_id),
        score_percent: rubric.as_ref().map(score_percent),
        rubric,
        body_hash: hash,
        body_markdown: req.body_markdown,
        revealed_rubric: bundle.revealed.first().map(|r| r.rubric_id),
        latency_ms: started.elapsed().as_millis() as u64,
    };
    store.log.append(&record).map_err(|e| {
        tracing::error!("attempt log append failed: {e}");
        ApiError::internal("could not record attempt")
    })?;
    let visible = group != Strategy::SelfEval;
    let response = AttemptResponse {
        problem_id,
        student_id: record.student_id.clone(),
        attempt_index: record.attempt_index,
        group,
        rubric: rubric.filter(|_| visible),
        score_percent: record.score_percent.filter(|_| visible),
        empty: outcome.is_some_and(|o| o.empty),
        feedback: bundle,
    };
    store.remember(record);
    Ok(Json(response))
}

fn check_cap(max: Option<u32>, used: usize) -> Result<(), ApiError> {
    match max {
        Some(m) if used >= m as usize => Err(ApiError::new(
            StatusCode::TOO_MANY_REQUESTS,
            format!("attempt limit of {m} reached"),
        )),
        _ => Ok(()),
    }
}

#[derive(Debug, Serialize)]
pub struct HistoryEntry {
    pub ts: DateTime<Utc>,
    pub problem_id: String,
    pub attempt_index: u32,
    pub body_markdown: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score_percent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rubric: Option<RubricVector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub revealed_rubric: Option<RubricId>,
}

#[derive(Debug, Serialize)]
pub struct History {
    pub student_id: String,
    pub group: Strategy,
    pub attempts: Vec<HistoryEntry>,
}

pub async fn student_attempts(
    State(state): State<AppState>,
    Path(student_id): Path<String>,
) -> Result<Json<History>, ApiError> {
    let store = state.0.store.lock().await;
    let session = store
        .sessions
        .get(&student_id)
        .ok_or_else(|| ApiError::not_found(format!("unknown student {student_id}")))?;
    let visible = session.group != Strategy::SelfEval;
    let attempts = store
        .history
        .get(&student_id)
        .map(|h| {
            h.iter()
                .map(|a| HistoryEntry {
                    ts: a.ts,
                    problem_id: a.problem_id.clone(),
                    attempt_index: a.attempt_index,
                    body_markdown: a.body_markdown.clone(),
                    score_percent: a.score_percent.filter(|_| visible),
                    rubric: a.rubric.filter(|_| visible),
                    revealed_rubric: a.revealed_rubric,
                })
                .collect()
        })
        .unwrap_or_default();
    Ok(Json(History {
        student_id,
        group: session.group,
        attempts,
    }))
}
