use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use proofgrade::attemptlog::{read_log, AttemptLog, AttemptRecord};
use proofgrade::rng::derive_seed;
use proofgrade::{Embedder, FeedbackCatalog, Problem, ProblemGrader, Strategy};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use crate::error::ServerError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub student_id: String,
    pub group: Strategy,
    pub created: DateTime<Utc>,
}

/// Group for a student without a roster entry.
pub fn hashed_group(student_id: &str) -> Strategy {
    const ORDER: [Strategy; 3] = [Strategy::SelfEval, Strategy::FirstIncorrect, Strategy::RandomIncorrect];
    ORDER[(derive_seed(&["group", student_id]) % 3) as usize]
}

pub struct ServerConfig {
    pub problems: Vec<Problem>,
    pub graders: BTreeMap<String, ProblemGrader>,
    pub embedder: Arc<Embedder>,
    pub feedback: FeedbackCatalog,
    pub log_path: PathBuf,
    /// Defaults to the log path with a `.sessions.jsonl` suffix.
    pub sessions_path: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    pub max_attempts: Option<u32>,
    pub retry_after_secs: u64,
}

impl ServerConfig {
    pub fn new(problems: Vec<Problem>, embedder: Arc<Embedder>, log_path: impl Into<PathBuf>) -> Self {
        Self {
            problems,
            graders: BTreeMap::new(),
            embedder,
            feedback: FeedbackCatalog::default(),
            log_path: log_path.into(),
            sessions_path: None,
            static_dir: None,
            max_attempts: None,
            retry_after_secs: 5,
        }
    }
}

/// Everything mutable, behind one lock: this is the serialized appender.
pub(crate) struct Store {
    pub sessions: HashMap<String, Session>,
    pub history: HashMap<String, Vec<AttemptRecord>>,
    pub last_index: HashMap<(String, String), u32>,
    pub log: AttemptLog,
    session_file: File,
    session_path: PathBuf,
}

impl Store {
    pub fn next_index(&self, student_id: &str, problem_id: &str) -> u32 {
        self.last_index
            .get(&(student_id.to_string(), problem_id.to_string()))
            .map_or(1, |i| i + 1)
    }

    pub fn attempts_on(&self, student_id: &str, problem_id: &str) -> usize {
        self.history
            .get(student_id)
            .map_or(0, |h| h.iter().filter(|a| a.problem_id == problem_id).count())
    }

    pub fn record_session(&mut self, session: Session) -> Result<(), std::io::Error> {
        let mut line = serde_json::to_vec(&session).expect("session serializes");
        line.push(b'\n');
        self.session_file.write_all(&line)?;
        self.session_file.sync_data()?;
        self.sessions.insert(session.student_id.clone(), session);
        Ok(())
    }

    /// Only call after the record is durably in the log.
    pub fn remember(&mut self, record: AttemptRecord) {
        let key = (record.student_id.clone(), record.problem_id.clone());
        let last = self.last_index.entry(key).or_insert(0);
        *last = (*last).max(record.attempt_index);
        self.history.entry(record.student_id.clone()).or_default().push(record);
    }

    pub fn session_path(&self) -> &Path {
        &self.session_path
    }
}

pub(crate) struct Shared {
    pub problems: Vec<Problem>,
    pub graders: BTreeMap<String, ProblemGrader>,
    pub embedder: Arc<Embedder>,
    pub feedback: FeedbackCatalog,
    pub static_dir: Option<PathBuf>,
    pub max_attempts: Option<u32>,
    pub retry_after_secs: u64,
    pub store: Mutex<Store>,
}

#[derive(Clone)]
pub struct AppState(pub(crate) Arc<Shared>);

impl AppState {
    /// Validates the registry against the embedder and rebuilds sessions,
    /// attempt indices and histories from disk.
    pub fn new(config: ServerConfig) -> Result<Self, ServerError> {
        for (pid, g) in &config.graders {
            if !config.problems.iter().any(|p| &p.problem_id == pid) {
                return Err(ServerError::Config(format!("model for unknown problem {pid}")));
            }
            if g.provider_id() != config.embedder.provider_id() || g.dim() != config.embedder.dim() {
                return Err(ServerError::Config(format!(
                    "model for {pid} was trained on {} (dim {}), server embeds with {} (dim {})",
                    g.provider_id(),
                    g.dim(),
                    config.embedder.provider_id(),
                    config.embedder.dim()
                )));
            }
        }
        config
            .feedback
            .validate()
            .map_err(|e| ServerError::Config(e.to_string()))?;

        let session_path = config.sessions_path.clone().unwrap_or_else(|| {
            let mut p = config.log_path.clone().into_os_string();
            p.push(".sessions.jsonl");
            p.into()
        });
        let mut sessions = read_sessions(&session_path)?;
        let records = read_log(&config.log_path)?;
        let log = AttemptLog::open(&config.log_path)?;
        let session_file = OpenOptions::new().create(true).append(true).open(&session_path)?;

        let mut store = Store {
            sessions: HashMap::new(),
            history: HashMap::new(),
            last_index: HashMap::new(),
            log,
            session_file,
            session_path,
        };
        for r in records {
            sessions.entry(r.student_id.clone()).or_insert_with(|| Session {
                student_id: r.student_id.clone(),
                group: r.group,
                created: r.ts,
            });
            store.remember(r);
        }
        store.sessions = sessions;
        tracing::info!(
            sessions = store.sessions.len(),
            attempts = store.history.values().map(Vec::len).sum::<usize>(),
            "restored state"
        );

        Ok(Self(Arc::new(Shared {
            problems: config.problems,
            graders: config.graders,
            embedder: config.embedder,
            feedback: config.feedback,
            static_dir: config.static_dir,
            max_attempts: config.max_attempts,
            retry_after_secs: config.retry_after_secs,
            store: Mutex::new(store),
        })))
    }
}

fn read_sessions(path: &Path) -> Result<HashMap<String, Session>, ServerError> {
    let err = |message: String| ServerError::Sessions {
        path: path.display().to_string(),
        message,
    };
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(HashMap::new()),
        Err(e) => return Err(e.into()),
    };
    let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>()?;
    let mut out = HashMap::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Session>(line) {
            Ok(s) => {
                out.entry(s.student_id.clone()).or_insert(s);
            }
            // A torn final write.
            Err(_) if i + 1 == lines.len() => {}
            Err(e) => return Err(err(format!("line {}: {e}", i + 1))),
        }
    }
    Ok(out)
}

/// Loads every `*.pgmd` file in `dir`, keyed by the problem id in its header.
pub fn load_model_dir(dir: impl AsRef<Path>) -> Result<BTreeMap<String, ProblemGrader>, ServerError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pgmd"))
        .collect();
    paths.sort();
    let mut out = BTreeMap::new();
    for path in paths {
        let g = proofgrade::grader::load(&path).map_err(|source| ServerError::Model {
            path: path.display().to_string(),
            source,
        })?;
        let pid = g.problem_id().to_string();
        if out.insert(pid.clone(), g).is_some() {
            return Err(ServerError::Config(format!("two model files for problem {pid}")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashed_groups_are_stable_and_cover_all() {
        assert_eq!(hashed_group("s1"), hashed_group("s1"));
        let seen: std::collections::BTreeSet<_> = (0..30).map(|i| hashed_group(&format!("s{i}"))).collect();
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn torn_session_line_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.jsonl");
        std::fs::write(
            &p,
            "{\"student_id\":\"a\",\"group\":\"First\",\"created\":\"2025-01-01T00:00:00Z\"}\n{\"student_id\":\"b\",\"gro",
        )
        .unwrap();
        let s = read_sessions(&p).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s["a"].group, Strategy::FirstIncorrect);
    }
}
