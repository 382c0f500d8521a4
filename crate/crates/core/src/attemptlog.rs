//! Append-only JSON-lines log of graded submissions.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::feedback::Strategy;
use crate::rubric::{RubricId, RubricVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub ts: DateTime<Utc>,
    pub student_id: String,
    pub group: Strategy,
    pub problem_id: String,
    pub attempt_index: u32,
    /// `None` when the attempt could not be graded.
    pub score_percent: Option<f64>,
    pub rubric: Option<RubricVector>,
    pub body_hash: String,
    #[serde(default)]
    pub body_markdown: String,
    pub revealed_rubric: Option<RubricId>,
    pub latency_ms: u64,
}

/// Hex SHA-256 of a submission body as typed.
pub fn body_hash(body: &str) -> String {
    Sha256::digest(body.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("attempt log I/O on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("attempt log {path} line {line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Single writer; every append is flushed and synced before returning.
pub struct AttemptLog {
    path: PathBuf,
    file: File,
}

impl AttemptLog {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LogError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| LogError::Io {
            path: path.clone(),
            source,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        Ok(Self { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &AttemptRecord) -> Result<(), LogError> {
        let mut line = serde_json::to_vec(record).expect("record serializes");
        line.push(b'\n');
        let io = |source| LogError::Io {
            path: self.path.clone(),
            source,
        };
        self.file.write_all(&line).map_err(io)?;
        self.file.sync_data().map_err(io)
    }
}

/// Reads every record. A final line without a newline that fails to parse
/// is treated as a torn write and skipped; any other bad line is an error.
pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<AttemptRecord>, LogError> {
    let path = path.as_ref();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => {
            return Err(LogError::Io {
                path: path.into(),
                source,
            })
        }
    };
    let mut reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf).map_err(|source| LogError::Io {
            path: path.into(),
            source,
        })?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let complete = buf.ends_with('\n');
        let text = buf.trim();
        if text.is_empty() {
            continue;
        }
        match serde_json::from_str(text) {
            Ok(r) => out.push(r),
            Err(_) if !complete => {
                tracing::warn!(path = %path.display(), line = line_no, "skipping torn final record");
            }
            Err(e) => {
                return Err(LogError::Malformed {
                    path: path.into(),
                    line: line_no,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(i: u32) -> AttemptRecord {
        AttemptRecord {
            ts: DateTime::from_timestamp(1_700_000_000 + i as i64, 0).unwrap(),
            student_id: "s1".into(),
            group: Strategy::RandomIncorrect,
            problem_id: "P1".into(),
            attempt_index: i,
            score_percent: Some(100.0 * 3.0 / 7.0),
            rubric: Some(RubricVector::from_bits(&[1, 1, 1, 0, 0, 0, 0]).unwrap()),
            body_hash: body_hash("x"),
            body_markdown: "x".into(),
            revealed_rubric: Some(RubricId::R4),
            latency_ms: 12,
        }
    }

    #[test]
    fn append_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("logs/attempts.jsonl");
        let mut log = AttemptLog::open(&path).unwrap();
        log.append(&record(1)).unwrap();
        log.append(&record(2)).unwrap();
        drop(log);
        let back = read_log(&path).unwrap();
        assert_eq!(back, vec![record(1), record(2)]);
        let line = std::fs::read_to_string(&path).unwrap();
        assert!(line.contains("\"group\":\"Random\""));
        assert!(line.contains("\"rubric\":[1,1,1,0,0,0,0]"));
        assert!(line.contains("\"revealed_rubric\":\"R4\""));
    }

    #[test]
    fn torn_tail_is_skipped_but_corruption_is_not() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        let good = serde_json::to_string(&record(1)).unwrap();
        std::fs::write(&path, format!("{good}\n{{\"ts\":")).unwrap();
        assert_eq!(read_log(&path).unwrap().len(), 1);
        std::fs::write(&path, format!("garbage\n{good}\n")).unwrap();
        assert!(matches!(read_log(&path), Err(LogError::Malformed { line: 1, .. })));
    }

    #[test]
    fn missing_log_is_empty() {
        assert!(read_log("/nonexistent/attempts.jsonl").unwrap().is_empty());
    }

    #[test]
    fn body_hash_is_hex_sha256() {
        assert_eq!(
            body_hash(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
