//! Binary grader files.
//!
//! Layout (little-endian): `b"PGMD"`, `u16` version, `u32` header length, a
//! JSON header, then seven parameter blocks in R1..R7 order. Each block is
//! `2·dim` weights (incorrect row, then correct row) followed by the two
//! biases, all `f64`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{LinearHead, LinearRubricModel, ProblemGrader};
use super::GraderError;
use crate::rubric::{RubricId, RUBRIC_COUNT};

const MAGIC: &[u8; 4] = b"PGMD";
pub const MODEL_FORMAT_VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    problem_id: String,
    provider_id: String,
    dim: usize,
    rubrics: Vec<RubricHeader>,
}

#[derive(Serialize, Deserialize)]
struct RubricHeader {
    rubric_id: RubricId,
    trained_epochs: usize,
    seed: u64,
    train_loss_final: f64,
}

pub fn to_bytes(grader: &ProblemGrader) -> Vec<u8> {
    let header = Header {
        problem_id: grader.problem_id().to_string(),
        provider_id: grader.provider_id().to_string(),
        dim: grader.dim(),
        rubrics: grader
            .models()
            .iter()
            .map(|m| RubricHeader {
                rubric_id: m.rubric_id,
                trained_epochs: m.trained_epochs,
                seed: m.seed,
                train_loss_final: m.train_loss_final,
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(10 + json.len() + RUBRIC_COUNT * (2 * grader.dim() + 2) * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for m in grader.models() {
        for v in m.head.weights.iter().chain(&m.head.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn corrupt(msg: impl Into<String>) -> GraderError {
    GraderError::Format(msg.into())
}

pub fn from_bytes(bytes: &[u8]) -> Result<ProblemGrader, GraderError> {
    if bytes.len() < 10 || &bytes[..4] != MAGIC {
        return Err(corrupt("not a grader file"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != MODEL_FORMAT_VERSION {
        return Err(GraderError::Version {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let header_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let body_start = 10usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| corrupt("header runs past end of file"))?;
    let header: Header =
        serde_json::from_slice(&bytes[10..body_start]).map_err(|e| corrupt(format!("bad header: {e}")))?;
    if header.rubrics.len() != RUBRIC_COUNT {
        return Err(corrupt(format!(
            "header lists {} rubric models, expected {RUBRIC_COUNT}",
            header.rubrics.len()
        )));
    }
    let block = 2 * header.dim + 2;
    let expected = RUBRIC_COUNT * block * 8;
    let body = &bytes[body_start..];
    if body.len() != expected {
        return Err(corrupt(format!(
            "parameter section is {} bytes, expected {expected}",
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let models = header
        .rubrics
        .into_iter()
        .zip(values.chunks_exact(block))
        .map(|(h, p)| LinearRubricModel {
            rubric_id: h.rubric_id,
            problem_id: header.problem_id.clone(),
            provider_id: header.provider_id.clone(),
            head: LinearHead {
                weights: p[..2 * header.dim].to_vec(),
                bias: [p[2 * header.dim], p[2 * header.dim + 1]],
            },
            trained_epochs: h.trained_epochs,
            seed: h.seed,
            train_loss_final: h.train_loss_final,
        })
        .collect();
    ProblemGrader::new(models)
}

pub fn save(grader: &ProblemGrader, path: impl AsRef<Path>) -> Result<(), GraderError> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    w.write_all(&to_bytes(grader))?;
    w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<ProblemGrader, GraderError> {
    from_bytes(&std::fs::read(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::PortableRng;

    fn sample(dim: usize) -> ProblemGrader {
        let mut rng = PortableRng::new(9);
        let models = RubricId::ALL
            .iter()
            .map(|&r| LinearRubricModel {
                rubric_id: r,
                problem_id: "P3".into(),
                provider_id: "hash-embed".into(),
                head: LinearHead {
                    weights: (0..2 * dim).map(|_| rng.normal() * 1e-3).collect(),
                    bias: [rng.normal(), rng.normal()],
                },
                trained_epochs: 100 * (r.index() + 1),
                seed: 40 + r.index() as u64,
                train_loss_final: rng.next_f64() / 3.0,
            })
            .collect();
        ProblemGrader::new(models).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let g = sample(17);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p3.pgmd");
        save(&g, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back, g);
        for (a, b) in back.models().iter().zip(g.models()) {
            assert!(a
                .head
                .weights
                .iter()
                .zip(&b.head.weights)
                .all(|(x, y)| x.to_bits() == y.to_bits()));
            assert_eq!(a.train_loss_final.to_bits(), b.train_loss_final.to_bits());
        }
    }

    #[test]
    fn six_model_file_is_rejected() {
        let bytes = to_bytes(&sample(3));
        let header_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let mut header: serde_json::Value = serde_json::from_slice(&bytes[10..10 + header_len]).unwrap();
        header["rubrics"].as_array_mut().unwrap().pop();
        let json = serde_json::to_vec(&header).unwrap();
        let mut forged = bytes[..6].to_vec();
        forged.extend_from_slice(&(json.len() as u32).to_le_bytes());
        forged.extend_from_slice(&json);
        forged.extend_from_slice(&bytes[10 + header_len..bytes.len() - 8 * 8]);
        assert!(matches!(from_bytes(&forged), Err(GraderError::Format(_))));
    }

    #[test]
    fn truncation_and_version_errors() {
        let bytes = to_bytes(&sample(3));
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(from_bytes(b"PGM").is_err());
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(from_bytes(&v2), Err(GraderError::Version { found: 2, .. })));
    }
}
