//! The seven rubric points of an induction proof and binary verdict vectors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const RUBRIC_COUNT: usize = 7;

/// One of the seven rubric points, in the logical order of an induction proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RubricId {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
}

impl RubricId {
    pub const ALL: [RubricId; RUBRIC_COUNT] = [
        RubricId::R1,
        RubricId::R2,
        RubricId::R3,
        RubricId::R4,
        RubricId::R5,
        RubricId::R6,
        RubricId::R7,
    ];

    /// Zero-based position (R1 = 0).
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn description(self) -> &'static str {
        DEFAULT_DESCRIPTIONS[self.index()]
    }
}

impl fmt::Display for RubricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.index() + 1)
    }
}

impl FromStr for RubricId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('R')
            .and_then(|n| n.parse::<usize>().ok())
            .and_then(|n| n.checked_sub(1))
            .and_then(RubricId::from_index)
            .ok_or_else(|| format!("unknown rubric id {s:?}"))
    }
}

pub const DEFAULT_DESCRIPTIONS: [&str; RUBRIC_COUNT] = [
    "Identifying the base case(s)",
    "Proving the base case(s)",
    "Stating the inductive hypothesis",
    "Setting the bound of the inductive hypothesis",
    "Stating the goal of the inductive step",
    "Breaking down the inductive step",
    "Applying the inductive hypothesis",
];

/// Binary verdicts for R1..R7; `true` means the rubric point is satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct RubricVector([bool; RUBRIC_COUNT]);

impl RubricVector {
    pub const ALL_CORRECT: RubricVector = RubricVector([true; RUBRIC_COUNT]);
    pub const ALL_INCORRECT: RubricVector = RubricVector([false; RUBRIC_COUNT]);

    pub fn new(bits: [bool; RUBRIC_COUNT]) -> Self {
        Self(bits)
    }

    /// Builds from 0/1 integers; any other value is rejected.
    pub fn from_bits(bits: &[u8]) -> Result<Self, String> {
        if bits.len() != RUBRIC_COUNT {
            return Err(format!(
                "rubric vector needs {RUBRIC_COUNT} entries, got {}",
                bits.len()
            ));
        }
        let mut out = [false; RUBRIC_COUNT];
        for (slot, &b) in out.iter_mut().zip(bits) {
            *slot = match b {
                0 => false,
                1 => true,
                other => return Err(format!("rubric bit must be 0 or 1, got {other}")),
            };
        }
        Ok(Self(out))
    }

    pub fn get(&self, id: RubricId) -> bool {
        self.0[id.index()]
    }

    pub fn set(&mut self, id: RubricId, value: bool) {
        self.0[id.index()] = value;
    }

    pub fn bits(&self) -> [u8; RUBRIC_COUNT] {
        self.0.map(u8::from)
    }

    pub fn passed(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Rubric ids whose verdict is "incorrect", in R1..R7 order.
    pub fn failed(&self) -> Vec<RubricId> {
        RubricId::ALL.into_iter().filter(|id| !self.get(*id)).collect()
    }
}

impl TryFrom<Vec<u8>> for RubricVector {
    type Error = String;

    fn try_from(v: Vec<u8>) -> Result<Self, Self::Error> {
        Self::from_bits(&v)
    }
}

impl From<RubricVector> for Vec<u8> {
    fn from(v: RubricVector) -> Self {
        v.bits().to_vec()
    }
}

impl fmt::Display for RubricVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}
