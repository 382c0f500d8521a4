use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{evaluate_problem, EvalError};
use crate::corpus::floor_count;
use crate::grader::{train_problem_grader, LabeledSet, TrainConfig};
use crate::rng::PortableRng;
use crate::rubric::RUBRIC_COUNT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub test_frac: f64,
    pub seed: u64,
    /// Overrides the default size grid when set.
    pub sizes: Option<Vec<usize>>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            test_frac: 0.30,
            seed: 0,
            sizes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub problem_id: String,
    pub provider_id: String,
    pub train_size: usize,
    pub mean_accuracy: f64,
    pub per_rubric: [f64; RUBRIC_COUNT],
}

/// Training sizes for a pool of `pool` rows: steps of 50 up to 200, then
/// steps of 100, keeping only sizes the pool can supply.
pub fn sweep_sizes(pool: usize) -> Vec<usize> {
    let fine = [50, 100, 150, 200].into_iter();
    let coarse = (3..).map(|k| k * 100);
    fine.chain(coarse).take_while(|&s| s <= pool).collect()
}

/// Shuffled row indices split into `(test, pool)`.
pub fn sweep_partition(n: usize, test_frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    PortableRng::new(seed).shuffle(&mut order);
    let pool = order.split_off(floor_count(n, test_frac));
    (order, pool)
}

/// Accuracy as a function of training-set size on a fixed test set.
///
/// Training sets are nested prefixes of one shuffled pool. There is no
/// separate validation partition here, so epoch selection uses the test set.
pub fn size_sweep(
    problem_id: &str,
    provider_id: &str,
    data: &LabeledSet,
    train_cfg: &TrainConfig,
    cfg: &SweepConfig,
) -> Result<Vec<SweepPoint>, EvalError> {
    if !(cfg.test_frac > 0.0 && cfg.test_frac < 1.0) {
        return Err(EvalError::Insufficient(format!(
            "test_frac {} must lie in (0, 1)",
            cfg.test_frac
        )));
    }
    let (test_rows, pool) = sweep_partition(data.len(), cfg.test_frac, cfg.seed);
    if test_rows.is_empty() {
        return Err(EvalError::Insufficient("sweep test set is empty".into()));
    }
    let sizes: Vec<usize> = match &cfg.sizes {
        Some(s) => s.iter().copied().filter(|&s| s > 0 && s <= pool.len()).collect(),
        None => sweep_sizes(pool.len()),
    };
    if sizes.is_empty() {
        return Err(EvalError::Insufficient(format!(
            "a pool of {} proofs is too small for any training size",
            pool.len()
        )));
    }
    let test = data.subset(&test_rows);
    let mut points = Vec::with_capacity(sizes.len());
    for size in sizes {
        let train = data.subset(&pool[..size]);
        let (grader, _) = train_problem_grader(problem_id, provider_id, &train, &test, train_cfg)?;
        let report = evaluate_problem(&grader, &test)?;
        let mut per_rubric = [0.0; RUBRIC_COUNT];
        for (slot, m) in per_rubric.iter_mut().zip(&report.per_rubric) {
            *slot = m.accuracy;
        }
        tracing::info!(problem_id, size, accuracy = report.mean_accuracy, "sweep point");
        points.push(SweepPoint {
            problem_id: problem_id.to_string(),
            provider_id: provider_id.to_string(),
            train_size: size,
            mean_accuracy: report.mean_accuracy,
            per_rubric,
        });
    }
    Ok(points)
}

/// Writes `problem,provider,train_size,mean_accuracy` rows.
pub fn write_sweep_csv<W: Write>(out: W, points: &[SweepPoint]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["problem", "provider", "train_size", "mean_accuracy"])?;
    for p in points {
        w.write_record([
            p.problem_id.clone(),
            p.provider_id.clone(),
            p.train_size.to_string(),
            p.mean_accuracy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
