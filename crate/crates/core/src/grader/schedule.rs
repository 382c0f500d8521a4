use serde::{Deserialize, Serialize};

use super::GraderError;

/// Which held-out partition picks the epoch count for each rubric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionSplit {
    Validation,
    /// Select on the test partition.
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs_grid: Vec<usize>,
    pub peak_lr: f64,
    pub warmup_frac: f64,
    pub decay_floor_frac: f64,
    pub seed: u64,
    pub selection_split: SelectionSplit,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            epochs_grid: (1..=10).map(|k| k * 100).collect(),
            peak_lr: 0.001,
            warmup_frac: 0.6,
            decay_floor_frac: 0.1,
            seed: 0,
            selection_split: SelectionSplit::Validation,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GraderError> {
        let bad = |m: &str| Err(GraderError::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.warmup_frac > 0.0 && self.warmup_frac < 1.0) {
            return bad("warmup_frac must lie in (0, 1)");
        }
        if !(self.decay_floor_frac > 0.0 && self.decay_floor_frac <= 1.0) {
            return bad("decay_floor_frac must lie in (0, 1]");
        }
        if !(self.peak_lr > 0.0 && self.peak_lr.is_finite()) {
            return bad("peak_lr must be positive");
        }
        if self.epochs_grid.is_empty() || self.epochs_grid.iter().any(|&e| e < 2) {
            return bad("epochs_grid must be non-empty with entries of at least 2");
        }
        if self.epochs_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("epochs_grid must be strictly ascending");
        }
        Ok(())
    }

    /// Number of warmup epochs for a run of `total_epochs`.
    pub fn warmup_epochs(&self, total_epochs: usize) -> usize {
        (self.warmup_frac * total_epochs as f64 + 1e-9).floor() as usize
    }
}

/// Learning rate for zero-based `epoch` of a `total_epochs` run.
///
/// With `w` warmup epochs the rate climbs linearly, `peak·(epoch+1)/w`,
/// reaching the peak on epoch `w−1`. It then decays geometrically,
/// `peak·floor^((epoch−w+1)/(total−w))`, hitting `peak·floor` on the final
/// epoch.
pub fn lr_at(epoch: usize, total_epochs: usize, cfg: &TrainConfig) -> Result<f64, GraderError> {
    if total_epochs < 2 {
        return Err(GraderError::Config(format!(
            "a schedule needs at least 2 epochs, got {total_epochs}"
        )));
    }
    if epoch >= total_epochs {
        return Err(GraderError::Config(format!(
            "epoch {epoch} outside a {total_epochs}-epoch run"
        )));
    }
    let w = cfg.warmup_epochs(total_epochs);
    if epoch < w {
        return Ok(cfg.peak_lr * (epoch + 1) as f64 / w as f64);
    }
    let progress = (epoch - w + 1) as f64 / (total_epochs - w) as f64;
    Ok(cfg.peak_lr * cfg.decay_floor_frac.powf(progress))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors_for_default_thousand_epoch_run() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_at(599, 1000, &cfg).unwrap(), 0.001);
        assert!((lr_at(999, 1000, &cfg).unwrap() - 0.0001).abs() <= 1e-12);
        assert!((lr_at(299, 1000, &cfg).unwrap() - 0.0005).abs() <= 1e-15);
    }

    #[test]
    fn boundary_continuity() {
        let cfg = TrainConfig::default();
        for total in [2usize, 3, 10, 100, 700, 1000] {
            let w = cfg.warmup_epochs(total);
            if w > 0 {
                assert_eq!(lr_at(w - 1, total, &cfg).unwrap(), cfg.peak_lr);
            }
            let expected = cfg.peak_lr * cfg.decay_floor_frac.powf(1.0 / (total - w) as f64);
            assert_eq!(lr_at(w, total, &cfg).unwrap(), expected);
            let last = lr_at(total - 1, total, &cfg).unwrap();
            assert!((last - cfg.peak_lr * cfg.decay_floor_frac).abs() < 1e-15);
        }
    }

    #[test]
    fn warmup_is_monotone_and_decay_is_monotone() {
        let cfg = TrainConfig::default();
        let lrs: Vec<f64> = (0..500).map(|e| lr_at(e, 500, &cfg).unwrap()).collect();
        let w = cfg.warmup_epochs(500);
        assert!(lrs[..w].windows(2).all(|p| p[0] < p[1]));
        assert!(lrs[w - 1..].windows(2).all(|p| p[0] > p[1]));
    }

    #[test]
    fn rejects_short_runs_and_out_of_range_epochs() {
        let cfg = TrainConfig::default();
        assert!(lr_at(0, 1, &cfg).is_err());
        assert!(lr_at(5, 5, &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainConfig {
                warmup_frac: 1.0,
                ..Default::default()
            },
            TrainConfig {
                decay_floor_frac: 0.0,
                ..Default::default()
            },
            TrainConfig {
                epochs_grid: vec![200, 100],
                ..Default::default()
            },
            TrainConfig {
                epochs_grid: vec![],
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
