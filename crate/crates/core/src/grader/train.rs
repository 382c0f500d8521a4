use serde::{Deserialize, Serialize};

use super::model::{softmax2, FeatureMatrix, LinearHead, LinearRubricModel, ProblemGrader};
use super::schedule::{lr_at, TrainConfig};
use super::GraderError;
use crate::rng::PortableRng;
use crate::rubric::{RubricId, RubricVector};

/// Embeddings paired with their seven binary labels.
#[derive(Debug, Clone, Default)]
pub struct LabeledSet {
    pub x: FeatureMatrix,
    pub labels: Vec<RubricVector>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn rubric_labels(&self, id: RubricId) -> Vec<u8> {
        self.labels.iter().map(|v| v.get(id) as u8).collect()
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Per-epoch mean training cross-entropy of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub head: LinearHead,
    pub loss_history: Vec<f64>,
}

fn check_inputs(x: &FeatureMatrix, y: &[u8]) -> Result<(), GraderError> {
    if x.rows() == 0 || y.is_empty() {
        return Err(GraderError::EmptyData);
    }
    if x.rows() != y.len() {
        return Err(GraderError::Invalid(format!(
            "{} feature rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    if let Some((i, &v)) = y.iter().enumerate().find(|(_, &v)| v > 1) {
        return Err(GraderError::NonBinaryLabel { row: i, value: v });
    }
    Ok(())
}

/// Adds the summed cross-entropy gradient over `rows` into `grad_w`/`grad_b`
/// and returns the summed loss.
fn accumulate(
    head: &LinearHead,
    x: &FeatureMatrix,
    y: &[u8],
    rows: &[usize],
    grad_w: &mut [f64],
    grad_b: &mut [f64; 2],
) -> f64 {
    let d = x.dim();
    let mut loss = 0.0;
    for &i in rows {
        let xi = x.row(i);
        let z = head.logits(xi);
        let label = y[i] as usize;
        let m = z[0].max(z[1]);
        let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
        loss += lse - z[label];
        let p = softmax2(z);
        let g0 = p[0] - (label == 0) as u8 as f64;
        let g1 = p[1] - (label == 1) as u8 as f64;
        let (gw0, gw1) = grad_w.split_at_mut(d);
        for ((a, b), &v) in gw0.iter_mut().zip(gw1.iter_mut()).zip(xi) {
            *a += g0 * v;
            *b += g1 * v;
        }
        grad_b[0] += g0;
        grad_b[1] += g1;
    }
    loss
}

/// Mean cross-entropy over the whole set and its gradient with respect to
/// `(weights, bias)`.
pub fn loss_and_gradient(head: &LinearHead, x: &FeatureMatrix, y: &[u8]) -> Result<(f64, LinearHead), GraderError> {
    check_inputs(x, y)?;
    if head.dim() != x.dim() {
        return Err(GraderError::DimensionMismatch {
            expected: head.dim(),
            got: x.dim(),
        });
    }
    let rows: Vec<usize> = (0..x.rows()).collect();
    let mut grad = LinearHead::zeros(x.dim());
    let loss = accumulate(head, x, y, &rows, &mut grad.weights, &mut grad.bias);
    let n = rows.len() as f64;
    grad.weights.iter_mut().for_each(|g| *g /= n);
    grad.bias.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

/// Mini-batch gradient descent from zero parameters.
///
/// Rows are reshuffled every epoch by a generator seeded with `seed`; the
/// last batch of an epoch may be short. `lr` maps a zero-based epoch to its
/// learning rate.
pub fn fit(
    x: &FeatureMatrix,
    y: &[u8],
    epochs: usize,
    batch_size: usize,
    seed: u64,
    mut lr: impl FnMut(usize) -> f64,
) -> Result<FitOutcome, GraderError> {
    check_inputs(x, y)?;
    if batch_size == 0 {
        return Err(GraderError::Config("batch_size must be at least 1".into()));
    }
    let d = x.dim();
    let n = x.rows();
    let mut head = LinearHead::zeros(d);
    let mut grad_w = vec![0.0; 2 * d];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = PortableRng::new(seed);
    let mut loss_history = Vec::with_capacity(epochs);

    for epoch in 0..epochs {
        let rate = lr(epoch);
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(batch_size) {
            grad_w.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = [0.0; 2];
            epoch_loss += accumulate(&head, x, y, batch, &mut grad_w, &mut grad_b);
            let step = rate / batch.len() as f64;
            for (w, g) in head.weights.iter_mut().zip(&grad_w) {
                *w -= step * g;
            }
            head.bias[0] -= step * grad_b[0];
            head.bias[1] -= step * grad_b[1];
        }
        let mean = epoch_loss / n as f64;
        if !mean.is_finite() || !head.is_finite() {
            return Err(GraderError::NonFiniteLoss { epoch });
        }
        loss_history.push(mean);
    }
    Ok(FitOutcome { head, loss_history })
}

/// Trains one rubric head for exactly `total_epochs` under the warmup/decay
/// schedule. Identity fields are left for the caller to fill in.
pub fn train_rubric_model(
    x: &FeatureMatrix,
    y: &[u8],
    cfg: &TrainConfig,
    total_epochs: usize,
) -> Result<LinearRubricModel, GraderError> {
    cfg.validate()?;
    lr_at(0, total_epochs, cfg)?;
    let outcome = fit(x, y, total_epochs, cfg.batch_size, cfg.seed, |e| {
        lr_at(e, total_epochs, cfg).expect("epoch within run")
    })?;
    Ok(LinearRubricModel {
        rubric_id: RubricId::R1,
        problem_id: String::new(),
        provider_id: String::new(),
        head: outcome.head,
        trained_epochs: total_epochs,
        seed: cfg.seed,
        train_loss_final: outcome.loss_history.last().copied().unwrap_or(f64::NAN),
    })
}

/// Fraction of rows the head labels correctly.
pub fn accuracy_of(model: &LinearRubricModel, x: &FeatureMatrix, y: &[u8]) -> Result<f64, GraderError> {
    check_inputs(x, y)?;
    let mut hits = 0usize;
    for (i, &label) in y.iter().enumerate() {
        if model.predict(x.row(i))? == (label == 1) {
            hits += 1;
        }
    }
    Ok(hits as f64 / y.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricSelection {
    pub rubric_id: RubricId,
    /// `(epochs, selection accuracy)` for every grid entry, in grid order.
    pub candidates: Vec<(usize, f64)>,
    pub selected_epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub problem_id: String,
    pub rubrics: Vec<RubricSelection>,
}

/// Per-rubric seed: rubric `k` (zero-based) trains with `base + k`.
pub fn rubric_seed(base: u64, id: RubricId) -> u64 {
    base.wrapping_add(id.index() as u64)
}

/// Trains all seven rubric heads, picking each head's epoch count from the
/// grid by accuracy on `select`. Ties go to the smaller epoch count.
pub fn train_problem_grader(
    problem_id: &str,
    provider_id: &str,
    train: &LabeledSet,
    select: &LabeledSet,
    cfg: &TrainConfig,
) -> Result<(ProblemGrader, SelectionReport), GraderError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(GraderError::EmptySplit("train"));
    }
    if select.is_empty() {
        return Err(GraderError::EmptySplit("selection"));
    }
    let mut models = Vec::with_capacity(RubricId::ALL.len());
    let mut rubrics = Vec::with_capacity(RubricId::ALL.len());
    for id in RubricId::ALL {
        let y_train = train.rubric_labels(id);
        let y_select = select.rubric_labels(id);
        let rubric_cfg = TrainConfig {
            seed: rubric_seed(cfg.seed, id),
            ..cfg.clone()
        };
        let mut best: Option<(f64, LinearRubricModel)> = None;
        let mut candidates = Vec::with_capacity(cfg.epochs_grid.len());
        for &epochs in &cfg.epochs_grid {
            let model = train_rubric_model(&train.x, &y_train, &rubric_cfg, epochs)?;
            let acc = accuracy_of(&model, &select.x, &y_select)?;
            candidates.push((epochs, acc));
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, model));
            }
        }
        let (_, mut model) = best.expect("grid is non-empty");
        model.rubric_id = id;
        model.problem_id = problem_id.to_string();
        model.provider_id = provider_id.to_string();
        tracing::debug!(problem_id, rubric = %id, epochs = model.trained_epochs, "selected");
        rubrics.push(RubricSelection {
            rubric_id: id,
            candidates,
            selected_epochs: model.trained_epochs,
        });
        models.push(model);
    }
    let grader = ProblemGrader::new(models)?;
    Ok((
        grader,
        SelectionReport {
            problem_id: problem_id.to_string(),
            rubrics,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (FeatureMatrix, Vec<u8>) {
        let mut rng = PortableRng::new(3);
        let mut x = FeatureMatrix::new(4);
        let mut y = Vec::new();
        for _ in 0..60 {
            let row: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
            y.push((row[0] - 0.5 * row[2] > 0.0) as u8);
            x.push(&row).unwrap();
        }
        (x, y)
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let (x, y) = toy();
        let mut rng = PortableRng::new(11);
        let mut head = LinearHead::zeros(4);
        head.weights.iter_mut().for_each(|w| *w = 0.3 * rng.normal());
        head.bias = [0.1, -0.2];
        let (_, grad) = loss_and_gradient(&head, &x, &y).unwrap();
        let h = 1e-6;
        let mut params: Vec<f64> = head.weights.iter().chain(&head.bias).copied().collect();
        let analytic: Vec<f64> = grad.weights.iter().chain(&grad.bias).copied().collect();
        for k in 0..params.len() {
            let orig = params[k];
            let loss_at = |p: &[f64]| {
                let h = LinearHead {
                    weights: p[..8].to_vec(),
                    bias: [p[8], p[9]],
                };
                loss_and_gradient(&h, &x, &y).unwrap().0
            };
            params[k] = orig + h;
            let up = loss_at(&params);
            params[k] = orig - h;
            let down = loss_at(&params);
            params[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (numeric - analytic[k]).abs() / numeric.abs().max(analytic[k].abs()).max(1e-8);
            assert!(rel < 1e-6, "param {k}: numeric {numeric} analytic {}", analytic[k]);
        }
    }

    #[test]
    fn zero_parameters_give_ln2_loss() {
        let (x, y) = toy();
        let (loss, _) = loss_and_gradient(&LinearHead::zeros(4), &x, &y).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn single_batch_is_plain_gradient_descent() {
        let (x, y) = toy();
        let lr = 0.5;
        let out = fit(&x, &y, 2, 1000, 7, |_| lr).unwrap();
        let mut head = LinearHead::zeros(4);
        for _ in 0..2 {
            let (_, g) = loss_and_gradient(&head, &x, &y).unwrap();
            for (w, gw) in head.weights.iter_mut().zip(&g.weights) {
                *w -= lr * gw;
            }
            head.bias[0] -= lr * g.bias[0];
            head.bias[1] -= lr * g.bias[1];
        }
        for (a, b) in out.head.weights.iter().zip(&head.weights) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_decreases_on_separable_data() {
        let (x, y) = toy();
        let out = fit(&x, &y, 300, 16, 1, |_| 0.5).unwrap();
        let hist = &out.loss_history;
        assert!(hist[hist.len() - 1] < hist[0] * 0.5);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let (x, y) = toy();
        let cfg = TrainConfig {
            seed: 5,
            ..Default::default()
        };
        let a = train_rubric_model(&x, &y, &cfg, 100).unwrap();
        let b = train_rubric_model(&x, &y, &cfg, 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (x, mut y) = toy();
        assert!(matches!(
            fit(&x, &y[..10], 1, 4, 0, |_| 0.1),
            Err(GraderError::Invalid(_))
        ));
        y[3] = 2;
        assert!(matches!(
            fit(&x, &y, 1, 4, 0, |_| 0.1),
            Err(GraderError::NonBinaryLabel { row: 3, value: 2 })
        ));
        assert!(matches!(
            fit(&FeatureMatrix::new(4), &[], 1, 4, 0, |_| 0.1),
            Err(GraderError::EmptyData)
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let (x, y) = toy();
        let err = fit(&x, &y, 50, 4, 0, |_| f64::INFINITY).unwrap_err();
        assert!(matches!(err, GraderError::NonFiniteLoss { epoch: 0 }));
    }

    #[test]
    fn selection_prefers_fewest_epochs_on_ties() {
        let (x, y) = toy();
        let labels: Vec<RubricVector> = y.iter().map(|&v| RubricVector::new([v == 1; 7])).collect();
        let set = LabeledSet { x, labels };
        let cfg = TrainConfig {
            epochs_grid: vec![20, 40, 60],
            peak_lr: 0.5,
            batch_size: 8,
            ..Default::default()
        };
        let (grader, report) = train_problem_grader("P1", "t", &set, &set, &cfg).unwrap();
        for (sel, model) in report.rubrics.iter().zip(grader.models()) {
            let best = sel.candidates.iter().map(|c| c.1).fold(f64::MIN, f64::max);
            let first_best = sel.candidates.iter().find(|c| c.1 == best).unwrap().0;
            assert_eq!(sel.selected_epochs, first_best);
            assert_eq!(model.trained_epochs, first_best);
        }
        assert_eq!(grader.model(RubricId::R4).seed, 3);
    }
}
