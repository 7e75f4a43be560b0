//! Minibatch training loop, accuracy evaluation and cross-validated grid
//! search.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    adam_step, backward, clip_gradients, loss_nll, AdamParams, AdamState, DropoutMasks,
    LstmModel, ModelDims,
};
use crate::types::{GestureLabel, GESTURE_CLASSES};
use crate::{Error, Result};

/// Training hyperparameters. The defaults are the reference configuration:
/// two layers of 200 units, learning rate 0.001, batch 50, dropout 0.5,
/// init range 0.08, gradient-norm cap 25 and 600 iterations, where one
/// iteration is one minibatch step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden: usize,
    pub layers: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Drop probability for the non-recurrent connections.
    pub dropout: f64,
    pub init_range: f64,
    pub max_grad_norm: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Disables the +1 forget-gate bias so initialization follows the
    /// uniform range exactly.
    pub strict_init: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 200,
            layers: 2,
            learning_rate: 0.001,
            batch_size: 50,
            dropout: 0.5,
            init_range: 0.08,
            max_grad_norm: 25.0,
            iterations: 600,
            seed: 0,
            strict_init: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.layers == 0 || self.batch_size == 0 || self.iterations == 0 {
            return Err(Error::InvalidParam(
                "hidden, layers, batch_size and iterations must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !(self.init_range > 0.0) || !(self.max_grad_norm > 0.0)
        {
            return Err(Error::InvalidParam(
                "learning_rate, init_range and max_grad_norm must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParam(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }

    pub fn dims(&self, tau: usize) -> ModelDims {
        ModelDims { tau, hidden: self.hidden, layers: self.layers, classes: GESTURE_CLASSES }
    }
}

/// Preprocessed training data: one standardized feature row per window plus
/// its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    features: Array2<f64>,
    labels: Vec<usize>,
}

impl TrainingSet {
    pub fn new(features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Shape {
                expected: format!("{} labels", features.nrows()),
                got: format!("{}", labels.len()),
            });
        }
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::Data("empty training set".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= GESTURE_CLASSES) {
            return Err(Error::Data(format!("label {bad} out of range")));
        }
        Ok(Self { features, labels })
    }

    /// Builds a set from per-window feature rows and gesture labels
    /// (Noise labels are rejected: the classifier head has no Noise class).
    pub fn from_rows(rows: &[Vec<f64>], labels: &[GestureLabel]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Shape {
                expected: format!("{} labels", rows.len()),
                got: format!("{}", labels.len()),
            });
        }
        let class_labels: Vec<usize> = labels
            .iter()
            .map(|l| {
                l.class_index()
                    .ok_or_else(|| Error::Data("Noise windows cannot train the classifier".into()))
            })
            .collect::<Result<_>>()?;
        let width = rows.first().map(|r| r.len()).unwrap_or(0);
        if width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::Shape {
                expected: format!("{width} features per row"),
                got: "ragged or empty rows".into(),
            });
        }
        let mut features = Array2::zeros((rows.len(), width));
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                features[[i, j]] = v;
            }
        }
        Self::new(features, class_labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn tau(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Row subset in the given index order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let features = self.features.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(features, labels)
    }
}

/// Output of [`train`]: the final model plus per-iteration diagnostics.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: LstmModel,
    /// Mean minibatch NLL per iteration.
    pub loss_history: Vec<f64>,
    /// Pre-clip global gradient norm per iteration.
    pub grad_norms: Vec<f64>,
}

/// Trains a model: `iterations` minibatch ADAM steps over per-epoch shuffled
/// batches, with dropout and gradient clipping active. Deterministic under
/// `cfg.seed`.
pub fn train(data: &TrainingSet, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Data("cannot train on an empty dataset".into()));
    }
    let dims = cfg.dims(data.tau());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = LstmModel::init(dims, cfg.init_range, !cfg.strict_init, &mut rng)?;
    let mut state = AdamState::new(model.params());
    let adam = AdamParams::default();

    let batch_size = cfg.batch_size.min(data.len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len(); // force an initial shuffle
    let mut loss_history = Vec::with_capacity(cfg.iterations);
    let mut grad_norms = Vec::with_capacity(cfg.iterations);

    for _ in 0..cfg.iterations {
        if cursor + batch_size > order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let batch_idx = &order[cursor..cursor + batch_size];
        cursor += batch_size;

        let inputs = data.features.select(Axis(0), batch_idx);
        let labels: Vec<usize> = batch_idx.iter().map(|&i| data.labels[i]).collect();

        let masks = if cfg.dropout > 0.0 {
            Some(DropoutMasks::sample(&dims, batch_size, cfg.dropout, &mut rng)?)
        } else {
            None
        };
        let (logits, cache) = model.forward_batch(inputs.view(), masks.as_ref())?;
        loss_history.push(loss_nll(&logits.view(), &labels)?);
        let mut grads = backward(&model, &cache, &labels)?;
        grad_norms.push(clip_gradients(&mut grads, cfg.max_grad_norm)?);
        adam_step(model.params_mut(), &grads, &mut state, cfg.learning_rate, &adam);
    }

    Ok(TrainResult { model, loss_history, grad_norms })
}

/// Percentage of correctly classified rows (argmax over the logits).
pub fn evaluate_accuracy(model: &LstmModel, data: &TrainingSet) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty set".into()));
    }
    let logits = model.infer_batch(data.features.view())?;
    let mut correct = 0usize;
    for (row, &label) in logits.axis_iter(Axis(0)).zip(data.labels.iter()) {
        let mut best = 0usize;
        for k in 1..row.len() {
            if row[k] > row[best] {
                best = k;
            }
        }
        if best == label {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / data.len() as f64)
}

/// Stratified k-fold assignment: per-class shuffle, then round-robin deal.
/// Errors if any fold would miss a class.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidParam(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment: Vec<Vec<usize>> = vec![Vec::new(); folds];
    let classes: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    for class in classes {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        if members.len() < folds {
            return Err(Error::Data(format!(
                "class {class} has {} member(s); {folds}-fold CV would leave a fold without it",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (k, idx) in members.into_iter().enumerate() {
            assignment[k % folds].push(idx);
        }
    }
    for fold in &mut assignment {
        fold.sort_unstable();
    }
    Ok(assignment)
}

/// Cross-validation outcome for one candidate configuration.
#[derive(Debug, Clone)]
pub struct CvScore {
    pub config: TrainConfig,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub param_count: usize,
}

/// All candidate scores plus the index of the winner.
#[derive(Debug, Clone)]
pub struct CvReport {
    pub scores: Vec<CvScore>,
    pub best: usize,
}

impl CvReport {
    pub fn best_score(&self) -> &CvScore {
        &self.scores[self.best]
    }
}

/// Evaluates every candidate with stratified k-fold cross validation and
/// returns the argmax by mean accuracy, ties resolved toward the model with
/// fewer parameters.
pub fn grid_search_cv(
    data: &TrainingSet,
    grid: &[TrainConfig],
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::InvalidParam("empty parameter grid".into()));
    }
    let fold_indices = stratified_folds(data.labels(), folds, seed)?;
    let mut scores = Vec::with_capacity(grid.len());
    for cfg in grid {
        cfg.validate()?;
        let mut fold_accuracies = Vec::with_capacity(folds);
        for held_out in 0..folds {
            let mut train_idx = Vec::new();
            for (k, fold) in fold_indices.iter().enumerate() {
                if k != held_out {
                    train_idx.extend_from_slice(fold);
                }
            }
            let train_set = data.subset(&train_idx)?;
            let val_set = data.subset(&fold_indices[held_out])?;
            let result = train(&train_set, cfg)?;
            fold_accuracies.push(evaluate_accuracy(&result.model, &val_set)?);
        }
        let mean = fold_accuracies.iter().sum::<f64>() / folds as f64;
        let var = fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / folds as f64;
        scores.push(CvScore {
            config: cfg.clone(),
            mean_accuracy: mean,
            std_accuracy: var.sqrt(),
            fold_accuracies,
            param_count: cfg.dims(data.tau()).param_count(),
        });
    }
    let mut best = 0usize;
    for k in 1..scores.len() {
        let better = scores[k].mean_accuracy > scores[best].mean_accuracy
            || (scores[k].mean_accuracy == scores[best].mean_accuracy
                && scores[k].param_count < scores[best].param_count);
        if better {
            best = k;
        }
    }
    Ok(CvReport { scores, best })
}
