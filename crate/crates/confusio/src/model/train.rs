//! Mini-batch training: cross-entropy for the judgment, smooth L1 for the
//! intermediate scores, best-checkpoint selection on the validation split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Model, ModelError};
use crate::autodiff::{AdamConfig, NodeId, Tape, Tensor};
use crate::corpus::{CaseDocument, DatasetSplit};
use crate::eval::{macro_f1, mae_mse};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectBy {
    /// Higher validation macro F1 wins (classification).
    MacroF1,
    /// Lower validation MAE wins (regression).
    Mae,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub smooth_l1_beta: f64,
    pub seed: u64,
    pub select_by: SelectBy,
}

impl TrainConfig {
    pub fn new(epochs: usize, seed: u64) -> Self {
        Self {
            epochs,
            batch_size: 8,
            learning_rate: 1e-3,
            smooth_l1_beta: 1.0,
            seed,
            select_by: SelectBy::MacroF1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_score: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub trace: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_score: f64,
}

/// −(1/m) Σ log softmax(logits)ᵢ[yᵢ] over a [m,2] logits matrix.
pub fn cross_entropy_loss(
    tape: &mut Tape,
    logits: NodeId,
    targets: &[u8],
) -> Result<NodeId, ModelError> {
    let m = tape.value(logits).rows();
    if m == 0 || targets.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    if targets.len() != m {
        return Err(ModelError::BadConfig(format!(
            "{} logit rows vs {} targets",
            m,
            targets.len()
        )));
    }
    let probs = tape.softmax(logits);
    let indices: Vec<usize> = targets.iter().map(|&t| t as usize).collect();
    let picked = tape.pick(probs, &indices)?;
    let logs = tape.ln(picked);
    let mean = tape.mean(logs);
    Ok(tape.scale(mean, -1.0))
}

/// Mode-appropriate loss for one batch: cross-entropy on judgments plus,
/// when the architecture predicts scores and gold scores exist, smooth L1.
/// In end-to-end mode the two terms touch disjoint parameters.
fn batch_loss(
    model: &Model,
    tape: &mut Tape,
    binding: &crate::autodiff::Binding,
    docs: &[&CaseDocument],
    beta: f64,
) -> Result<NodeId, ModelError> {
    if docs.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mut logit_rows = Vec::with_capacity(docs.len());
    let mut targets = Vec::with_capacity(docs.len());
    let mut score_rows = Vec::new();
    let mut score_targets: Vec<f64> = Vec::new();
    for doc in docs {
        let judgment = doc
            .judgment
            .ok_or_else(|| ModelError::MissingLabel(doc.id.clone()))?;
        let out = model.build_forward(tape, binding, doc, model.config.mode)?;
        logit_rows.push(out.logits);
        targets.push(judgment.as_u8());
        if let (Some(node), Some(factors)) = (out.scores, &doc.factors) {
            score_rows.push(node);
            score_targets.extend_from_slice(&factors.as_array());
        }
    }
    let logits = tape.concat_rows(&logit_rows)?;
    let mut loss = cross_entropy_loss(tape, logits, &targets)?;
    if !score_rows.is_empty() {
        let preds = tape.concat_rows(&score_rows)?;
        let target = Tensor::matrix(score_rows.len(), 5, score_targets)?;
        let reg = tape.smooth_l1(preds, &target, beta)?;
        loss = tape.add(loss, reg)?;
    }
    Ok(loss)
}

/// Validation score under the configured selection metric.
pub fn validation_score(
    model: &Model,
    docs: &[CaseDocument],
    select_by: SelectBy,
) -> Result<f64, ModelError> {
    match select_by {
        SelectBy::MacroF1 => {
            let mut preds = Vec::with_capacity(docs.len());
            let mut golds = Vec::with_capacity(docs.len());
            for doc in docs {
                let gold = doc
                    .judgment
                    .ok_or_else(|| ModelError::MissingLabel(doc.id.clone()))?;
                preds.push(model.infer(doc)?.predicted.as_u8());
                golds.push(gold.as_u8());
            }
            macro_f1(&preds, &golds).map_err(|e| ModelError::BadConfig(e.to_string()))
        }
        SelectBy::Mae => {
            let mut preds = Vec::with_capacity(docs.len());
            let mut golds = Vec::with_capacity(docs.len());
            for doc in docs {
                let factors = doc
                    .factors
                    .ok_or_else(|| ModelError::MissingLabel(doc.id.clone()))?;
                preds.push(model.predict_intermediate(doc)?);
                golds.push(factors.as_array());
            }
            let (mae, _) = mae_mse(&preds, &golds).map_err(|e| ModelError::BadConfig(e.to_string()))?;
            Ok(mae)
        }
    }
}

// Ties go to the later epoch: on plateaus (e.g. validation F1 saturating at
// 1.0 early) the most-trained, most-confident parameters win.
fn improves(candidate: f64, best: f64, select_by: SelectBy) -> bool {
    match select_by {
        SelectBy::MacroF1 => candidate >= best,
        SelectBy::Mae => candidate <= best,
    }
}

/// Seeded mini-batch Adam training. Retains the parameters of the epoch with
/// the best validation score (falling back to the training set when the
/// validation split is empty) and restores them on return.
pub fn train(
    model: &mut Model,
    split: &DatasetSplit,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    if split.train.is_empty() {
        return Err(ModelError::EmptySplit);
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(ModelError::BadConfig(
            "epochs and batch_size must be positive".into(),
        ));
    }
    let val_docs: &[CaseDocument] = if split.validation.is_empty() {
        &split.train
    } else {
        &split.validation
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut best_snapshot = model.params.export();
    let mut best_val = match cfg.select_by {
        SelectBy::MacroF1 => f64::NEG_INFINITY,
        SelectBy::Mae => f64::INFINITY,
    };
    let mut best_epoch = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let docs: Vec<&CaseDocument> = chunk.iter().map(|&i| &split.train[i]).collect();
            let mut tape = Tape::new();
            let binding = model.params.bind(&mut tape);
            let loss = batch_loss(model, &mut tape, &binding, &docs, cfg.smooth_l1_beta)?;
            let grads = tape.backward(loss)?;
            model.params.accumulate(&tape, &grads, &binding);
            model.params.adam_step(cfg.learning_rate, AdamConfig::default());
            model.params.zero_grads();
            epoch_loss += tape.value(loss).scalar_value();
            batches += 1;
        }
        let val_score = validation_score(model, val_docs, cfg.select_by)?;
        trace.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / batches as f64,
            val_score,
        });
        if improves(val_score, best_val, cfg.select_by) {
            best_val = val_score;
            best_epoch = epoch;
            best_snapshot = model.params.export();
        }
    }
    model.params.import(best_snapshot)?;
    Ok(TrainOutcome {
        trace,
        best_epoch,
        best_val_score: best_val,
    })
}
