//! Classification, regression, and calibration metrics: macro F1, MAE/MSE,
//! and Expected Calibration Error with reliability tables.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("prediction/gold length mismatch: {preds} vs {golds}")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("empty input")]
    Empty,
    #[error("confidence {0} outside [0, 1]")]
    BadConfidence(f64),
    #[error("bin count must be >= 1")]
    BadBinCount,
}

/// One scored binary prediction; `confidence` is the max softmax probability
/// of the predicted label.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub gold: u8,
    pub predicted: u8,
    pub confidence: f64,
}

/// Unweighted mean of per-class F1 over both binary classes. A class absent
/// from both predictions and golds contributes F1 = 0 with a warning.
pub fn macro_f1(preds: &[u8], golds: &[u8]) -> Result<f64, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut total = 0.0;
    for class in [0u8, 1u8] {
        let tp = preds
            .iter()
            .zip(golds)
            .filter(|&(&p, &g)| p == class && g == class)
            .count() as f64;
        let fp = preds
            .iter()
            .zip(golds)
            .filter(|&(&p, &g)| p == class && g != class)
            .count() as f64;
        let fn_ = preds
            .iter()
            .zip(golds)
            .filter(|&(&p, &g)| p != class && g == class)
            .count() as f64;
        if tp + fp + fn_ == 0.0 {
            log::warn!("class {} absent from predictions and golds; F1 = 0", class);
            continue;
        }
        let f1 = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
        total += f1;
    }
    Ok(total / 2.0)
}

/// Element-wise mean absolute and mean squared error over 5-vector batches.
pub fn mae_mse(preds: &[[f64; 5]], golds: &[[f64; 5]]) -> Result<(f64, f64), EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = (preds.len() * 5) as f64;
    let mut abs = 0.0;
    let mut sq = 0.0;
    for (p, g) in preds.iter().zip(golds) {
        for (a, b) in p.iter().zip(g) {
            let d = a - b;
            abs += d.abs();
            sq += d * d;
        }
    }
    Ok((abs / n, sq / n))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub bin: usize,
    pub count: usize,
    pub accuracy: f64,
    pub confidence: f64,
}

/// M bins over (0, 1] with intervals I_m = ((m-1)/M, m/M].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReliabilityTable {
    pub bins: Vec<ReliabilityBin>,
}

/// Bin index for a confidence value; the boundary p = m/M lands in bin m and
/// p = 0 is assigned to the first bin rather than dropped.
fn bin_index(p: f64, m: usize) -> usize {
    if p <= 0.0 {
        return 0;
    }
    let idx = (p * m as f64).ceil() as usize;
    idx.clamp(1, m) - 1
}

/// Expected Calibration Error with its reliability table. Empty bins
/// contribute zero. Reports default to 5 bins.
pub fn ece(records: &[PredictionRecord], m: usize) -> Result<(f64, ReliabilityTable), EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    if m == 0 {
        return Err(EvalError::BadBinCount);
    }
    for r in records {
        if !(0.0..=1.0).contains(&r.confidence) {
            return Err(EvalError::BadConfidence(r.confidence));
        }
    }
    let mut counts = vec![0usize; m];
    let mut correct = vec![0usize; m];
    let mut conf_sum = vec![0.0f64; m];
    for r in records {
        let b = bin_index(r.confidence, m);
        counts[b] += 1;
        if r.predicted == r.gold {
            correct[b] += 1;
        }
        conf_sum[b] += r.confidence;
    }
    let n = records.len() as f64;
    let mut total = 0.0;
    let mut bins = Vec::with_capacity(m);
    for b in 0..m {
        let (acc, conf) = if counts[b] == 0 {
            (0.0, 0.0)
        } else {
            (
                correct[b] as f64 / counts[b] as f64,
                conf_sum[b] / counts[b] as f64,
            )
        };
        if counts[b] > 0 {
            total += (counts[b] as f64 / n) * (acc - conf).abs();
        }
        bins.push(ReliabilityBin {
            bin: b + 1,
            count: counts[b],
            accuracy: acc,
            confidence: conf,
        });
    }
    Ok((total, ReliabilityTable { bins }))
}

/// Mean and sample standard deviation over per-seed metric values, matching
/// the usual "mean ± standard deviation" presentation.
pub fn mean_stddev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
