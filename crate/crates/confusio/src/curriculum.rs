//! Confidence-binned curriculum training: score augmented samples with a
//! clean-trained model, partition them by confidence and correctness, and
//! train a fresh model with the easy bins introduced first.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{CaseDocument, DatasetSplit, Judgment};
use crate::model::{train, Model, ModelError, TrainConfig, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum CurriculumError {
    #[error("threshold {0} outside (0.5, 1]")]
    BadThreshold(f64),
    #[error("clean dataset is empty")]
    EmptyClean,
    #[error("augmented dataset is empty")]
    EmptyAugmented,
    #[error("no confidence records to partition")]
    NoRecords,
    #[error("augmented document {0} lacks a pseudo-label")]
    MissingPseudoLabel(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One scored augmented document.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceRecord {
    pub doc_id: String,
    pub predicted: Judgment,
    pub pseudo: Judgment,
    /// Max of the binary softmax; always in [0.5, 1].
    pub probability: f64,
    pub correct: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinId {
    B1,
    B2,
    B3,
}

impl BinId {
    pub fn label(self) -> &'static str {
        match self {
            BinId::B1 => "b1",
            BinId::B2 => "b2",
            BinId::B3 => "b3",
        }
    }
}

/// Disjoint, covering split of the augmented set by doc id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BinPartition {
    pub b1: BTreeSet<String>,
    pub b2: BTreeSet<String>,
    pub b3: BTreeSet<String>,
}

impl BinPartition {
    pub fn bin(&self, id: BinId) -> &BTreeSet<String> {
        match id {
            BinId::B1 => &self.b1,
            BinId::B2 => &self.b2,
            BinId::B3 => &self.b3,
        }
    }

    pub fn bin_of(&self, doc_id: &str) -> Option<BinId> {
        if self.b1.contains(doc_id) {
            Some(BinId::B1)
        } else if self.b2.contains(doc_id) {
            Some(BinId::B2)
        } else if self.b3.contains(doc_id) {
            Some(BinId::B3)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurriculumConfig {
    /// Confidence threshold separating b1 from b2 (inclusive at the top).
    pub threshold: f64,
    /// Bins introduced as training data, in stage order.
    pub bins_used: Vec<BinId>,
    pub epochs_per_stage: usize,
    pub seed: u64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            threshold: 0.99,
            bins_used: vec![BinId::B1, BinId::B2],
            epochs_per_stage: 3,
            seed: 0,
        }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<(), CurriculumError> {
        if !(self.threshold > 0.5 && self.threshold <= 1.0) {
            return Err(CurriculumError::BadThreshold(self.threshold));
        }
        Ok(())
    }
}

/// Score every augmented document with a clean-trained model.
pub fn score_confidence(
    m_init: &Model,
    augmented: &[CaseDocument],
) -> Result<Vec<ConfidenceRecord>, CurriculumError> {
    let mut records = Vec::with_capacity(augmented.len());
    for doc in augmented {
        let pseudo = doc
            .judgment
            .ok_or_else(|| CurriculumError::MissingPseudoLabel(doc.id.clone()))?;
        let inference = m_init.infer(doc)?;
        let probability = inference.probs[0].max(inference.probs[1]);
        records.push(ConfidenceRecord {
            doc_id: doc.id.clone(),
            predicted: inference.predicted,
            pseudo,
            probability,
            correct: inference.predicted == pseudo,
        });
    }
    Ok(records)
}

/// b1 = correct with p ≥ threshold, b2 = remaining correct, b3 = the rest.
pub fn partition_bins(
    records: &[ConfidenceRecord],
    cfg: &CurriculumConfig,
) -> Result<BinPartition, CurriculumError> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(CurriculumError::NoRecords);
    }
    let mut partition = BinPartition::default();
    for r in records {
        let target = if r.correct && r.probability >= cfg.threshold {
            &mut partition.b1
        } else if r.correct {
            &mut partition.b2
        } else {
            &mut partition.b3
        };
        target.insert(r.doc_id.clone());
    }
    Ok(partition)
}

/// One stage of the schedule, recorded for auditability.
#[derive(Clone, Debug)]
pub struct StageRecord {
    pub stage: usize,
    pub description: String,
    /// Doc ids newly introduced at this stage.
    pub introduced: Vec<String>,
    pub outcome: TrainOutcome,
}

#[derive(Debug)]
pub struct CurriculumOutcome {
    pub model: Model,
    pub records: Vec<ConfidenceRecord>,
    pub partition: BinPartition,
    pub stages: Vec<StageRecord>,
}

/// The full schedule: train M_init on clean data, score and bin the
/// augmented set, train a fresh model with the selected bins introduced
/// stage by stage mixed with clean data, then fine-tune on clean only (at
/// half the learning rate). Every stage is seed-deterministic.
pub fn run_curriculum(
    clean: &DatasetSplit,
    augmented: &[CaseDocument],
    cfg: &CurriculumConfig,
    train_cfg: &TrainConfig,
    model_factory: impl Fn(u64) -> Result<Model, ModelError>,
) -> Result<CurriculumOutcome, CurriculumError> {
    cfg.validate()?;
    if clean.train.is_empty() {
        return Err(CurriculumError::EmptyClean);
    }
    if augmented.is_empty() {
        return Err(CurriculumError::EmptyAugmented);
    }

    let stage_cfg = |seed_offset: u64, epochs: usize, lr: f64| TrainConfig {
        epochs,
        seed: train_cfg.seed.wrapping_add(seed_offset),
        learning_rate: lr,
        ..train_cfg.clone()
    };

    // Stage 0: M_init on clean data only.
    let mut m_init = model_factory(cfg.seed)?;
    train(
        &mut m_init,
        clean,
        &stage_cfg(0, cfg.epochs_per_stage, train_cfg.learning_rate),
    )?;

    let records = score_confidence(&m_init, augmented)?;
    let partition = partition_bins(&records, cfg)?;

    // Fresh, untrained model with the same architecture.
    let mut model = model_factory(cfg.seed.wrapping_add(1))?;
    let mut stages = Vec::new();
    let mut working = clean.clone();
    let selected: usize = cfg.bins_used.iter().map(|&b| partition.bin(b).len()).sum();
    if cfg.bins_used.is_empty() || selected == 0 {
        log::warn!("curriculum: selected bins are empty; training on clean data only");
        let outcome = train(
            &mut model,
            clean,
            &stage_cfg(1, cfg.epochs_per_stage, train_cfg.learning_rate),
        )?;
        stages.push(StageRecord {
            stage: 1,
            description: "clean only (empty bin fallback)".to_string(),
            introduced: vec![],
            outcome,
        });
        return Ok(CurriculumOutcome {
            model,
            records,
            partition,
            stages,
        });
    }

    // Bin stages: each introduces one bin's documents on top of the data
    // already in play; samples are interleaved by the per-epoch shuffle.
    for (i, &bin) in cfg.bins_used.iter().enumerate() {
        let introduced: Vec<String> = augmented
            .iter()
            .filter(|d| partition.bin(bin).contains(&d.id))
            .map(|d| d.id.clone())
            .collect();
        working.train.extend(
            augmented
                .iter()
                .filter(|d| partition.bin(bin).contains(&d.id))
                .cloned(),
        );
        let outcome = train(
            &mut model,
            &working,
            &stage_cfg(1 + i as u64, cfg.epochs_per_stage, train_cfg.learning_rate),
        )?;
        stages.push(StageRecord {
            stage: i + 1,
            description: format!("clean + {}", bin.label()),
            introduced,
            outcome,
        });
    }

    // Final stage: clean-only fine-tune at half the learning rate.
    let final_stage = stages.len() + 1;
    let outcome = train(
        &mut model,
        clean,
        &stage_cfg(
            1 + cfg.bins_used.len() as u64,
            cfg.epochs_per_stage,
            train_cfg.learning_rate / 2.0,
        ),
    )?;
    stages.push(StageRecord {
        stage: final_stage,
        description: "clean fine-tune".to_string(),
        introduced: vec![],
        outcome,
    });

    Ok(CurriculumOutcome {
        model,
        records,
        partition,
        stages,
    })
}

/// Bin assignment audit: one line per augmented document —
/// `id<TAB>probability<TAB>correct<TAB>bin`.
pub fn write_bin_audit(
    path: &Path,
    records: &[ConfidenceRecord],
    partition: &BinPartition,
) -> Result<(), CurriculumError> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        let bin = partition
            .bin_of(&r.doc_id)
            .map(BinId::label)
            .unwrap_or("unassigned");
        writeln!(w, "{}\t{:.6}\t{}\t{}", r.doc_id, r.probability, r.correct, bin)?;
    }
    w.flush()?;
    Ok(())
}
