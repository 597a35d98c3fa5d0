//! Data model, dataset I/O, deterministic splitting, and a synthetic corpus
//! generator. Documents are one JSON record per line; field names are part of
//! the wire contract and must not change.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rules::{evaluate_rules, Outcome, RuleSet};

/// Per-feature sentence cap enforced by document validation.
pub const DEFAULT_SENTENCE_CAP: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}:{line}: malformed record: {msg}")]
    MalformedRecord {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("factor {factor} out of range: {value} (allowed [{min}, {max}])")]
    ScoreOutOfRange {
        factor: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("sentence text is empty after trimming")]
    EmptySentence,
    #[error("document {id}: more than {cap} sentences tagged {feature}")]
    SentenceCapExceeded {
        id: String,
        feature: FeatureKind,
        cap: usize,
    },
    #[error("document {id} is tagged clean but lacks factors or judgment")]
    IncompleteCleanDocument { id: String },
    #[error("record source '{found}' does not match expected '{expected}'")]
    SourceMismatch { expected: Source, found: Source },
    #[error("duplicate document id '{0}'")]
    DuplicateId(String),
    #[error("split counts sum to {requested} but only {available} documents are available")]
    SplitTooLarge { requested: usize, available: usize },
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The five factor tags, fixed to indices X1..X5.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    #[serde(rename = "goods")]
    GoodsServices,
    Visual,
    Phonetic,
    Conceptual,
    Attention,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [
        FeatureKind::GoodsServices,
        FeatureKind::Visual,
        FeatureKind::Phonetic,
        FeatureKind::Conceptual,
        FeatureKind::Attention,
    ];

    /// 1-based index X1..X5.
    pub fn index(self) -> usize {
        match self {
            FeatureKind::GoodsServices => 1,
            FeatureKind::Visual => 2,
            FeatureKind::Phonetic => 3,
            FeatureKind::Conceptual => 4,
            FeatureKind::Attention => 5,
        }
    }

    pub fn wire_name(self) -> &'static str {
        match self {
            FeatureKind::GoodsServices => "goods",
            FeatureKind::Visual => "visual",
            FeatureKind::Phonetic => "phonetic",
            FeatureKind::Conceptual => "conceptual",
            FeatureKind::Attention => "attention",
        }
    }

    /// Allowed score range; phonetic and conceptual admit 0 ("neutral").
    pub fn score_range(self) -> (f64, f64) {
        match self {
            FeatureKind::Phonetic | FeatureKind::Conceptual => (0.0, 5.0),
            _ => (1.0, 5.0),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.wire_name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sentence {
    pub feature: FeatureKind,
    pub text: String,
}

impl Sentence {
    pub fn new(feature: FeatureKind, text: impl Into<String>) -> Result<Self, CorpusError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(CorpusError::EmptySentence);
        }
        Ok(Self { feature, text })
    }
}

/// Five factor scores on the annotation scale; half points are permitted.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorScores {
    pub goods: f64,
    pub visual: f64,
    pub phonetic: f64,
    pub conceptual: f64,
    pub attention: f64,
}

impl FactorScores {
    pub fn new(
        goods: f64,
        visual: f64,
        phonetic: f64,
        conceptual: f64,
        attention: f64,
    ) -> Result<Self, CorpusError> {
        let s = Self {
            goods,
            visual,
            phonetic,
            conceptual,
            attention,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        for kind in FeatureKind::ALL {
            let value = self.get(kind);
            let (min, max) = kind.score_range();
            if !value.is_finite() || value < min || value > max {
                return Err(CorpusError::ScoreOutOfRange {
                    factor: kind.wire_name(),
                    value,
                    min,
                    max,
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, kind: FeatureKind) -> f64 {
        match kind {
            FeatureKind::GoodsServices => self.goods,
            FeatureKind::Visual => self.visual,
            FeatureKind::Phonetic => self.phonetic,
            FeatureKind::Conceptual => self.conceptual,
            FeatureKind::Attention => self.attention,
        }
    }

    pub fn set(&mut self, kind: FeatureKind, value: f64) {
        match kind {
            FeatureKind::GoodsServices => self.goods = value,
            FeatureKind::Visual => self.visual = value,
            FeatureKind::Phonetic => self.phonetic = value,
            FeatureKind::Conceptual => self.conceptual = value,
            FeatureKind::Attention => self.attention = value,
        }
    }

    /// Scores in X1..X5 order.
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.goods,
            self.visual,
            self.phonetic,
            self.conceptual,
            self.attention,
        ]
    }
}

/// Final outcome: 1 for confusion, 0 for no confusion.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Judgment {
    NoConfusion,
    Confusion,
}

impl Judgment {
    pub fn as_u8(self) -> u8 {
        match self {
            Judgment::NoConfusion => 0,
            Judgment::Confusion => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Judgment::NoConfusion),
            1 => Some(Judgment::Confusion),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Judgment::NoConfusion => Judgment::Confusion,
            Judgment::Confusion => Judgment::NoConfusion,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Clean,
    Augmented,
    Synthetic,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Source::Clean => "clean",
            Source::Augmented => "augmented",
            Source::Synthetic => "synthetic",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseDocument {
    pub id: String,
    pub sentences: Vec<Sentence>,
    pub factors: Option<FactorScores>,
    pub judgment: Option<Judgment>,
    pub source: Source,
}

impl CaseDocument {
    pub fn validate(&self) -> Result<(), CorpusError> {
        self.validate_with_cap(DEFAULT_SENTENCE_CAP)
    }

    pub fn validate_with_cap(&self, cap: usize) -> Result<(), CorpusError> {
        if self.source == Source::Clean && (self.factors.is_none() || self.judgment.is_none()) {
            return Err(CorpusError::IncompleteCleanDocument {
                id: self.id.clone(),
            });
        }
        if let Some(f) = &self.factors {
            f.validate()?;
        }
        for s in &self.sentences {
            if s.text.trim().is_empty() {
                return Err(CorpusError::EmptySentence);
            }
        }
        for kind in FeatureKind::ALL {
            let count = self.sentences.iter().filter(|s| s.feature == kind).count();
            if count > cap {
                return Err(CorpusError::SentenceCapExceeded {
                    id: self.id.clone(),
                    feature: kind,
                    cap,
                });
            }
        }
        Ok(())
    }

    /// All sentence text in document order, joined for encoding.
    pub fn full_text(&self) -> String {
        self.sentences
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Clone, Debug, Default)]
pub struct DatasetSplit {
    pub train: Vec<CaseDocument>,
    pub validation: Vec<CaseDocument>,
    pub test: Vec<CaseDocument>,
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordWire {
    id: String,
    sentences: Vec<Sentence>,
    factors: Option<FactorScores>,
    judgment: Option<u8>,
    source: Source,
}

impl RecordWire {
    fn into_document(self, path: &str, line: usize) -> Result<CaseDocument, CorpusError> {
        let judgment = match self.judgment {
            None => None,
            Some(v) => Some(Judgment::from_u8(v).ok_or_else(|| {
                CorpusError::MalformedRecord {
                    path: path.to_string(),
                    line,
                    msg: format!("judgment must be 0 or 1, got {}", v),
                }
            })?),
        };
        let doc = CaseDocument {
            id: self.id,
            sentences: self.sentences,
            factors: self.factors,
            judgment,
            source: self.source,
        };
        doc.validate()?;
        Ok(doc)
    }

    fn from_document(doc: &CaseDocument) -> Self {
        Self {
            id: doc.id.clone(),
            sentences: doc.sentences.clone(),
            factors: doc.factors,
            judgment: doc.judgment.map(Judgment::as_u8),
            source: doc.source,
        }
    }
}

/// Load a line-delimited dataset; every record must carry the expected
/// source tag.
pub fn load_dataset(path: &Path, source_tag: Source) -> Result<Vec<CaseDocument>, CorpusError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: display.clone(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut docs = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: display.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: RecordWire =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
                path: display.clone(),
                line: line_no,
                msg: e.to_string(),
            })?;
        if wire.source != source_tag {
            return Err(CorpusError::SourceMismatch {
                expected: source_tag,
                found: wire.source,
            });
        }
        let doc = wire.into_document(&display, line_no)?;
        if !seen.insert(doc.id.clone()) {
            return Err(CorpusError::DuplicateId(doc.id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn save_dataset(path: &Path, docs: &[CaseDocument]) -> Result<(), CorpusError> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|source| CorpusError::Io {
        path: display.clone(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    for doc in docs {
        let wire = RecordWire::from_document(doc);
        let json = serde_json::to_string(&wire).expect("record serialization");
        writeln!(w, "{}", json).map_err(|source| CorpusError::Io {
            path: display.clone(),
            source,
        })?;
    }
    w.flush().map_err(|source| CorpusError::Io {
        path: display,
        source,
    })
}

/// Seed-deterministic disjoint split with exact sizes.
pub fn split_dataset(
    docs: &[CaseDocument],
    counts: (usize, usize, usize),
    seed: u64,
) -> Result<DatasetSplit, CorpusError> {
    let (n_train, n_val, n_test) = counts;
    let requested = n_train + n_val + n_test;
    if requested > docs.len() {
        return Err(CorpusError::SplitTooLarge {
            requested,
            available: docs.len(),
        });
    }
    let mut seen = std::collections::HashSet::new();
    for doc in docs {
        if !seen.insert(doc.id.as_str()) {
            return Err(CorpusError::DuplicateId(doc.id.clone()));
        }
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let pick = |range: std::ops::Range<usize>| -> Vec<CaseDocument> {
        order[range].iter().map(|&i| docs[i].clone()).collect()
    };
    Ok(DatasetSplit {
        train: pick(0..n_train),
        validation: pick(n_train..n_train + n_val),
        test: pick(n_train + n_val..requested),
    })
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

/// Per-factor categorical weights over the integer score support.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreDistribution {
    /// Weights over scores 1..=5.
    pub goods: Vec<f64>,
    /// Weights over scores 1..=5.
    pub visual: Vec<f64>,
    /// Weights over scores 0..=5.
    pub phonetic: Vec<f64>,
    /// Weights over scores 0..=5.
    pub conceptual: Vec<f64>,
    /// Weights over scores 1..=5.
    pub attention: Vec<f64>,
}

impl Default for ScoreDistribution {
    fn default() -> Self {
        Self {
            goods: vec![1.0; 5],
            visual: vec![1.0; 5],
            phonetic: vec![0.5, 1.0, 1.0, 1.0, 1.0, 1.0],
            conceptual: vec![0.5, 1.0, 1.0, 1.0, 1.0, 1.0],
            attention: vec![1.0; 5],
        }
    }
}

impl ScoreDistribution {
    fn weights(&self, kind: FeatureKind) -> (&[f64], f64) {
        // Returns (weights, score of first bucket).
        match kind {
            FeatureKind::GoodsServices => (&self.goods, 1.0),
            FeatureKind::Visual => (&self.visual, 1.0),
            FeatureKind::Phonetic => (&self.phonetic, 0.0),
            FeatureKind::Conceptual => (&self.conceptual, 0.0),
            FeatureKind::Attention => (&self.attention, 1.0),
        }
    }

    fn validate(&self) -> Result<(), CorpusError> {
        for kind in FeatureKind::ALL {
            let (w, first) = self.weights(kind);
            let expected = if first == 0.0 { 6 } else { 5 };
            if w.len() != expected {
                return Err(CorpusError::InvalidConfig(format!(
                    "{} weights must have {} entries, got {}",
                    kind,
                    expected,
                    w.len()
                )));
            }
            if w.iter().any(|&x| x < 0.0 || !x.is_finite()) || w.iter().sum::<f64>() <= 0.0 {
                return Err(CorpusError::InvalidConfig(format!(
                    "{} weights must be nonnegative with positive sum",
                    kind
                )));
            }
        }
        Ok(())
    }

    fn sample(&self, kind: FeatureKind, rng: &mut ChaCha8Rng) -> f64 {
        let (weights, first) = self.weights(kind);
        let total: f64 = weights.iter().sum();
        let mut r = rng.gen_range(0.0..total);
        for (i, &w) in weights.iter().enumerate() {
            if r < w {
                return first + i as f64;
            }
            r -= w;
        }
        first + (weights.len() - 1) as f64
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub num_docs: usize,
    pub noise_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub score_distribution: ScoreDistribution,
    #[serde(default = "default_vocabulary_size")]
    pub vocabulary_size: usize,
}

fn default_vocabulary_size() -> usize {
    24
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(CorpusError::InvalidConfig(format!(
                "noise_rate must be in [0, 1], got {}",
                self.noise_rate
            )));
        }
        if self.vocabulary_size == 0 {
            return Err(CorpusError::InvalidConfig(
                "vocabulary_size must be positive".into(),
            ));
        }
        self.score_distribution.validate()
    }
}

const FILLER_WORDS: [&str; 24] = [
    "beverages", "cosmetics", "software", "clothing", "furniture", "stationery",
    "pharmaceuticals", "machinery", "jewellery", "insurance", "telecoms", "footwear",
    "toys", "publishing", "logistics", "catering", "textiles", "hardware",
    "banking", "education", "agriculture", "transport", "media", "energy",
];

fn degree_phrase(score: i64) -> &'static str {
    match score {
        5 => "identical",
        4 => "similar to a high degree",
        3 => "similar to an average degree",
        2 => "similar only to a low degree",
        _ => "dissimilar",
    }
}

fn attention_phrase(score: i64) -> &'static str {
    match score {
        5 => "particularly high",
        4 => "high",
        3 => "average",
        2 => "below average",
        _ => "low",
    }
}

/// Fixed phrase-template bank per (feature, rounded score). Each phrase
/// contains the feature's default keyword so downstream keyword filtering
/// has real signal; `variant` selects among the phrasings.
pub fn template_sentence(kind: FeatureKind, score: f64, variant: usize, filler: &str) -> String {
    let s = score.round() as i64;
    let body = match kind {
        FeatureKind::GoodsServices => match variant % 2 {
            0 => format!("The goods and services at issue are {}.", degree_phrase(s)),
            _ => format!(
                "The contested goods and services covering {} must be regarded as {}.",
                filler,
                degree_phrase(s)
            ),
        },
        FeatureKind::Visual => match variant % 2 {
            0 => format!("Visually, the signs are {}.", degree_phrase(s)),
            _ => format!("The marks are visually {} for the {} sector.", degree_phrase(s), filler),
        },
        FeatureKind::Phonetic => {
            if s == 0 {
                "Phonetically, the comparison remains neutral as the signs cannot be pronounced."
                    .to_string()
            } else {
                match variant % 2 {
                    0 => format!("Phonetically, the signs are {}.", degree_phrase(s)),
                    _ => format!("The marks are aurally {} in respect of {}.", degree_phrase(s), filler),
                }
            }
        }
        FeatureKind::Conceptual => {
            if s == 0 {
                "Conceptually, the comparison is neutral since neither sign conveys a meaning."
                    .to_string()
            } else {
                match variant % 2 {
                    0 => format!("Conceptually, the signs are {}.", degree_phrase(s)),
                    _ => format!(
                        "The marks are conceptually {} as regards {}.",
                        degree_phrase(s),
                        filler
                    ),
                }
            }
        }
        FeatureKind::Attention => match variant % 2 {
            0 => format!(
                "The level of attention of the relevant public is {}.",
                attention_phrase(s)
            ),
            _ => format!(
                "The attentiveness of the public purchasing {} is {}.",
                filler,
                attention_phrase(s)
            ),
        },
    };
    body
}

/// Generate a fully reproducible synthetic corpus. Factor vectors are
/// rejection-sampled until the rule outcome is decided, so with
/// `noise_rate = 0` every document's judgment equals the rule evaluation of
/// its factors.
pub fn generate_synthetic(
    config: &SynthConfig,
    ruleset: &RuleSet,
) -> Result<Vec<CaseDocument>, CorpusError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let filler_count = config.vocabulary_size.min(FILLER_WORDS.len());
    let mut docs = Vec::with_capacity(config.num_docs);
    for n in 0..config.num_docs {
        let (factors, outcome) = loop {
            let mut f = FactorScores {
                goods: 0.0,
                visual: 0.0,
                phonetic: 0.0,
                conceptual: 0.0,
                attention: 0.0,
            };
            for kind in FeatureKind::ALL {
                f.set(kind, config.score_distribution.sample(kind, &mut rng));
            }
            let outcome = evaluate_rules(ruleset, &f.as_array().into())
                .map_err(|e| CorpusError::InvalidConfig(e.to_string()))?;
            match outcome {
                Outcome::Confusion => break (f, Judgment::Confusion),
                Outcome::NoConfusion => break (f, Judgment::NoConfusion),
                Outcome::Undetermined | Outcome::Conflict => continue,
            }
        };
        let judgment = if config.noise_rate > 0.0 && rng.gen::<f64>() < config.noise_rate {
            outcome.flipped()
        } else {
            outcome
        };
        let mut sentences = Vec::with_capacity(5);
        for kind in FeatureKind::ALL {
            let variant = rng.gen_range(0..2usize);
            let filler = FILLER_WORDS[rng.gen_range(0..filler_count)];
            sentences.push(Sentence {
                feature: kind,
                text: template_sentence(kind, factors.get(kind), variant, filler),
            });
        }
        let doc = CaseDocument {
            id: format!("synth-{:06}", n),
            sentences,
            factors: Some(factors),
            judgment: Some(judgment),
            source: Source::Synthetic,
        };
        doc.validate()?;
        docs.push(doc);
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::builtin;
    use tempfile::tempdir;

    fn sample_doc(id: &str) -> CaseDocument {
        CaseDocument {
            id: id.to_string(),
            sentences: vec![
                Sentence::new(FeatureKind::Visual, "Visually, the signs are identical.").unwrap(),
                Sentence::new(FeatureKind::GoodsServices, "The goods and services are similar.")
                    .unwrap(),
            ],
            factors: Some(FactorScores::new(5.0, 5.0, 5.0, 5.0, 5.0).unwrap()),
            judgment: Some(Judgment::Confusion),
            source: Source::Clean,
        }
    }

    #[test]
    fn empty_file_loads_to_empty_list() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        let docs = load_dataset(&path, Source::Clean).unwrap();
        assert!(docs.is_empty());
    }

    #[test]
    fn save_then_load_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("docs.jsonl");
        let docs = vec![sample_doc("a"), sample_doc("b")];
        save_dataset(&path, &docs).unwrap();
        let back = load_dataset(&path, Source::Clean).unwrap();
        assert_eq!(docs, back);
    }

    #[test]
    fn out_of_range_phonetic_is_a_validation_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let line = r#"{"id":"x","sentences":[{"feature":"visual","text":"Visually similar."}],"factors":{"goods":3,"visual":3,"phonetic":7,"conceptual":3,"attention":3},"judgment":null,"source":"augmented"}"#;
        std::fs::write(&path, line).unwrap();
        let err = load_dataset(&path, Source::Augmented).unwrap_err();
        match err {
            CorpusError::ScoreOutOfRange { factor, value, .. } => {
                assert_eq!(factor, "phonetic");
                assert_eq!(value, 7.0);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn malformed_record_error_carries_line_number() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let good = serde_json::to_string(&RecordWire::from_document(&sample_doc("a"))).unwrap();
        std::fs::write(&path, format!("{}\nnot json\n", good)).unwrap();
        let err = load_dataset(&path, Source::Clean).unwrap_err();
        match err {
            CorpusError::MalformedRecord { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn multi_judgment_record_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("split.jsonl");
        let line = r#"{"id":"x","sentences":[{"feature":"visual","text":"Visually similar."}],"factors":null,"judgment":[0,1],"source":"augmented"}"#;
        std::fs::write(&path, line).unwrap();
        assert!(matches!(
            load_dataset(&path, Source::Augmented),
            Err(CorpusError::MalformedRecord { .. })
        ));
    }

    #[test]
    fn clean_doc_without_factors_is_rejected() {
        let mut doc = sample_doc("x");
        doc.factors = None;
        assert!(matches!(
            doc.validate(),
            Err(CorpusError::IncompleteCleanDocument { .. })
        ));
    }

    #[test]
    fn split_sizes_are_exact_and_deterministic() {
        let docs: Vec<CaseDocument> = (0..426).map(|i| {
            let mut d = sample_doc(&format!("doc-{}", i));
            d.source = Source::Synthetic;
            d
        }).collect();
        let s1 = split_dataset(&docs, (213, 53, 160), 7).unwrap();
        assert_eq!(s1.train.len(), 213);
        assert_eq!(s1.validation.len(), 53);
        assert_eq!(s1.test.len(), 160);
        let s2 = split_dataset(&docs, (213, 53, 160), 7).unwrap();
        let ids = |v: &[CaseDocument]| v.iter().map(|d| d.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&s1.train), ids(&s2.train));
        assert_eq!(ids(&s1.test), ids(&s2.test));

        // Disjointness.
        let mut all: Vec<String> = ids(&s1.train);
        all.extend(ids(&s1.validation));
        all.extend(ids(&s1.test));
        let unique: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(unique.len(), all.len());
    }

    #[test]
    fn zero_counts_give_empty_splits() {
        let docs = vec![sample_doc("a")];
        let s = split_dataset(&docs, (0, 0, 0), 1).unwrap();
        assert!(s.train.is_empty() && s.validation.is_empty() && s.test.is_empty());
    }

    #[test]
    fn oversized_split_is_an_error() {
        let docs = vec![sample_doc("a")];
        assert!(matches!(
            split_dataset(&docs, (1, 1, 0), 1),
            Err(CorpusError::SplitTooLarge { .. })
        ));
    }

    #[test]
    fn synthetic_all_maxima_is_confusion_under_annotator_1() {
        // Rule (X1>=4) & ((X2>=4) | (X3>=4)) fires on an all-fives vector and
        // the no-confusion rule cannot.
        let ruleset = builtin::annotator_1();
        let outcome = evaluate_rules(&ruleset, &[5.0, 5.0, 5.0, 5.0, 5.0].into()).unwrap();
        assert_eq!(outcome, Outcome::Confusion);
    }

    #[test]
    fn synthetic_generator_respects_count_and_invariants() {
        let cfg = SynthConfig {
            num_docs: 100,
            noise_rate: 0.0,
            seed: 11,
            score_distribution: ScoreDistribution::default(),
            vocabulary_size: 24,
        };
        let docs = generate_synthetic(&cfg, &builtin::reconciled()).unwrap();
        assert_eq!(docs.len(), 100);
        for d in &docs {
            d.validate().unwrap();
            assert_eq!(d.source, Source::Synthetic);
            for kind in FeatureKind::ALL {
                assert!(d.sentences.iter().any(|s| s.feature == kind));
            }
        }
    }

    #[test]
    fn noise_free_synthetic_judgments_match_rule_oracle() {
        let ruleset = builtin::reconciled();
        let cfg = SynthConfig {
            num_docs: 200,
            noise_rate: 0.0,
            seed: 3,
            score_distribution: ScoreDistribution::default(),
            vocabulary_size: 24,
        };
        let docs = generate_synthetic(&cfg, &ruleset).unwrap();
        for d in docs {
            let factors = d.factors.unwrap();
            let outcome = evaluate_rules(&ruleset, &factors.as_array().into()).unwrap();
            let expected = match outcome {
                Outcome::Confusion => Judgment::Confusion,
                Outcome::NoConfusion => Judgment::NoConfusion,
                other => panic!("undecided outcome {:?} in generated doc", other),
            };
            assert_eq!(d.judgment.unwrap(), expected);
        }
    }

    #[test]
    fn synthetic_generation_is_reproducible() {
        let cfg = SynthConfig {
            num_docs: 30,
            noise_rate: 0.5,
            seed: 99,
            score_distribution: ScoreDistribution::default(),
            vocabulary_size: 10,
        };
        let a = generate_synthetic(&cfg, &builtin::reconciled()).unwrap();
        let b = generate_synthetic(&cfg, &builtin::reconciled()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_noise_rate_is_rejected() {
        let cfg = SynthConfig {
            num_docs: 1,
            noise_rate: 1.5,
            seed: 0,
            score_distribution: ScoreDistribution::default(),
            vocabulary_size: 10,
        };
        assert!(matches!(cfg.validate(), Err(CorpusError::InvalidConfig(_))));
    }
}
