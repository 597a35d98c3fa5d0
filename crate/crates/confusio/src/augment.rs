//! Weak-supervision augmentation pipeline: TF-IDF extraction of similar pool
//! sentences, random assembly into concluding paragraphs, keyword + rule
//! filtering, and majority-vote pseudo-label assignment.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CaseDocument, FactorScores, FeatureKind, Judgment, Sentence, Source};
use crate::rules::{evaluate_rules, majority_label, Outcome, RuleSet, TiePolicy};
use crate::textsim::{fit_tfidf, tokenize, top_k_similar, transform, SparseVector};

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("clean training set is empty")]
    EmptyCleanSet,
    #[error("pool is empty")]
    EmptyPool,
    #[error("clean document {0} lacks factors or judgment")]
    MissingAnnotations(String),
    #[error("no candidates available for feature {0}")]
    FeatureWithoutCandidates(FeatureKind),
    #[error("no keywords configured for feature {0}")]
    MissingKeywords(FeatureKind),
    #[error("top_k must be >= 1")]
    BadTopK,
    #[error(transparent)]
    Rule(#[from] crate::rules::RuleError),
    #[error(transparent)]
    Textsim(#[from] crate::textsim::TextsimError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
}

/// A pool sentence retrieved for one clean sentence, carrying the inherited
/// factor score and source judgment.
#[derive(Clone, Debug)]
pub struct CandidateSentence {
    pub pool_doc_id: String,
    /// Which factor slot this candidate can fill.
    pub feature: FeatureKind,
    pub sentence: Sentence,
    pub matched_clean_sentence_id: String,
    pub similarity: f64,
    pub inherited_score: f64,
    pub inherited_judgment: Judgment,
}

#[derive(Clone, Debug)]
pub struct AugmentConfig {
    pub top_k: usize,
    pub keywords: BTreeMap<FeatureKind, Vec<String>>,
    pub ruleset: RuleSet,
    pub seed: u64,
    pub max_output: usize,
    pub tie_policy: TiePolicy,
}

impl AugmentConfig {
    pub fn new(ruleset: RuleSet, seed: u64, max_output: usize) -> Self {
        Self {
            top_k: 3,
            keywords: default_keywords(),
            ruleset,
            seed,
            max_output,
            tie_policy: TiePolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        if self.top_k == 0 {
            return Err(AugmentError::BadTopK);
        }
        for kind in FeatureKind::ALL {
            if self.keywords.get(&kind).map_or(true, |k| k.is_empty()) {
                return Err(AugmentError::MissingKeywords(kind));
            }
        }
        self.ruleset.validate()?;
        Ok(())
    }
}

/// Default keyword lists per feature, the vocabulary CJEU-style reasoning
/// uses when discussing each factor. Fully overrideable.
pub fn default_keywords() -> BTreeMap<FeatureKind, Vec<String>> {
    let mut map = BTreeMap::new();
    map.insert(
        FeatureKind::GoodsServices,
        vec!["goods".to_string(), "services".to_string()],
    );
    map.insert(FeatureKind::Visual, vec!["visual".to_string()]);
    map.insert(
        FeatureKind::Phonetic,
        vec!["phonetic".to_string(), "aurally".to_string()],
    );
    map.insert(FeatureKind::Conceptual, vec!["conceptual".to_string()]);
    map.insert(
        FeatureKind::Attention,
        vec!["attention".to_string(), "attentiveness".to_string()],
    );
    map
}

fn passes_keywords(cfg: &AugmentConfig, kind: FeatureKind, text: &str) -> bool {
    let lower = text.to_lowercase();
    cfg.keywords[&kind]
        .iter()
        .any(|k| lower.contains(&k.to_lowercase()))
}

/// Step 1 — extraction. For each clean sentence, retrieve the `top_k` most
/// cosine-similar pool sentences that pass that feature's keyword test; each
/// inherits the clean sentence's factor score and the clean document's
/// judgment. Output order is (clean sentence, rank), then deduplicated by
/// (pool document, sentence text).
pub fn extract_candidates(
    clean_train: &[CaseDocument],
    pool: &[CaseDocument],
    cfg: &AugmentConfig,
) -> Result<Vec<CandidateSentence>, AugmentError> {
    cfg.validate()?;
    if clean_train.is_empty() {
        return Err(AugmentError::EmptyCleanSet);
    }
    if pool.is_empty() {
        return Err(AugmentError::EmptyPool);
    }

    let pool_sentences: Vec<(usize, &Sentence)> = pool
        .iter()
        .enumerate()
        .flat_map(|(i, d)| d.sentences.iter().map(move |s| (i, s)))
        .collect();

    // Shared term space over clean and pool sentences.
    let mut tokenized: Vec<Vec<String>> = Vec::new();
    for doc in clean_train {
        for s in &doc.sentences {
            tokenized.push(tokenize(&s.text));
        }
    }
    let clean_count = tokenized.len();
    for (_, s) in &pool_sentences {
        tokenized.push(tokenize(&s.text));
    }
    let (vocab, vectors) = fit_tfidf(&tokenized)?;
    let pool_vectors = &vectors[clean_count..];

    // Per-feature candidate subsets: pool sentences passing the keyword test.
    let mut by_feature: BTreeMap<FeatureKind, Vec<usize>> = BTreeMap::new();
    for kind in FeatureKind::ALL {
        let subset: Vec<usize> = pool_sentences
            .iter()
            .enumerate()
            .filter(|(_, (_, s))| passes_keywords(cfg, kind, &s.text))
            .map(|(i, _)| i)
            .collect();
        by_feature.insert(kind, subset);
    }

    let mut candidates = Vec::new();
    for doc in clean_train {
        let (Some(factors), Some(judgment)) = (&doc.factors, doc.judgment) else {
            return Err(AugmentError::MissingAnnotations(doc.id.clone()));
        };
        for (idx, sentence) in doc.sentences.iter().enumerate() {
            let kind = sentence.feature;
            let subset = &by_feature[&kind];
            if subset.is_empty() {
                continue;
            }
            let query: SparseVector = transform(&vocab, &tokenize(&sentence.text));
            let subset_vectors: Vec<SparseVector> = subset
                .iter()
                .map(|&i| pool_vectors[i].clone())
                .collect();
            for (rank_idx, score) in top_k_similar(&query, &subset_vectors, cfg.top_k) {
                let global = subset[rank_idx];
                let (pool_doc_idx, pool_sentence) = pool_sentences[global];
                candidates.push(CandidateSentence {
                    pool_doc_id: pool[pool_doc_idx].id.clone(),
                    feature: kind,
                    sentence: (*pool_sentence).clone(),
                    matched_clean_sentence_id: format!("{}#{}", doc.id, idx),
                    similarity: score,
                    inherited_score: factors.get(kind),
                    inherited_judgment: judgment,
                });
            }
        }
    }

    // Deduplicate by (pool doc, sentence text), keeping the first (highest
    // ranked for the earliest clean sentence).
    let mut seen = std::collections::HashSet::new();
    candidates.retain(|c| seen.insert((c.pool_doc_id.clone(), c.sentence.text.clone())));
    Ok(candidates)
}

/// An assembled document plus the judgments of the five source cases, kept
/// until pseudo-label assignment.
#[derive(Clone, Debug)]
pub struct AssembledDocument {
    pub doc: CaseDocument,
    pub provenance: [Judgment; 5],
}

/// Step 2 — randomization. Each output draws exactly one candidate per
/// feature uniformly at random; factor scores are the five inherited scores.
pub fn randomize_assemble(
    candidates: &[CandidateSentence],
    num_docs: usize,
    cfg: &AugmentConfig,
) -> Result<Vec<AssembledDocument>, AugmentError> {
    let mut by_feature: BTreeMap<FeatureKind, Vec<&CandidateSentence>> = BTreeMap::new();
    for kind in FeatureKind::ALL {
        by_feature.insert(kind, vec![]);
    }
    for c in candidates {
        by_feature.get_mut(&c.feature).unwrap().push(c);
    }
    for kind in FeatureKind::ALL {
        if by_feature[&kind].is_empty() {
            return Err(AugmentError::FeatureWithoutCandidates(kind));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(num_docs);
    for n in 0..num_docs {
        let mut sentences = Vec::with_capacity(5);
        let mut factors = FactorScores {
            goods: 0.0,
            visual: 0.0,
            phonetic: 0.0,
            conceptual: 0.0,
            attention: 0.0,
        };
        let mut provenance = [Judgment::NoConfusion; 5];
        for (slot, kind) in FeatureKind::ALL.into_iter().enumerate() {
            let pick = &by_feature[&kind][rng.gen_range(0..by_feature[&kind].len())];
            sentences.push(Sentence {
                feature: kind,
                text: pick.sentence.text.clone(),
            });
            factors.set(kind, pick.inherited_score);
            provenance[slot] = pick.inherited_judgment;
        }
        out.push(AssembledDocument {
            doc: CaseDocument {
                id: format!("aug-{:06}", n),
                sentences,
                factors: Some(factors),
                judgment: None,
                source: Source::Augmented,
            },
            provenance,
        });
    }
    Ok(out)
}

/// Audit reason codes for the rejects file.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum RejectReason {
    KeywordFail,
    RuleUndetermined,
    RuleConflict,
    LabelMismatch,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::KeywordFail => "KEYWORD_FAIL",
            RejectReason::RuleUndetermined => "RULE_UNDETERMINED",
            RejectReason::RuleConflict => "RULE_CONFLICT",
            RejectReason::LabelMismatch => "LABEL_MISMATCH",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct RejectRecord {
    pub doc_id: String,
    pub reason: RejectReason,
}

/// Step 3 — filtering. Keep a document iff every sentence contains a keyword
/// for its feature, the rule outcome on its factors is decided, and that
/// outcome agrees with the majority vote over the source judgments — so every
/// surviving pseudo-label is endorsed by both the rules and the provenance.
pub fn filter_candidates(
    docs: Vec<AssembledDocument>,
    cfg: &AugmentConfig,
) -> Result<(Vec<AssembledDocument>, Vec<RejectRecord>), AugmentError> {
    let mut kept = Vec::new();
    let mut rejects = Vec::new();
    for a in docs {
        let keyword_ok = a
            .doc
            .sentences
            .iter()
            .all(|s| passes_keywords(cfg, s.feature, &s.text));
        if !keyword_ok {
            rejects.push(RejectRecord {
                doc_id: a.doc.id.clone(),
                reason: RejectReason::KeywordFail,
            });
            continue;
        }
        let factors = a
            .doc
            .factors
            .as_ref()
            .ok_or_else(|| AugmentError::MissingAnnotations(a.doc.id.clone()))?;
        match evaluate_rules(&cfg.ruleset, &factors.as_array().into())? {
            outcome @ (Outcome::Confusion | Outcome::NoConfusion) => {
                let majority = majority_label(&a.provenance, cfg.tie_policy)?;
                let agreed = match outcome {
                    Outcome::Confusion => majority == Judgment::Confusion,
                    _ => majority == Judgment::NoConfusion,
                };
                if agreed {
                    kept.push(a);
                } else {
                    rejects.push(RejectRecord {
                        doc_id: a.doc.id.clone(),
                        reason: RejectReason::LabelMismatch,
                    });
                }
            }
            Outcome::Undetermined => rejects.push(RejectRecord {
                doc_id: a.doc.id.clone(),
                reason: RejectReason::RuleUndetermined,
            }),
            Outcome::Conflict => rejects.push(RejectRecord {
                doc_id: a.doc.id.clone(),
                reason: RejectReason::RuleConflict,
            }),
        }
    }
    Ok((kept, rejects))
}

/// Step 4 — assigning. Intermediate labels stay as inherited; the final
/// judgment is the majority vote over the five source judgments.
pub fn assign_pseudolabels(
    docs: Vec<AssembledDocument>,
    tie: TiePolicy,
) -> Result<Vec<CaseDocument>, AugmentError> {
    docs.into_iter()
        .map(|a| {
            let judgment = majority_label(&a.provenance, tie)?;
            let mut doc = a.doc;
            doc.judgment = Some(judgment);
            doc.validate()?;
            Ok(doc)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub augmented: Vec<CaseDocument>,
    pub rejects: Vec<RejectRecord>,
}

/// Assemble more documents than requested so filtering still leaves enough.
const ASSEMBLY_OVERSAMPLE: usize = 4;

/// Full pipeline: extraction, randomization, filtering, assigning; truncated
/// to `max_output`, all outputs tagged augmented.
pub fn run_pipeline(
    clean_train: &[CaseDocument],
    pool: &[CaseDocument],
    cfg: &AugmentConfig,
) -> Result<PipelineOutput, AugmentError> {
    if cfg.max_output == 0 {
        return Ok(PipelineOutput {
            augmented: vec![],
            rejects: vec![],
        });
    }
    let candidates = extract_candidates(clean_train, pool, cfg)?;
    let assembled = randomize_assemble(&candidates, cfg.max_output * ASSEMBLY_OVERSAMPLE, cfg)?;
    let (kept, rejects) = filter_candidates(assembled, cfg)?;
    let mut augmented = assign_pseudolabels(kept, cfg.tie_policy)?;
    augmented.truncate(cfg.max_output);
    Ok(PipelineOutput { augmented, rejects })
}

/// Write the rejects audit file: `doc_id<TAB>reason` per line.
pub fn write_rejects(path: &std::path::Path, rejects: &[RejectRecord]) -> std::io::Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in rejects {
        writeln!(w, "{}\t{}", r.doc_id, r.reason)?;
    }
    w.flush()
}
