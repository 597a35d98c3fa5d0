//! The fusion classifier and its two baselines: an end-to-end text model,
//! a multi-task model with a shared encoder, and the gated fusion of text
//! and intermediate-label representations.

mod encoder;
mod train;

pub use encoder::{
    bucketize, encode_tokens, init_interm_encoder, init_text_encoder, interm_encode,
    scaled_dot_attention, EncoderConfig, IntermConfig, Pooling, TokenVocab, NUM_BUCKETS,
    UNK_TOKEN,
};
pub use train::{
    cross_entropy_loss, train, validation_score, EpochRecord, SelectBy, TrainConfig,
    TrainOutcome,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::autodiff::{
    read_checkpoint, write_checkpoint, AutodiffError, Binding, NodeId, ParameterStore, Tape,
};
use crate::corpus::{CaseDocument, CorpusError, Judgment};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    BadConfig(String),
    #[error("document has no tokens")]
    EmptyDocument,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("training split is empty")]
    EmptySplit,
    #[error("model was built for mode {built:?}, requested {requested:?}")]
    ModeMismatch { built: Mode, requested: Mode },
    #[error("document {0} lacks the label required for this loss")]
    MissingLabel(String),
    #[error("fusion width mismatch: V_text has {text} columns, V_interm has {interm}")]
    FusionWidth { text: usize, interm: usize },
    #[error("bad checkpoint metadata: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    EndToEnd,
    MultiTask,
    Fusion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub mode: Mode,
    pub encoder: EncoderConfig,
    pub interm: IntermConfig,
    pub pooling: Pooling,
    /// When set, the fusion path embeds gold factor scores instead of f2's
    /// predictions whenever the document carries them (training-time only).
    pub teacher_forcing: bool,
}

impl ModelConfig {
    pub fn micro(mode: Mode, vocab_size: usize) -> Self {
        Self {
            mode,
            encoder: EncoderConfig::micro(vocab_size),
            interm: IntermConfig::micro(),
            pooling: Pooling::Mean,
            teacher_forcing: false,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.encoder.validate()?;
        if self.mode == Mode::Fusion {
            self.interm.validate()?;
        }
        Ok(())
    }
}

/// A model instance: configuration, token vocabulary, and parameters.
pub struct Model {
    pub config: ModelConfig,
    pub vocab: TokenVocab,
    pub params: ParameterStore,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("mode", &self.config.mode)
            .field("parameters", &self.params.num_values())
            .finish()
    }
}

impl Model {
    pub fn new(config: ModelConfig, vocab: TokenVocab, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        if vocab.len() != config.encoder.vocab_size {
            return Err(ModelError::BadConfig(format!(
                "vocabulary has {} entries, encoder expects {}",
                vocab.len(),
                config.encoder.vocab_size
            )));
        }
        let mut params = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let enc = &config.encoder;
        let d = enc.model_dim;
        let s = 1.0 / (d as f64).sqrt();
        let head = |params: &mut ParameterStore,
                        rng: &mut ChaCha8Rng,
                        name: &str,
                        inputs: usize,
                        outputs: usize| {
            params.insert(
                &format!("{name}.w"),
                uniform(rng, inputs, outputs, 1.0 / (inputs as f64).sqrt()),
            );
            params.insert(
                &format!("{name}.b"),
                crate::autodiff::Tensor::zeros(&[1, outputs]),
            );
        };
        match config.mode {
            Mode::EndToEnd => {
                init_text_encoder(&mut params, "f1", enc, &mut rng);
                head(&mut params, &mut rng, "cls", d, 2);
                init_text_encoder(&mut params, "f2", enc, &mut rng);
                head(&mut params, &mut rng, "reg", d, 5);
            }
            Mode::MultiTask => {
                init_text_encoder(&mut params, "shared", enc, &mut rng);
                head(&mut params, &mut rng, "cls", d, 2);
                head(&mut params, &mut rng, "reg", d, 5);
            }
            Mode::Fusion => {
                init_text_encoder(&mut params, "f1", enc, &mut rng);
                init_text_encoder(&mut params, "f2", enc, &mut rng);
                head(&mut params, &mut rng, "reg", d, 5);
                init_interm_encoder(&mut params, "interm", &config.interm, &mut rng);
                let f = config.interm.output_dim;
                params.insert("fusion.adapter.w", uniform(&mut rng, d, f, s));
                head(&mut params, &mut rng, "fusion.g1", 2 * f, 1);
                head(&mut params, &mut rng, "fusion.g2", 2 * f, 1);
                head(&mut params, &mut rng, "fusion.cls", f, 2);
            }
        }
        Ok(Self {
            config,
            vocab,
            params,
        })
    }

    fn check_mode(&self, requested: Mode) -> Result<(), ModelError> {
        if self.config.mode != requested {
            return Err(ModelError::ModeMismatch {
                built: self.config.mode,
                requested,
            });
        }
        Ok(())
    }

    /// Build the forward graph for one document in the model's own mode.
    /// Returns logits [1,2] and, where the architecture produces them,
    /// intermediate-score predictions [1,5].
    pub fn build_forward(
        &self,
        tape: &mut Tape,
        binding: &Binding,
        doc: &CaseDocument,
        requested: Mode,
    ) -> Result<GraphOutput, ModelError> {
        self.check_mode(requested)?;
        let tokens = self.vocab.encode(&doc.full_text());
        let enc = &self.config.encoder;
        let pooling = self.config.pooling;
        match self.config.mode {
            Mode::EndToEnd => {
                let v1 = encode_tokens(tape, binding, "f1", enc, &tokens, pooling)?;
                let logits = linear(tape, binding, "cls", v1)?;
                let v2 = encode_tokens(tape, binding, "f2", enc, &tokens, pooling)?;
                let scores = linear(tape, binding, "reg", v2)?;
                Ok(GraphOutput {
                    logits,
                    scores: Some(scores),
                    gates: None,
                })
            }
            Mode::MultiTask => {
                let v = encode_tokens(tape, binding, "shared", enc, &tokens, pooling)?;
                let logits = linear(tape, binding, "cls", v)?;
                let scores = linear(tape, binding, "reg", v)?;
                Ok(GraphOutput {
                    logits,
                    scores: Some(scores),
                    gates: None,
                })
            }
            Mode::Fusion => {
                let v2 = encode_tokens(tape, binding, "f2", enc, &tokens, pooling)?;
                let scores = linear(tape, binding, "reg", v2)?;
                let score_values: [f64; 5] = tape
                    .value(scores)
                    .row_slice(0)
                    .try_into()
                    .expect("regression head emits 5 scores");
                let embedded = if self.config.teacher_forcing {
                    doc.factors.map(|f| f.as_array()).unwrap_or(score_values)
                } else {
                    score_values
                };
                let buckets = bucketize(&embedded);
                let v_interm =
                    interm_encode(tape, binding, "interm", &self.config.interm, &buckets)?;
                let v1 = encode_tokens(tape, binding, "f1", enc, &tokens, pooling)?;
                let v_text = tape.matmul(v1, binding.node("fusion.adapter.w"))?;
                let (v_fusion, s1, s2) = fuse(tape, binding, "fusion", v_text, v_interm)?;
                let logits = linear(tape, binding, "fusion.cls", v_fusion)?;
                Ok(GraphOutput {
                    logits,
                    scores: Some(scores),
                    gates: Some((s1, s2)),
                })
            }
        }
    }

    /// Pure inference over the current parameters.
    pub fn infer(&self, doc: &CaseDocument) -> Result<Inference, ModelError> {
        let mut tape = Tape::new();
        let binding = self.params.bind(&mut tape);
        let out = self.build_forward(&mut tape, &binding, doc, self.config.mode)?;
        let probs_node = tape.softmax(out.logits);
        let p = tape.value(probs_node).row_slice(0);
        let probs = [p[0], p[1]];
        let predicted = if probs[1] >= probs[0] {
            Judgment::Confusion
        } else {
            Judgment::NoConfusion
        };
        let scores = out
            .scores
            .map(|s| tape.value(s).row_slice(0).try_into().expect("5 scores"));
        let gates = out
            .gates
            .map(|(a, b)| (tape.value(a).scalar_value(), tape.value(b).scalar_value()));
        Ok(Inference {
            probs,
            predicted,
            scores,
            gates,
        })
    }

    /// The five factor-score predictions from the regression path.
    pub fn predict_intermediate(&self, doc: &CaseDocument) -> Result<[f64; 5], ModelError> {
        self.infer(doc)?
            .scores
            .ok_or_else(|| ModelError::BadConfig("model has no regression head".into()))
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let meta = CheckpointMeta {
            config: self.config.clone(),
            vocab: self.vocab.words().to_vec(),
            bucketing: BUCKETING_SCHEME.to_string(),
        };
        let meta_json = serde_json::to_string(&meta)
            .map_err(|e| ModelError::BadCheckpoint(e.to_string()))?;
        write_checkpoint(path, &meta_json, &self.params.export())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let (meta_json, tensors) = read_checkpoint(path)?;
        let meta: CheckpointMeta = serde_json::from_str(&meta_json)
            .map_err(|e| ModelError::BadCheckpoint(e.to_string()))?;
        let vocab = TokenVocab::from_words(meta.vocab);
        let mut model = Model::new(meta.config, vocab, 0)?;
        model.params.import(tensors)?;
        Ok(model)
    }
}

/// How predicted scores are discretized for the intermediate encoder.
pub const BUCKETING_SCHEME: &str = "clamp-to-range,round-to-nearest,buckets 0..=5";

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    config: ModelConfig,
    vocab: Vec<String>,
    bucketing: String,
}

/// Per-document forward products as tape nodes.
pub struct GraphOutput {
    pub logits: NodeId,
    pub scores: Option<NodeId>,
    pub gates: Option<(NodeId, NodeId)>,
}

/// Concrete inference outputs.
#[derive(Clone, Debug)]
pub struct Inference {
    pub probs: [f64; 2],
    pub predicted: Judgment,
    pub scores: Option<[f64; 5]>,
    pub gates: Option<(f64, f64)>,
}

fn uniform(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    scale: f64,
) -> crate::autodiff::Tensor {
    use rand::Rng;
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-scale..scale))
        .collect();
    crate::autodiff::Tensor::matrix(rows, cols, data).expect("finite init")
}

fn linear(
    tape: &mut Tape,
    binding: &Binding,
    prefix: &str,
    x: NodeId,
) -> Result<NodeId, ModelError> {
    let h = tape.matmul(x, binding.node(&format!("{prefix}.w")))?;
    Ok(tape.add_row(h, binding.node(&format!("{prefix}.b")))?)
}

/// Gated fusion: s1 = tanh(w1·concat(V_text, V_interm) + b1), s2 with the
/// concatenation order swapped, V_fusion = s1·V_text + s2·V_interm.
pub fn fuse(
    tape: &mut Tape,
    binding: &Binding,
    prefix: &str,
    v_text: NodeId,
    v_interm: NodeId,
) -> Result<(NodeId, NodeId, NodeId), ModelError> {
    let (wt, wi) = (tape.value(v_text).cols(), tape.value(v_interm).cols());
    if wt != wi {
        return Err(ModelError::FusionWidth {
            text: wt,
            interm: wi,
        });
    }
    let c1 = tape.concat_cols(&[v_text, v_interm])?;
    let g1 = linear(tape, binding, &format!("{prefix}.g1"), c1)?;
    let s1 = tape.tanh(g1);
    let c2 = tape.concat_cols(&[v_interm, v_text])?;
    let g2 = linear(tape, binding, &format!("{prefix}.g2"), c2)?;
    let s2 = tape.tanh(g2);
    let a = tape.scale_by(s1, v_text)?;
    let b = tape.scale_by(s2, v_interm)?;
    let v_fusion = tape.add(a, b)?;
    Ok((v_fusion, s1, s2))
}
