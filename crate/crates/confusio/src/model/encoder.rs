//! From-scratch transformer encoders: the pluggable text encoder (f1/f2)
//! and the score-token intermediate encoder (E_interm).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::autodiff::{AutodiffError, NodeId, ParameterStore, Tape, Tensor};
use crate::corpus::FeatureKind;

use super::ModelError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub model_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub feedforward_dim: usize,
    pub max_sequence_length: usize,
}

impl EncoderConfig {
    /// Small from-scratch default: 2 layers, 4 heads, dimension 64.
    pub fn micro(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            model_dim: 64,
            num_layers: 2,
            num_heads: 4,
            feedforward_dim: 128,
            max_sequence_length: 128,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.vocab_size == 0
            || self.model_dim == 0
            || self.num_layers == 0
            || self.num_heads == 0
            || self.feedforward_dim == 0
            || self.max_sequence_length == 0
        {
            return Err(ModelError::BadConfig("encoder fields must be positive".into()));
        }
        if self.model_dim % self.num_heads != 0 {
            return Err(ModelError::BadConfig(format!(
                "model_dim {} not divisible by num_heads {}",
                self.model_dim, self.num_heads
            )));
        }
        Ok(())
    }
}

/// Configuration of the intermediate (score-token) encoder. Defaults mirror
/// the reference setup: 300-dimensional embeddings through a 6-layer,
/// 6-head stack with feedforward dimension 512.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntermConfig {
    pub embed_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub feedforward_dim: usize,
    /// Width of V_interm after the final feedforward projection; this is the
    /// fusion dimension.
    pub output_dim: usize,
}

impl Default for IntermConfig {
    fn default() -> Self {
        Self {
            embed_dim: 300,
            num_layers: 6,
            num_heads: 6,
            feedforward_dim: 512,
            output_dim: 64,
        }
    }
}

impl IntermConfig {
    pub fn micro() -> Self {
        Self {
            embed_dim: 24,
            num_layers: 1,
            num_heads: 2,
            feedforward_dim: 48,
            output_dim: 16,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.embed_dim == 0
            || self.num_layers == 0
            || self.num_heads == 0
            || self.feedforward_dim == 0
            || self.output_dim == 0
        {
            return Err(ModelError::BadConfig(
                "intermediate encoder fields must be positive".into(),
            ));
        }
        if self.embed_dim % self.num_heads != 0 {
            return Err(ModelError::BadConfig(format!(
                "embed_dim {} not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        Ok(())
    }
}

/// Word-level vocabulary; id 0 is the unknown token.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct TokenVocab {
    words: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl From<Vec<String>> for TokenVocab {
    fn from(words: Vec<String>) -> Self {
        Self::from_words(words)
    }
}

impl From<TokenVocab> for Vec<String> {
    fn from(v: TokenVocab) -> Self {
        v.words
    }
}

pub const UNK_TOKEN: &str = "<unk>";

impl TokenVocab {
    /// Build from corpus text by descending frequency (ties by term), capped
    /// at `max_size` entries including the unknown token.
    pub fn build<'a>(texts: impl Iterator<Item = &'a str>, max_size: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for token in crate::textsim::tokenize(text) {
                *counts.entry(token).or_default() += 1;
            }
        }
        let mut by_freq: Vec<(String, usize)> = counts.into_iter().collect();
        by_freq.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut words = vec![UNK_TOKEN.to_string()];
        words.extend(
            by_freq
                .into_iter()
                .take(max_size.saturating_sub(1))
                .map(|(w, _)| w),
        );
        Self::from_words(words)
    }

    pub fn from_words(words: Vec<String>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Self { words, index }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        crate::textsim::tokenize(text)
            .iter()
            .map(|t| self.index.get(t).copied().unwrap_or(0))
            .collect()
    }
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-scale..scale))
        .collect();
    Tensor::matrix(rows, cols, data).expect("finite init")
}

fn init_transformer_stack(
    store: &mut ParameterStore,
    prefix: &str,
    dim: usize,
    num_layers: usize,
    feedforward_dim: usize,
    rng: &mut ChaCha8Rng,
) {
    let s = 1.0 / (dim as f64).sqrt();
    let sf = 1.0 / (feedforward_dim as f64).sqrt();
    for l in 0..num_layers {
        let p = format!("{prefix}.l{l}");
        for w in ["wq", "wk", "wv", "wo"] {
            store.insert(&format!("{p}.{w}"), uniform(rng, dim, dim, s));
        }
        for ln in ["ln1", "ln2"] {
            store.insert(&format!("{p}.{ln}.g"), Tensor::row(&vec![1.0; dim]));
            store.insert(&format!("{p}.{ln}.b"), Tensor::zeros(&[1, dim]));
        }
        store.insert(&format!("{p}.ff.w1"), uniform(rng, dim, feedforward_dim, s));
        store.insert(&format!("{p}.ff.b1"), Tensor::zeros(&[1, feedforward_dim]));
        store.insert(&format!("{p}.ff.w2"), uniform(rng, feedforward_dim, dim, sf));
        store.insert(&format!("{p}.ff.b2"), Tensor::zeros(&[1, dim]));
    }
}

/// Register parameters for one text encoder under `prefix`.
pub fn init_text_encoder(
    store: &mut ParameterStore,
    prefix: &str,
    cfg: &EncoderConfig,
    rng: &mut ChaCha8Rng,
) {
    let s = 1.0 / (cfg.model_dim as f64).sqrt();
    store.insert(
        &format!("{prefix}.emb"),
        uniform(rng, cfg.vocab_size, cfg.model_dim, s),
    );
    store.insert(
        &format!("{prefix}.pos"),
        uniform(rng, cfg.max_sequence_length, cfg.model_dim, s),
    );
    init_transformer_stack(
        store,
        prefix,
        cfg.model_dim,
        cfg.num_layers,
        cfg.feedforward_dim,
        rng,
    );
}

/// Register parameters for the intermediate encoder under `prefix`: one
/// 6-bucket embedding table per factor, the transformer stack, and the final
/// feedforward projection to the fusion dimension.
pub fn init_interm_encoder(
    store: &mut ParameterStore,
    prefix: &str,
    cfg: &IntermConfig,
    rng: &mut ChaCha8Rng,
) {
    let s = 1.0 / (cfg.embed_dim as f64).sqrt();
    for i in 0..5 {
        store.insert(
            &format!("{prefix}.fac{i}.emb"),
            uniform(rng, NUM_BUCKETS, cfg.embed_dim, s),
        );
    }
    init_transformer_stack(
        store,
        prefix,
        cfg.embed_dim,
        cfg.num_layers,
        cfg.feedforward_dim,
        rng,
    );
    store.insert(
        &format!("{prefix}.out.w"),
        uniform(rng, cfg.embed_dim, cfg.output_dim, s),
    );
    store.insert(&format!("{prefix}.out.b"), Tensor::zeros(&[1, cfg.output_dim]));
}

/// Scaled dot-product attention: softmax(QKᵀ/√d_k)V.
pub fn scaled_dot_attention(
    tape: &mut Tape,
    q: NodeId,
    k: NodeId,
    v: NodeId,
) -> Result<NodeId, AutodiffError> {
    let d_k = tape.value(q).cols();
    if tape.value(k).cols() != d_k {
        return Err(AutodiffError::ShapeMismatch {
            op: "scaled_dot_attention",
            detail: format!("Q has {} cols, K has {}", d_k, tape.value(k).cols()),
        });
    }
    if tape.value(k).rows() != tape.value(v).rows() {
        return Err(AutodiffError::ShapeMismatch {
            op: "scaled_dot_attention",
            detail: format!(
                "K has {} rows, V has {}",
                tape.value(k).rows(),
                tape.value(v).rows()
            ),
        });
    }
    let kt = tape.transpose(k);
    let logits = tape.matmul(q, kt)?;
    let scaled = tape.scale(logits, 1.0 / (d_k as f64).sqrt());
    let weights = tape.softmax(scaled);
    tape.matmul(weights, v)
}

fn multi_head_attention(
    tape: &mut Tape,
    node: &impl Fn(&str) -> NodeId,
    x: NodeId,
    dim: usize,
    num_heads: usize,
) -> Result<NodeId, AutodiffError> {
    let q = tape.matmul(x, node("wq"))?;
    let k = tape.matmul(x, node("wk"))?;
    let v = tape.matmul(x, node("wv"))?;
    let head_dim = dim / num_heads;
    let mut heads = Vec::with_capacity(num_heads);
    for h in 0..num_heads {
        let qh = tape.slice_cols(q, h * head_dim, head_dim)?;
        let kh = tape.slice_cols(k, h * head_dim, head_dim)?;
        let vh = tape.slice_cols(v, h * head_dim, head_dim)?;
        heads.push(scaled_dot_attention(tape, qh, kh, vh)?);
    }
    let merged = tape.concat_cols(&heads)?;
    tape.matmul(merged, node("wo"))
}

/// One pre-norm transformer block: x + MHA(LN(x)), then x + FF(LN(x)) with a
/// tanh nonlinearity in the feedforward.
fn transformer_layer(
    tape: &mut Tape,
    binding: &crate::autodiff::Binding,
    prefix: &str,
    x: NodeId,
    dim: usize,
    num_heads: usize,
) -> Result<NodeId, AutodiffError> {
    let node = |suffix: &str| binding.node(&format!("{prefix}.{suffix}"));
    let normed = tape.layer_norm(x, node("ln1.g"), node("ln1.b"))?;
    let attn = multi_head_attention(tape, &node, normed, dim, num_heads)?;
    let x = tape.add(x, attn)?;
    let normed = tape.layer_norm(x, node("ln2.g"), node("ln2.b"))?;
    let h = tape.matmul(normed, node("ff.w1"))?;
    let h = tape.add_row(h, node("ff.b1"))?;
    let h = tape.tanh(h);
    let h = tape.matmul(h, node("ff.w2"))?;
    let h = tape.add_row(h, node("ff.b2"))?;
    tape.add(x, h)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    Mean,
    Leading,
}

/// Encode a token-id sequence to a pooled [1, model_dim] representation.
/// Sequences longer than `max_sequence_length` are truncated.
pub fn encode_tokens(
    tape: &mut Tape,
    binding: &crate::autodiff::Binding,
    prefix: &str,
    cfg: &EncoderConfig,
    tokens: &[usize],
    pooling: Pooling,
) -> Result<NodeId, ModelError> {
    if tokens.is_empty() {
        return Err(ModelError::EmptyDocument);
    }
    let tokens = &tokens[..tokens.len().min(cfg.max_sequence_length)];
    let emb = tape.embed(binding.node(&format!("{prefix}.emb")), tokens)?;
    let pos = tape.slice_rows(binding.node(&format!("{prefix}.pos")), 0, tokens.len())?;
    let mut x = tape.add(emb, pos)?;
    for l in 0..cfg.num_layers {
        x = transformer_layer(
            tape,
            binding,
            &format!("{prefix}.l{l}"),
            x,
            cfg.model_dim,
            cfg.num_heads,
        )?;
    }
    let pooled = match pooling {
        Pooling::Mean => tape.mean_rows(x),
        Pooling::Leading => tape.slice_rows(x, 0, 1)?,
    };
    Ok(pooled)
}

/// Buckets per factor: integers 0..=5 after clamping and rounding.
pub const NUM_BUCKETS: usize = 6;

/// Clamp each score to its factor's annotation range and round to the
/// nearest integer bucket.
pub fn bucketize(scores: &[f64; 5]) -> [usize; 5] {
    let mut buckets = [0usize; 5];
    for (i, kind) in FeatureKind::ALL.into_iter().enumerate() {
        let (lo, hi) = kind.score_range();
        let clamped = scores[i].clamp(lo, hi);
        buckets[i] = clamped.round() as usize;
    }
    log::debug!("bucketized {:?} -> {:?}", scores, buckets);
    buckets
}

/// Embed five score buckets (one factor-specific table each), run the
/// transformer stack, mean-pool, and project to V_interm.
pub fn interm_encode(
    tape: &mut Tape,
    binding: &crate::autodiff::Binding,
    prefix: &str,
    cfg: &IntermConfig,
    buckets: &[usize; 5],
) -> Result<NodeId, ModelError> {
    let mut rows = Vec::with_capacity(5);
    for (i, &b) in buckets.iter().enumerate() {
        debug_assert!(b < NUM_BUCKETS);
        rows.push(tape.embed(binding.node(&format!("{prefix}.fac{i}.emb")), &[b])?);
    }
    let mut x = tape.concat_rows(&rows)?;
    for l in 0..cfg.num_layers {
        x = transformer_layer(
            tape,
            binding,
            &format!("{prefix}.l{l}"),
            x,
            cfg.embed_dim,
            cfg.num_heads,
        )?;
    }
    let pooled = tape.mean_rows(x);
    let out = tape.matmul(pooled, binding.node(&format!("{prefix}.out.w")))?;
    Ok(tape.add_row(out, binding.node(&format!("{prefix}.out.b")))?)
}
