//! Tokenization, TF-IDF vectorization, cosine similarity, and top-k sentence
//! retrieval backing the augmentation extraction step.
//!
//! The idf is smoothed: idf(t) = ln((1 + N) / (1 + df(t))) + 1, and every
//! non-zero vector is L2-normalized. That formula is the test oracle.

use std::collections::BTreeMap;
use std::io::Write;

#[derive(Debug, thiserror::Error)]
pub enum TextsimError {
    #[error("cannot fit TF-IDF on an all-empty corpus")]
    EmptyCorpus,
}

/// Term space fitted over a sentence corpus.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    index: BTreeMap<String, usize>,
    document_frequency: Vec<usize>,
    document_count: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn document_count(&self) -> usize {
        self.document_count
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    fn idf(&self, index: usize) -> f64 {
        let n = self.document_count as f64;
        let df = self.document_frequency[index] as f64;
        ((1.0 + n) / (1.0 + df)).ln() + 1.0
    }

    /// Plain-text `term<TAB>df` export for inspection.
    pub fn export<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (term, &i) in &self.index {
            writeln!(w, "{}\t{}", term, self.document_frequency[i])?;
        }
        Ok(())
    }
}

/// Sorted sparse (index, weight) pairs with no explicit zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn from_entries(mut entries: Vec<(usize, f64)>) -> Self {
        entries.retain(|&(_, w)| w != 0.0);
        entries.sort_by_key(|&(i, _)| i);
        Self { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt()
    }

    fn l2_normalized(self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self;
        }
        Self {
            entries: self.entries.into_iter().map(|(i, w)| (i, w / n)).collect(),
        }
    }
}

/// Lowercased, Unicode-aware word tokens with punctuation stripped.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Rule-based sentence splitter: break on sentence-final punctuation followed
/// by whitespace. Legal text is well punctuated, so this suffices.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(ch) = chars.next() {
        current.push(ch);
        if matches!(ch, '.' | '!' | '?') && chars.peek().is_none_or(|c| c.is_whitespace()) {
            let s = current.trim().to_string();
            if !s.is_empty() {
                sentences.push(s);
            }
            current.clear();
        }
    }
    let s = current.trim().to_string();
    if !s.is_empty() {
        sentences.push(s);
    }
    sentences
}

/// Fit a vocabulary and return the (L2-normalized) training vectors.
pub fn fit_tfidf(sentences: &[Vec<String>]) -> Result<(Vocabulary, Vec<SparseVector>), TextsimError> {
    if sentences.is_empty() || sentences.iter().all(|s| s.is_empty()) {
        return Err(TextsimError::EmptyCorpus);
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for sent in sentences {
        let mut seen: Vec<&String> = sent.iter().collect();
        seen.sort();
        seen.dedup();
        for term in seen {
            *df.entry(term.clone()).or_insert(0) += 1;
        }
    }
    let mut index = BTreeMap::new();
    let mut document_frequency = Vec::with_capacity(df.len());
    for (i, (term, count)) in df.into_iter().enumerate() {
        index.insert(term, i);
        document_frequency.push(count);
    }
    let vocab = Vocabulary {
        index,
        document_frequency,
        document_count: sentences.len(),
    };
    let vectors = sentences.iter().map(|s| transform(&vocab, s)).collect();
    Ok((vocab, vectors))
}

/// TF-IDF transform of one tokenized sentence; unseen terms are ignored.
pub fn transform(vocab: &Vocabulary, sentence: &[String]) -> SparseVector {
    let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
    for term in sentence {
        if let Some(i) = vocab.term_index(term) {
            *tf.entry(i).or_insert(0.0) += 1.0;
        }
    }
    let entries = tf
        .into_iter()
        .map(|(i, count)| (i, count * vocab.idf(i)))
        .collect();
    SparseVector::from_entries(entries).l2_normalized()
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(u: &SparseVector, v: &SparseVector) -> f64 {
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    let mut dot = 0.0;
    let (mut i, mut j) = (0, 0);
    let (ue, ve) = (u.entries(), v.entries());
    while i < ue.len() && j < ve.len() {
        match ue[i].0.cmp(&ve[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += ue[i].1 * ve[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    dot / (nu * nv)
}

/// Top-k corpus entries by cosine, score-descending with ties broken by
/// ascending corpus index.
pub fn top_k_similar(
    query: &SparseVector,
    corpus: &[SparseVector],
    k: usize,
) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = corpus
        .iter()
        .enumerate()
        .map(|(i, v)| (i, cosine(query, v)))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}
