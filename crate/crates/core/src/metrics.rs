//! Lexical and vector similarity metrics.
//!
//! All lexical metrics share [`tokenize`], so BLEU, ROUGE-L and BM25 see the
//! same term boundaries.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowercased word tokens in text order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

/// Splits on every run of non-alphanumeric characters and lowercases.
pub fn tokenize(text: &str) -> TokenSequence {
    TokenSequence {
        tokens: token_spans(text)
            .into_iter()
            .map(|(s, e)| text[s..e].to_lowercase())
            .collect(),
    }
}

/// Byte spans `[start, end)` of each token in `text`.
pub fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

/// Cosine similarity of two raw vectors. Errors on a zero vector or a length mismatch.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidInput(format!(
            "cosine of vectors with different dimensions ({} vs {})",
            u.len(),
            v.len()
        )));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::InvalidInput("cosine of a zero vector".into()));
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Sentence BLEU without smoothing.
///
/// Geometric mean of clipped n-gram precisions for `n = 1..=min(max_n, |cand|)`
/// times the brevity penalty. Any zero precision gives 0.
pub fn bleu(candidate: &str, reference: &str, max_n: usize) -> f64 {
    let cand = tokenize(candidate).tokens;
    let refr = tokenize(reference).tokens;
    if cand.is_empty() || max_n == 0 {
        return 0.0;
    }
    let orders = max_n.min(cand.len());
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let cand_counts = ngram_counts(&cand, n);
        let ref_counts = ngram_counts(&refr, n);
        let clipped: usize = cand_counts
            .iter()
            .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
            .sum();
        if clipped == 0 {
            return 0.0;
        }
        let total = cand.len() + 1 - n;
        log_sum += (clipped as f64 / total as f64).ln();
    }
    let brevity = (1.0 - refr.len() as f64 / cand.len() as f64).min(0.0);
    (log_sum / orders as f64 + brevity).exp()
}

/// BLEU with the conventional `max_n = 4`.
pub fn bleu4(candidate: &str, reference: &str) -> f64 {
    bleu(candidate, reference, 4)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// ROUGE-L over [`tokenize`]d text, β = 1.
pub fn rouge_l(candidate: &str, reference: &str) -> RougeScore {
    let cand = tokenize(candidate).tokens;
    let refr = tokenize(reference).tokens;
    let lcs = lcs_len(&cand, &refr) as f64;
    let precision = if cand.is_empty() { 0.0 } else { lcs / cand.len() as f64 };
    let recall = if refr.is_empty() { 0.0 } else { lcs / refr.len() as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    RougeScore {
        precision,
        recall,
        f1,
    }
}

/// Longest common subsequence length, two-row DP.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
