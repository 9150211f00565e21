//! Okapi BM25 over window chunks.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::chunk::EvidenceChunk;
use crate::error::{Error, Result};
use crate::metrics::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Params {
    /// Term-frequency saturation.
    pub k1: f64,
    /// Length normalization strength.
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.5, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(Error::Config(format!("bm25 k1 must be > 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!("bm25 b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// Document-frequency statistics over the ranked chunk population.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub doc_count: usize,
    pub doc_freq: HashMap<String, usize>,
    pub avg_len: f64,
}

impl CorpusStats {
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut doc_count = 0usize;
        let mut total_len = 0usize;
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        for text in texts {
            let tokens = tokenize(text).tokens;
            doc_count += 1;
            total_len += tokens.len();
            let unique: HashSet<String> = tokens.into_iter().collect();
            for term in unique {
                *doc_freq.entry(term).or_insert(0) += 1;
            }
        }
        let avg_len = if doc_count == 0 {
            0.0
        } else {
            total_len as f64 / doc_count as f64
        };
        Self {
            doc_count,
            doc_freq,
            avg_len,
        }
    }

    pub fn from_chunks<'a>(chunks: impl IntoIterator<Item = &'a EvidenceChunk>) -> Self {
        Self::from_texts(chunks.into_iter().map(|c| c.text.as_str()))
    }

    /// `ln((N − n(t) + 0.5) / (n(t) + 0.5) + 1)`, never negative.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        let big_n = self.doc_count as f64;
        ((big_n - n + 0.5) / (n + 0.5) + 1.0).ln()
    }
}

/// BM25 score of `text` for `query`. Every query token occurrence contributes,
/// so repeated query terms count repeatedly.
pub fn bm25_score(text: &str, query: &str, params: &Bm25Params, stats: &CorpusStats) -> Result<f64> {
    if stats.doc_count == 0 || stats.avg_len <= 0.0 {
        return Err(Error::InvalidInput("bm25 needs statistics from a non-empty corpus".into()));
    }
    let doc = tokenize(text).tokens;
    let mut tf: HashMap<&str, usize> = HashMap::new();
    for t in &doc {
        *tf.entry(t.as_str()).or_insert(0) += 1;
    }
    let norm = params.k1 * (1.0 - params.b + params.b * doc.len() as f64 / stats.avg_len);
    let mut score = 0.0;
    for term in tokenize(query).tokens {
        let f = tf.get(term.as_str()).copied().unwrap_or(0) as f64;
        if f == 0.0 {
            continue;
        }
        score += stats.idf(&term) * f * (params.k1 + 1.0) / (f + norm);
    }
    Ok(score)
}

/// A retrieved chunk with both of its scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEvidence {
    pub chunk_id: usize,
    pub document_id: String,
    pub text: String,
    pub cosine: f64,
    pub bm25: f64,
}

/// Stable sort of cosine-ranked candidates by BM25, descending. Equal BM25
/// scores keep their cosine order.
pub fn rerank(
    candidates: &[(&EvidenceChunk, f64)],
    query: &str,
    params: &Bm25Params,
    stats: &CorpusStats,
) -> Result<Vec<RankedEvidence>> {
    let mut ranked = candidates
        .iter()
        .map(|(chunk, cosine)| {
            Ok(RankedEvidence {
                chunk_id: chunk.chunk_id,
                document_id: chunk.document_id.clone(),
                text: chunk.text.clone(),
                cosine: *cosine,
                bm25: bm25_score(&chunk.text, query, params, stats)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| b.bm25.total_cmp(&a.bm25));
    Ok(ranked)
}
