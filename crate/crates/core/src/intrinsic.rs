//! Reliability signals computed from the model's own outputs, without
//! consulting any external evidence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fragments::FactFragment;
use crate::providers::{
    EmbeddingVector, Embedder, GenerationRequest, Generator, NliClassifier, NliLabel,
};

/// Entropy at which the entropy term bottoms out (ten equiprobable clusters).
pub const ENTROPY_CAP: f64 = std::f64::consts::LN_10;
/// Largest possible variance of values in `[0, 1]`.
pub const VARIANCE_CAP: f64 = 0.25;

/// Mean pairwise cosine over all unordered pairs, clamped to `[0, 1]`.
/// A single embedding is perfectly self-consistent.
pub fn self_consistency_of(embeddings: &[EmbeddingVector]) -> Result<f64> {
    if embeddings.is_empty() {
        return Err(Error::InvalidInput("self-consistency needs at least one sample".into()));
    }
    if embeddings.len() == 1 {
        return Ok(1.0);
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..embeddings.len() {
        for j in (i + 1)..embeddings.len() {
            sum += embeddings[i].cosine(&embeddings[j])?;
            pairs += 1;
        }
    }
    Ok((sum / pairs as f64).clamp(0.0, 1.0))
}

pub fn self_consistency(texts: &[&str], embedder: &dyn Embedder) -> Result<f64> {
    if texts.is_empty() {
        return Err(Error::InvalidInput("self-consistency needs at least one sample".into()));
    }
    self_consistency_of(&embedder.embed(texts)?)
}

/// Population variance of token probabilities; 0 for an empty sequence.
pub fn confidence_variance(token_probs: &[f64]) -> f64 {
    if token_probs.is_empty() {
        return 0.0;
    }
    let n = token_probs.len() as f64;
    let mean = token_probs.iter().sum::<f64>() / n;
    token_probs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n
}

/// Greedy clustering: each embedding joins the first cluster whose first member
/// has cosine ≥ `threshold` with it, else starts a new cluster. Returns cluster
/// sizes in creation order.
pub fn cluster_sizes(embeddings: &[EmbeddingVector], threshold: f64) -> Result<Vec<usize>> {
    let mut representatives: Vec<&EmbeddingVector> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    'outer: for e in embeddings {
        for (rep, size) in representatives.iter().zip(sizes.iter_mut()) {
            if rep.cosine(e)? >= threshold {
                *size += 1;
                continue 'outer;
            }
        }
        representatives.push(e);
        sizes.push(1);
    }
    Ok(sizes)
}

/// Shannon entropy (nats) of a cluster-size distribution.
pub fn entropy_of_sizes(sizes: &[usize]) -> f64 {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let h = -sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n as f64;
            p * p.ln()
        })
        .sum::<f64>();
    h.max(0.0)
}

pub fn semantic_entropy_of(embeddings: &[EmbeddingVector], cluster_threshold: f64) -> Result<f64> {
    if embeddings.is_empty() {
        return Err(Error::InvalidInput("semantic entropy needs at least one sample".into()));
    }
    Ok(entropy_of_sizes(&cluster_sizes(embeddings, cluster_threshold)?))
}

pub fn semantic_entropy(
    texts: &[&str],
    embedder: &dyn Embedder,
    cluster_threshold: f64,
) -> Result<f64> {
    if texts.is_empty() {
        return Err(Error::InvalidInput("semantic entropy needs at least one sample".into()));
    }
    semantic_entropy_of(&embedder.embed(texts)?, cluster_threshold)
}

/// Largest `1 − cosine` between any two embeddings; 0 with fewer than two.
pub fn max_pairwise_drift(embeddings: &[EmbeddingVector]) -> Result<f64> {
    let mut drift: f64 = 0.0;
    for i in 0..embeddings.len() {
        for j in (i + 1)..embeddings.len() {
            drift = drift.max(1.0 - embeddings[i].cosine(&embeddings[j])?);
        }
    }
    Ok(drift.clamp(0.0, 2.0))
}

/// Generates one answer per temperature (same seed each time) and returns the
/// texts in temperature order.
pub fn refinement_samples(
    query: &str,
    generator: &dyn Generator,
    temperatures: &[f64],
    seed: u64,
) -> Result<Vec<String>> {
    if temperatures.len() < 2 {
        return Err(Error::InvalidInput(
            "refinement drift needs at least two temperatures".into(),
        ));
    }
    temperatures
        .iter()
        .map(|&temperature| {
            let mut samples = generator.generate(&GenerationRequest {
                prompt: query.to_string(),
                temperature,
                sample_count: 1,
                seed,
            })?;
            samples
                .pop()
                .map(|s| s.text)
                .ok_or_else(|| Error::Protocol("generator returned no sample".into()))
        })
        .collect()
}

pub fn refinement_drift(
    query: &str,
    generator: &dyn Generator,
    temperatures: &[f64],
    embedder: &dyn Embedder,
    seed: u64,
) -> Result<f64> {
    let texts = refinement_samples(query, generator, temperatures, seed)?;
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    max_pairwise_drift(&embedder.embed(&refs)?)
}

/// Fraction of ordered fragment pairs `(i, j)`, `i ≠ j`, that the NLI backend
/// labels Contradiction. Fewer than two fragments gives 0.
pub fn internal_contradictions(fragments: &[FactFragment], nli: &dyn NliClassifier) -> Result<f64> {
    if fragments.len() < 2 {
        return Ok(0.0);
    }
    let mut contradicted = 0usize;
    let mut total = 0usize;
    for (i, premise) in fragments.iter().enumerate() {
        for (j, hypothesis) in fragments.iter().enumerate() {
            if i == j {
                continue;
            }
            total += 1;
            if nli.nli(&premise.text, &hypothesis.text)?.label == NliLabel::Contradiction {
                contradicted += 1;
            }
        }
    }
    Ok(contradicted as f64 / total as f64)
}

/// Aggregation weights, in component order: self-consistency, entropy,
/// confidence variance, refinement drift, internal contradictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntrinsicWeights(pub [f64; 5]);

impl Default for IntrinsicWeights {
    fn default() -> Self {
        Self([0.35, 0.20, 0.10, 0.10, 0.25])
    }
}

impl IntrinsicWeights {
    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(format!(
                "intrinsic weights must be finite and non-negative: {:?}",
                self.0
            )));
        }
        let sum: f64 = self.0.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "intrinsic weights must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Raw intrinsic signals for one response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicComponents {
    pub self_consistency: f64,
    pub confidence_variance: f64,
    pub entropy: f64,
    pub refinement_drift: f64,
    pub internal_contradiction_fraction: f64,
}

impl IntrinsicComponents {
    pub const PERFECT: Self = Self {
        self_consistency: 1.0,
        confidence_variance: 0.0,
        entropy: 0.0,
        refinement_drift: 0.0,
        internal_contradiction_fraction: 0.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicReport {
    pub self_consistency: f64,
    pub confidence_variance: f64,
    pub entropy: f64,
    pub refinement_drift: f64,
    pub internal_contradiction_fraction: f64,
    pub intrinsic_score: f64,
    pub needs_extrinsic: bool,
}

/// Folds the five signals into one score in `[0, 1]`; extrinsic verification is
/// requested when the score is strictly below `fallback_threshold`.
pub fn intrinsic_score(
    c: &IntrinsicComponents,
    weights: &IntrinsicWeights,
    fallback_threshold: f64,
) -> Result<IntrinsicReport> {
    weights.validate()?;
    let [w_sc, w_h, w_var, w_drift, w_contra] = weights.0;
    let score = w_sc * c.self_consistency.clamp(0.0, 1.0)
        + w_h * (1.0 - (c.entropy / ENTROPY_CAP).min(1.0))
        + w_var * (1.0 - (c.confidence_variance / VARIANCE_CAP).min(1.0))
        + w_drift * (1.0 - c.refinement_drift.clamp(0.0, 2.0) / 2.0)
        + w_contra * (1.0 - c.internal_contradiction_fraction.clamp(0.0, 1.0));
    let score = score.clamp(0.0, 1.0);
    Ok(IntrinsicReport {
        self_consistency: c.self_consistency,
        confidence_variance: c.confidence_variance,
        entropy: c.entropy,
        refinement_drift: c.refinement_drift,
        internal_contradiction_fraction: c.internal_contradiction_fraction,
        intrinsic_score: score,
        needs_extrinsic: score < fallback_threshold,
    })
}
