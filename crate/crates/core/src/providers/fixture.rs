//! Deterministic, stateless stand-ins for real model backends.
//!
//! Outputs depend only on their inputs; the hashing is spelled out here rather
//! than borrowed from `std` so results stay stable across toolchains.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    EmbeddingVector, Embedder, GenerationRequest, GenerationSample, Generator, NliClassifier,
    NliLabel, NliVerdict,
};
use crate::error::{Error, Result};
use crate::metrics::tokenize;

pub const FIXTURE_EMBEDDING_DIM: usize = 64;

/// Words whose presence on exactly one side of an NLI pair signals contradiction.
pub const NEGATION_WORDS: [&str; 4] = ["not", "no", "never", "cannot"];

/// Containment ratio at or above which the fixture NLI answers Entailment.
pub const ENTAILMENT_CONTAINMENT: f64 = 0.7;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Embeds text as the L2-normalized sum of per-token pseudo-random vectors.
#[derive(Debug, Clone)]
pub struct FixtureEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl Default for FixtureEmbedder {
    fn default() -> Self {
        Self {
            dim: FIXTURE_EMBEDDING_DIM,
            seed: 0,
        }
    }
}

impl FixtureEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed }
    }

    /// Components in `[-1, 1]`, a pure function of the token bytes and the seed.
    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut state = fnv1a(token.as_bytes()) ^ self.seed.rotate_left(17);
        (0..self.dim)
            .map(|_| {
                let bits = splitmix64(&mut state) >> 11;
                bits as f64 / (1u64 << 52) as f64 - 1.0
            })
            .collect()
    }

    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::InvalidInput(format!(
                "cannot embed text without tokens: {text:?}"
            )));
        }
        let mut sum = vec![0.0; self.dim];
        for token in tokens.iter() {
            for (acc, v) in sum.iter_mut().zip(self.token_vector(token)) {
                *acc += v;
            }
        }
        EmbeddingVector::normalized(sum)
    }
}

impl Embedder for FixtureEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        texts.iter().map(|t| self.embed_text(t)).collect()
    }
}

/// Token-containment NLI with a negation-mismatch rule.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixtureNli;

impl FixtureNli {
    pub fn classify(premise: &str, hypothesis: &str) -> Result<NliVerdict> {
        if premise.trim().is_empty() || hypothesis.trim().is_empty() {
            return Err(Error::InvalidInput("nli needs a non-empty premise and hypothesis".into()));
        }
        let prem: HashSet<String> = tokenize(premise).tokens.into_iter().collect();
        let hyp: HashSet<String> = tokenize(hypothesis).tokens.into_iter().collect();
        let negated = |set: &HashSet<String>| NEGATION_WORDS.iter().any(|w| set.contains(*w));
        if negated(&prem) != negated(&hyp) {
            return Ok(NliVerdict {
                label: NliLabel::Contradiction,
                confidence: 1.0,
            });
        }
        let ratio = if hyp.is_empty() {
            0.0
        } else {
            hyp.intersection(&prem).count() as f64 / hyp.len() as f64
        };
        Ok(if ratio >= ENTAILMENT_CONTAINMENT {
            NliVerdict {
                label: NliLabel::Entailment,
                confidence: ratio,
            }
        } else {
            NliVerdict {
                label: NliLabel::Neutral,
                confidence: 1.0 - ratio,
            }
        })
    }
}

impl NliClassifier for FixtureNli {
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict> {
        Self::classify(premise, hypothesis)
    }
}

const FILLER: &[&str] = &[
    "lattice", "phase", "grain", "oxide", "alloy", "crystal", "defect", "boundary", "thermal",
    "stress", "strain", "dopant", "carbide", "nitride", "ceramic", "polymer", "interface",
    "vacancy", "diffusion", "anneal", "coating", "fracture", "ductile", "brittle",
];

const STOPWORDS: &[&str] = &[
    "what", "which", "how", "why", "when", "where", "who", "does", "do", "is", "are", "the", "a",
    "an", "of",
];

/// Toy generator: echoes the salient prompt words, replacing each with a filler
/// word with probability `min(0.9, 0.4 · temperature)`.
#[derive(Debug, Clone, Default)]
pub struct FixtureGenerator;

impl FixtureGenerator {
    fn sample(prompt: &str, temperature: f64, seed: u64, index: usize) -> GenerationSample {
        let mut key = Vec::with_capacity(prompt.len() + 24);
        key.extend_from_slice(prompt.as_bytes());
        key.extend_from_slice(&temperature.to_bits().to_le_bytes());
        key.extend_from_slice(&seed.to_le_bytes());
        key.extend_from_slice(&(index as u64).to_le_bytes());
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(&key));

        let mut words: Vec<String> = tokenize(prompt)
            .tokens
            .into_iter()
            .filter(|t| !STOPWORDS.contains(&t.as_str()))
            .collect();
        if words.is_empty() {
            words.push("unknown".into());
        }
        let swap = (0.4 * temperature).min(0.9);
        let mut probs = Vec::with_capacity(words.len());
        for word in &mut words {
            if rng.gen_bool(swap) {
                *word = FILLER[rng.gen_range(0..FILLER.len())].to_string();
                probs.push(rng.gen_range(0.1..0.6));
            } else {
                probs.push(rng.gen_range(0.7..=1.0));
            }
        }
        let mut text = words.join(" ");
        if let Some(first) = text.get(..1) {
            let upper = first.to_uppercase();
            text.replace_range(..1, &upper);
        }
        text.push('.');
        GenerationSample {
            text,
            token_probs: probs,
        }
    }
}

impl Generator for FixtureGenerator {
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<GenerationSample>> {
        request.validate()?;
        Ok((0..request.sample_count)
            .map(|i| Self::sample(&request.prompt, request.temperature, request.seed, i))
            .collect())
    }
}
