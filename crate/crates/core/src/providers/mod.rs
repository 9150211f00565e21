//! Model backends: response generation, text embedding, and NLI.
//!
//! Every backend speaks the same JSON wire format (see [`wire`]), whether it is
//! reached over HTTP, replayed from a recording, or served in-process by the
//! deterministic fixtures.

pub mod fixture;
pub mod http;
pub mod replay;
pub mod wire;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fixture::{FixtureEmbedder, FixtureGenerator, FixtureNli};
pub use http::HttpTransport;
pub use replay::{ReplayRecording, ReplayTransport};
pub use wire::{FixtureTransport, RemoteProvider, Transport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub temperature: f64,
    pub sample_count: usize,
    pub seed: u64,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::InvalidInput("sample_count must be at least 1".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSample {
    pub text: String,
    pub token_probs: Vec<f64>,
}

/// A unit-norm embedding. Zero vectors cannot be constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// L2-normalizes `values`. Errors on an empty, zero, or non-finite vector.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("embedding has non-finite entries".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidInput("zero embedding vector".into()));
        }
        Ok(Self {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn cosine(&self, other: &EmbeddingVector) -> Result<f64> {
        crate::metrics::cosine(&self.values, &other.values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradiction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliVerdict {
    pub label: NliLabel,
    pub confidence: f64,
}

pub trait Generator: Send + Sync {
    /// Returns exactly `request.sample_count` samples.
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<GenerationSample>>;
}

pub trait Embedder: Send + Sync {
    /// One unit vector per input text. Empty texts are an error.
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector> {
        let mut out = self.embed(&[text])?;
        out.pop()
            .ok_or_else(|| Error::Protocol("embedder returned no vectors".into()))
    }
}

pub trait NliClassifier: Send + Sync {
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict>;
}

/// The three backends the pipeline talks to.
#[derive(Clone)]
pub struct Providers {
    pub generator: Arc<dyn Generator>,
    pub embedder: Arc<dyn Embedder>,
    pub nli: Arc<dyn NliClassifier>,
}

impl Providers {
    /// All-fixture providers with the default seeds and a 64-dim embedder.
    pub fn fixture() -> Self {
        Self {
            generator: Arc::new(FixtureGenerator),
            embedder: Arc::new(FixtureEmbedder::default()),
            nli: Arc::new(FixtureNli),
        }
    }
}

impl std::fmt::Debug for Providers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Providers").finish_non_exhaustive()
    }
}
