//! JSON wire protocol shared by the HTTP client, the replay store, and the
//! in-process fixture server.
//!
//! | endpoint    | request                                          | response                                  |
//! |-------------|--------------------------------------------------|-------------------------------------------|
//! | `/generate` | `{prompt, temperature, sample_count, seed}`      | `{samples: [{text, token_probs}]}`        |
//! | `/embed`    | `{texts: [..]}`                                  | `{embeddings: [[f64; dim]]}`              |
//! | `/nli`      | `{premise, hypothesis}`                          | `{label, confidence}`                     |

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{
    EmbeddingVector, Embedder, FixtureEmbedder, FixtureGenerator, FixtureNli, GenerationRequest,
    GenerationSample, Generator, NliClassifier, NliVerdict,
};
use crate::error::{Error, Result};

pub const GENERATE: &str = "/generate";
pub const EMBED: &str = "/embed";
pub const NLI: &str = "/nli";

/// Something that answers wire requests.
pub trait Transport: Send + Sync {
    fn call(&self, endpoint: &str, body: &Value) -> Result<Value>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub samples: Vec<GenerationSample>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embeddings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NliRequest {
    pub premise: String,
    pub hypothesis: String,
}

/// Stable key for a request: SHA-256 over `endpoint`, a newline, and the
/// request body as compact JSON with sorted keys.
pub fn request_hash(endpoint: &str, body: &Value) -> String {
    // serde_json::Value keeps object keys sorted, so this is canonical.
    let canonical = serde_json::to_string(body).expect("Value serialization is infallible");
    let mut hasher = Sha256::new();
    hasher.update(endpoint.as_bytes());
    hasher.update(b"\n");
    hasher.update(canonical.as_bytes());
    hex::encode(hasher.finalize())
}

fn decode<T: for<'de> Deserialize<'de>>(endpoint: &str, value: Value) -> Result<T> {
    serde_json::from_value(value)
        .map_err(|e| Error::Protocol(format!("malformed {endpoint} reply: {e}")))
}

fn encode<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("wire types always serialize")
}

/// Implements the provider traits on top of any [`Transport`], validating replies.
pub struct RemoteProvider<T> {
    transport: T,
}

impl<T: Transport> RemoteProvider<T> {
    pub fn new(transport: T) -> Self {
        Self { transport }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }
}

impl<T: Transport> Generator for RemoteProvider<T> {
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<GenerationSample>> {
        request.validate()?;
        let reply: GenerateResponse =
            decode(GENERATE, self.transport.call(GENERATE, &encode(request))?)?;
        if reply.samples.len() != request.sample_count {
            return Err(Error::Protocol(format!(
                "asked for {} samples, got {}",
                request.sample_count,
                reply.samples.len()
            )));
        }
        for sample in &reply.samples {
            if sample.token_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Protocol("token probability outside [0, 1]".into()));
            }
        }
        Ok(reply.samples)
    }
}

impl<T: Transport> Embedder for RemoteProvider<T> {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(Error::InvalidInput(format!("text {i} is empty")));
        }
        let body = encode(&EmbedRequest {
            texts: texts.iter().map(|t| t.to_string()).collect(),
        });
        let reply: EmbedResponse = decode(EMBED, self.transport.call(EMBED, &body)?)?;
        if reply.embeddings.len() != texts.len() {
            return Err(Error::Protocol(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                reply.embeddings.len()
            )));
        }
        reply
            .embeddings
            .into_iter()
            .map(|v| {
                EmbeddingVector::normalized(v)
                    .map_err(|e| Error::Protocol(format!("bad embedding: {e}")))
            })
            .collect()
    }
}

impl<T: Transport> NliClassifier for RemoteProvider<T> {
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict> {
        let body = encode(&NliRequest {
            premise: premise.into(),
            hypothesis: hypothesis.into(),
        });
        let verdict: NliVerdict = decode(NLI, self.transport.call(NLI, &body)?)?;
        if !(0.0..=1.0).contains(&verdict.confidence) {
            return Err(Error::Protocol(format!(
                "nli confidence {} outside [0, 1]",
                verdict.confidence
            )));
        }
        Ok(verdict)
    }
}

/// Serves the wire protocol from the fixture backends, in-process.
#[derive(Debug, Clone, Default)]
pub struct FixtureTransport {
    pub generator: FixtureGenerator,
    pub embedder: FixtureEmbedder,
}

impl Transport for FixtureTransport {
    fn call(&self, endpoint: &str, body: &Value) -> Result<Value> {
        let bad = |e: serde_json::Error| Error::InvalidInput(format!("{endpoint}: {e}"));
        match endpoint {
            GENERATE => {
                let req: GenerationRequest = serde_json::from_value(body.clone()).map_err(bad)?;
                Ok(encode(&GenerateResponse {
                    samples: self.generator.generate(&req)?,
                }))
            }
            EMBED => {
                let req: EmbedRequest = serde_json::from_value(body.clone()).map_err(bad)?;
                let texts: Vec<&str> = req.texts.iter().map(String::as_str).collect();
                let embeddings = self
                    .embedder
                    .embed(&texts)?
                    .into_iter()
                    .map(|v| v.values().to_vec())
                    .collect();
                Ok(encode(&EmbedResponse { embeddings }))
            }
            NLI => {
                let req: NliRequest = serde_json::from_value(body.clone()).map_err(bad)?;
                Ok(encode(&FixtureNli::classify(&req.premise, &req.hypothesis)?))
            }
            other => Err(Error::Protocol(format!("unknown endpoint {other}"))),
        }
    }
}
