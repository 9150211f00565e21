//! Replay of recorded backend replies, keyed by [`request_hash`].

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::wire::{request_hash, Transport};
use crate::error::{Error, Result};

/// One line of a replay file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecording {
    pub request_hash: String,
    pub response_body: Value,
}

impl ReplayRecording {
    pub fn new(endpoint: &str, request: &Value, response_body: Value) -> Self {
        Self {
            request_hash: request_hash(endpoint, request),
            response_body,
        }
    }
}

/// Answers requests from a recording. Misses go to `fallback` when set,
/// otherwise they are protocol errors.
pub struct ReplayTransport {
    entries: HashMap<String, Value>,
    fallback: Option<Arc<dyn Transport>>,
}

impl ReplayTransport {
    pub fn new(recordings: Vec<ReplayRecording>) -> Self {
        Self {
            entries: recordings
                .into_iter()
                .map(|r| (r.request_hash, r.response_body))
                .collect(),
            fallback: None,
        }
    }

    pub fn with_fallback(mut self, fallback: Arc<dyn Transport>) -> Self {
        self.fallback = Some(fallback);
        self
    }

    pub fn parse(text: &str) -> Result<Vec<ReplayRecording>> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::MalformedRecord {
                    line: i + 1,
                    message: format!("replay entry: {e}"),
                })
            })
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(Self::parse(&text)?))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn write_recordings(recordings: &[ReplayRecording]) -> Result<String> {
    let mut out = String::new();
    for r in recordings {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

impl Transport for ReplayTransport {
    fn call(&self, endpoint: &str, body: &Value) -> Result<Value> {
        let key = request_hash(endpoint, body);
        match (self.entries.get(&key), &self.fallback) {
            (Some(reply), _) => Ok(reply.clone()),
            (None, Some(fallback)) => fallback.call(endpoint, body),
            (None, None) => Err(Error::Protocol(format!(
                "no recording for {endpoint} request {key}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::wire::{FixtureTransport, RemoteProvider, GENERATE};
    use crate::providers::{GenerationRequest, GenerationSample, Generator};

    fn request() -> GenerationRequest {
        GenerationRequest {
            prompt: "What is the band gap of TiO2?".into(),
            temperature: 0.7,
            sample_count: 1,
            seed: 5,
        }
    }

    #[test]
    fn recorded_text_is_returned() {
        let req = request();
        let recorded = vec![GenerationSample {
            text: "TiO2 has a band gap of 3.2 eV.".into(),
            token_probs: vec![0.9; 8],
        }];
        let body = serde_json::to_value(&req).unwrap();
        let entry = ReplayRecording::new(
            GENERATE,
            &body,
            serde_json::json!({ "samples": recorded }),
        );
        let file = write_recordings(&[entry]).unwrap();
        let provider = RemoteProvider::new(ReplayTransport::new(ReplayTransport::parse(&file).unwrap()));
        assert_eq!(provider.generate(&req).unwrap(), recorded);

        let mut miss = req.clone();
        miss.seed = 6;
        assert!(matches!(provider.generate(&miss), Err(Error::Protocol(_))));
    }

    #[test]
    fn misses_fall_back_when_configured() {
        let transport = ReplayTransport::new(vec![]).with_fallback(Arc::new(FixtureTransport::default()));
        let provider = RemoteProvider::new(transport);
        assert_eq!(provider.generate(&request()).unwrap().len(), 1);
    }

    #[test]
    fn malformed_replay_line_is_reported() {
        let err = ReplayTransport::parse("{\"request_hash\":\"x\",\"response_body\":1}\nnope").unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { line: 2, .. }));
    }
}
