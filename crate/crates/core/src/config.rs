//! Pipeline configuration: one JSON document holding every knob.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intrinsic::IntrinsicWeights;
use crate::providers::{
    Embedder, FixtureEmbedder, FixtureGenerator, FixtureNli, FixtureTransport, Generator,
    HttpTransport, NliClassifier, Providers, RemoteProvider, ReplayTransport, Transport,
};
use crate::retrieval::Bm25Params;
use crate::scoring::{PhcsMode, ReliabilityWeights};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "HALLUDETECT_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntrinsicConfig {
    pub weights: IntrinsicWeights,
    pub fallback_threshold: f64,
    pub cluster_threshold: f64,
    pub temperatures: Vec<f64>,
    /// Samples drawn on top of the record's own response.
    pub sample_count: usize,
    pub sample_temperature: f64,
}

impl Default for IntrinsicConfig {
    fn default() -> Self {
        Self {
            weights: IntrinsicWeights::default(),
            fallback_threshold: 0.7,
            cluster_threshold: 0.9,
            temperatures: vec![0.2, 0.7, 1.0],
            sample_count: 4,
            sample_temperature: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub window_tokens: usize,
    pub overlap_tokens: usize,
    pub k: usize,
    pub top_m: usize,
    pub bm25: Bm25Params,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            window_tokens: 256,
            overlap_tokens: 64,
            k: 10,
            top_m: 3,
            bm25: Bm25Params::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub edge_threshold: f64,
    pub low_sim_threshold: f64,
    pub resolution: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            edge_threshold: 0.55,
            low_sim_threshold: 0.4,
            resolution: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub weights: ReliabilityWeights,
    pub phcs_mode: PhcsMode,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Fixture,
    Http,
    Replay,
}

/// Where one backend comes from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSpec {
    pub kind: ProviderKind,
    /// Base URL for `http`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    /// Recording file for `replay`; relative paths resolve against the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Backend for replay misses; strict replay when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback: Option<Box<ProviderSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeout_ms: Option<u64>,
}

impl ProviderSpec {
    pub fn replay(path: impl Into<PathBuf>) -> Self {
        Self {
            kind: ProviderKind::Replay,
            path: Some(path.into()),
            ..Self::default()
        }
    }

    fn validate(&self, role: &str) -> Result<()> {
        match self.kind {
            ProviderKind::Fixture => Ok(()),
            ProviderKind::Http if self.url.is_none() => {
                Err(Error::Config(format!("providers.{role}: http needs a url")))
            }
            ProviderKind::Http => Ok(()),
            ProviderKind::Replay if self.path.is_none() => {
                Err(Error::Config(format!("providers.{role}: replay needs a path")))
            }
            ProviderKind::Replay => match &self.fallback {
                Some(f) if f.kind == ProviderKind::Replay => Err(Error::Config(format!(
                    "providers.{role}: replay fallback cannot itself be a replay"
                ))),
                Some(f) => f.validate(role),
                None => Ok(()),
            },
        }
    }

    fn transport(&self, base_dir: &Path) -> Result<Arc<dyn Transport>> {
        Ok(match self.kind {
            ProviderKind::Fixture => Arc::new(FixtureTransport::default()),
            ProviderKind::Http => {
                let url = self.url.as_deref().unwrap_or_default();
                let timeout = Duration::from_millis(self.timeout_ms.unwrap_or(30_000));
                Arc::new(HttpTransport::new(url, timeout)?)
            }
            ProviderKind::Replay => {
                let path = self.path.as_deref().unwrap_or(Path::new(""));
                let path = if path.is_absolute() {
                    path.to_path_buf()
                } else {
                    base_dir.join(path)
                };
                let mut replay = ReplayTransport::load(&path)?;
                if let Some(fallback) = &self.fallback {
                    replay = replay.with_fallback(fallback.transport(base_dir)?);
                }
                Arc::new(replay)
            }
        })
    }
}

/// Forwards to a shared transport so one `RemoteProvider` type covers all kinds.
struct Shared(Arc<dyn Transport>);

impl Transport for Shared {
    fn call(&self, endpoint: &str, body: &serde_json::Value) -> Result<serde_json::Value> {
        self.0.call(endpoint, body)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProvidersConfig {
    pub generator: ProviderSpec,
    pub embedder: ProviderSpec,
    pub nli: ProviderSpec,
}

impl ProvidersConfig {
    /// Instantiates the backends. `base_dir` anchors relative replay paths.
    pub fn build(&self, base_dir: &Path) -> Result<Providers> {
        let generator: Arc<dyn Generator> = match self.generator.kind {
            ProviderKind::Fixture => Arc::new(FixtureGenerator),
            _ => Arc::new(RemoteProvider::new(Shared(self.generator.transport(base_dir)?))),
        };
        let embedder: Arc<dyn Embedder> = match self.embedder.kind {
            ProviderKind::Fixture => Arc::new(FixtureEmbedder::default()),
            _ => Arc::new(RemoteProvider::new(Shared(self.embedder.transport(base_dir)?))),
        };
        let nli: Arc<dyn NliClassifier> = match self.nli.kind {
            ProviderKind::Fixture => Arc::new(FixtureNli),
            _ => Arc::new(RemoteProvider::new(Shared(self.nli.transport(base_dir)?))),
        };
        Ok(Providers {
            generator,
            embedder,
            nli,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub intrinsic: IntrinsicConfig,
    pub retrieval: RetrievalConfig,
    pub graph: GraphConfig,
    pub scoring: ScoringConfig,
    pub providers: ProvidersConfig,
    /// Worker threads for the record-level map.
    pub parallelism: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Base seed for every generation request.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            intrinsic: IntrinsicConfig::default(),
            retrieval: RetrievalConfig::default(),
            graph: GraphConfig::default(),
            scoring: ScoringConfig::default(),
            providers: ProvidersConfig::default(),
            parallelism: 4,
            output_dir: None,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let i = &self.intrinsic;
        i.weights.validate()?;
        if !(0.0..=1.0).contains(&i.fallback_threshold) {
            return Err(Error::Config("intrinsic.fallback_threshold must be in [0, 1]".into()));
        }
        if !(-1.0..=1.0).contains(&i.cluster_threshold) {
            return Err(Error::Config("intrinsic.cluster_threshold must be in [-1, 1]".into()));
        }
        if i.temperatures.len() < 2 || i.temperatures.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::Config(
                "intrinsic.temperatures needs at least two values >= 0".into(),
            ));
        }
        if i.sample_count == 0 || !(i.sample_temperature >= 0.0) {
            return Err(Error::Config(
                "intrinsic.sample_count must be >= 1 and sample_temperature >= 0".into(),
            ));
        }
        let r = &self.retrieval;
        if r.window_tokens == 0 || r.overlap_tokens >= r.window_tokens {
            return Err(Error::Config(
                "retrieval.overlap_tokens must be smaller than a non-zero window_tokens".into(),
            ));
        }
        r.bm25.validate()?;
        let g = &self.graph;
        if !(-1.0..=1.0).contains(&g.edge_threshold) || !(-1.0..=1.0).contains(&g.low_sim_threshold) {
            return Err(Error::Config("graph thresholds must be in [-1, 1]".into()));
        }
        if !(g.resolution > 0.0 && g.resolution.is_finite()) {
            return Err(Error::Config("graph.resolution must be > 0".into()));
        }
        self.scoring.weights.validate()?;
        self.providers.generator.validate("generator")?;
        self.providers.embedder.validate("embedder")?;
        self.providers.nli.validate("nli")?;
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be >= 1".into()));
        }
        Ok(())
    }
}
