//! Multi-stage hallucination detection for LLM-generated scientific answers.
//!
//! The engine scores a generated response in stages:
//!
//! 1. **Intrinsic evaluation** ([`intrinsic`]): self-consistency across samples,
//!    token-confidence variance, semantic entropy, refinement drift across
//!    temperatures, and internal contradictions between the response's own claims.
//! 2. **Extrinsic verification** ([`retrieval`]): only when the intrinsic score falls
//!    below the fallback threshold. Hierarchical chunking, exact cosine top-k
//!    retrieval, BM25 reranking, and NLI verdicts per claim.
//! 3. **Contradiction graph** ([`graph`]): a similarity graph over fact fragments,
//!    Louvain communities, and fragmentation.
//! 4. **Scoring** ([`scoring`]): reliability aggregation, three-way classification,
//!    paraphrase consistency (PHCS), and computed-vs-recomputed confusion statistics.
//!
//! Model access goes through the traits in [`providers`]; deterministic fixture
//! backends make every stage reproducible offline.

pub mod config;
pub mod error;
pub mod fixture;
pub mod fragments;
pub mod graph;
pub mod intrinsic;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod providers;
pub mod retrieval;
pub mod scoring;

pub use error::{Error, Result};
