//! Extrinsic fact verification against a user-supplied evidence corpus.
//!
//! Documents are chunked hierarchically (document → passage → token window),
//! window chunks are retrieved by exact cosine top-k, reranked with BM25, and
//! the best few are used as NLI premises for each fact fragment.

pub mod bm25;
pub mod chunk;
pub mod corpus;
pub mod index;
pub mod verify;

pub use bm25::{bm25_score, rerank, Bm25Params, CorpusStats, RankedEvidence};
pub use chunk::{chunk_corpus, ChunkLevel, EvidenceChunk};
pub use corpus::{load_corpus, Document};
pub use index::{EvidenceIndex, ScoredChunk};
pub use verify::{verify_fragments, FragmentVerdict, VerificationReport};
