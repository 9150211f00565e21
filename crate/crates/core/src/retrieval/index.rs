//! Exact cosine top-k over window-chunk embeddings.

use std::cmp::Ordering;

use super::bm25::CorpusStats;
use super::chunk::{ChunkLevel, EvidenceChunk};
use crate::error::Result;
use crate::providers::{EmbeddingVector, Embedder};

const EMBED_BATCH: usize = 64;

/// A chunk and its cosine similarity to the query.
pub type ScoredChunk<'a> = (&'a EvidenceChunk, f64);

/// Immutable retrieval index over the window chunks of a corpus. Safe to query
/// from many threads at once.
#[derive(Debug, Clone)]
pub struct EvidenceIndex {
    windows: Vec<EvidenceChunk>,
    embeddings: Vec<EmbeddingVector>,
    stats: CorpusStats,
}

impl EvidenceIndex {
    /// Embeds every window chunk in `chunks`; other levels are ignored.
    pub fn build(chunks: &[EvidenceChunk], embedder: &dyn Embedder) -> Result<Self> {
        let windows: Vec<EvidenceChunk> = chunks
            .iter()
            .filter(|c| c.level == ChunkLevel::Window)
            .cloned()
            .collect();
        let mut embeddings = Vec::with_capacity(windows.len());
        for batch in windows.chunks(EMBED_BATCH) {
            let texts: Vec<&str> = batch.iter().map(|c| c.text.as_str()).collect();
            embeddings.extend(embedder.embed(&texts)?);
        }
        let stats = CorpusStats::from_chunks(&windows);
        Ok(Self {
            windows,
            embeddings,
            stats,
        })
    }

    pub fn from_parts(windows: Vec<EvidenceChunk>, embeddings: Vec<EmbeddingVector>) -> Self {
        assert_eq!(windows.len(), embeddings.len(), "one embedding per window");
        let stats = CorpusStats::from_chunks(&windows);
        Self {
            windows,
            embeddings,
            stats,
        }
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn windows(&self) -> &[EvidenceChunk] {
        &self.windows
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    pub fn retrieve_topk(
        &self,
        query: &str,
        k: usize,
        embedder: &dyn Embedder,
    ) -> Result<Vec<ScoredChunk<'_>>> {
        if k == 0 || self.windows.is_empty() {
            return Ok(Vec::new());
        }
        let q = embedder.embed_one(query)?;
        self.topk_by_embedding(&q, k)
    }

    /// Highest cosine first; ties go to the smaller `chunk_id`.
    pub fn topk_by_embedding(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<ScoredChunk<'_>>> {
        let mut scored: Vec<(usize, f64)> = self
            .embeddings
            .iter()
            .enumerate()
            .map(|(i, e)| Ok((i, e.cosine(query)?)))
            .collect::<Result<_>>()?;
        let by_rank = |a: &(usize, f64), b: &(usize, f64)| -> Ordering {
            b.1.total_cmp(&a.1)
                .then_with(|| self.windows[a.0].chunk_id.cmp(&self.windows[b.0].chunk_id))
        };
        let k = k.min(scored.len());
        if k == 0 {
            return Ok(Vec::new());
        }
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_rank);
            scored.truncate(k);
        }
        scored.sort_by(by_rank);
        Ok(scored
            .into_iter()
            .map(|(i, s)| (&self.windows[i], s))
            .collect())
    }
}
