use serde::{Deserialize, Serialize};

use super::corpus::Document;
use crate::error::{Error, Result};
use crate::metrics::token_spans;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChunkLevel {
    Document,
    Passage,
    Window,
}

/// A retrievable span of corpus text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceChunk {
    /// Dense, in emission order across the whole corpus.
    pub chunk_id: usize,
    pub document_id: String,
    pub level: ChunkLevel,
    pub text: String,
    pub token_count: usize,
    /// Enclosing chunk: the document for passages, the passage for windows.
    pub parent: Option<usize>,
    /// For windows, the `[start, end)` token range inside the parent passage.
    pub token_range: Option<(usize, usize)>,
}

/// Byte ranges of blank-line separated paragraphs, trimmed, skipping empties.
fn passage_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        if line.trim().is_empty() {
            if let Some(span) = current.take() {
                spans.push(span);
            }
        } else {
            let end = start + line.trim_end().len();
            current = Some(match current {
                Some((s, _)) => (s, end),
                None => (start + (line.len() - line.trim_start().len()), end),
            });
        }
    }
    spans.extend(current);
    spans
}

/// Token windows `[start, end)` over `n` tokens with stride `window - overlap`.
/// The last window always ends at `n`.
pub fn window_ranges(n: usize, window: usize, overlap: usize) -> Vec<(usize, usize)> {
    let stride = window - overlap;
    let mut ranges = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + window).min(n);
        ranges.push((start, end));
        if end == n {
            break;
        }
        start += stride;
    }
    ranges
}

/// Splits documents into document, passage, and window chunks.
///
/// Passages are separated by blank lines. Each passage is cut into windows of
/// at most `window_tokens` tokens overlapping by `overlap_tokens`, so every
/// token lands in at least one window. Token-free documents and passages are
/// dropped.
pub fn chunk_corpus(
    documents: &[Document],
    window_tokens: usize,
    overlap_tokens: usize,
) -> Result<Vec<EvidenceChunk>> {
    if window_tokens == 0 || overlap_tokens >= window_tokens {
        return Err(Error::Config(format!(
            "chunk overlap ({overlap_tokens}) must be smaller than the window ({window_tokens})"
        )));
    }
    let mut chunks = Vec::new();
    for doc in documents {
        let doc_tokens = token_spans(&doc.text).len();
        if doc_tokens == 0 {
            continue;
        }
        let doc_chunk = chunks.len();
        chunks.push(EvidenceChunk {
            chunk_id: doc_chunk,
            document_id: doc.document_id.clone(),
            level: ChunkLevel::Document,
            text: doc.text.trim().to_string(),
            token_count: doc_tokens,
            parent: None,
            token_range: None,
        });
        for (ps, pe) in passage_spans(&doc.text) {
            let passage = &doc.text[ps..pe];
            let spans = token_spans(passage);
            if spans.is_empty() {
                continue;
            }
            let passage_chunk = chunks.len();
            chunks.push(EvidenceChunk {
                chunk_id: passage_chunk,
                document_id: doc.document_id.clone(),
                level: ChunkLevel::Passage,
                text: passage.to_string(),
                token_count: spans.len(),
                parent: Some(doc_chunk),
                token_range: None,
            });
            for (start, end) in window_ranges(spans.len(), window_tokens, overlap_tokens) {
                let text = &passage[spans[start].0..spans[end - 1].1];
                chunks.push(EvidenceChunk {
                    chunk_id: chunks.len(),
                    document_id: doc.document_id.clone(),
                    level: ChunkLevel::Window,
                    text: text.to_string(),
                    token_count: end - start,
                    parent: Some(passage_chunk),
                    token_range: Some((start, end)),
                });
            }
        }
    }
    Ok(chunks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tokenize;
    use proptest::prelude::*;

    fn doc(id: &str, text: &str) -> Document {
        Document {
            document_id: id.into(),
            text: text.into(),
        }
    }

    fn windows(chunks: &[EvidenceChunk]) -> Vec<&EvidenceChunk> {
        chunks.iter().filter(|c| c.level == ChunkLevel::Window).collect()
    }

    #[test]
    fn short_document_is_one_window() {
        let text = "one two three four five six seven eight nine ten";
        let chunks = chunk_corpus(&[doc("d", text)], 256, 64).unwrap();
        let w = windows(&chunks);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].text, text);
        assert_eq!(w[0].token_count, 10);
        assert_eq!(chunks[0].level, ChunkLevel::Document);
        assert_eq!(chunks[1].level, ChunkLevel::Passage);
    }

    #[test]
    fn empty_corpus() {
        assert!(chunk_corpus(&[], 256, 64).unwrap().is_empty());
        assert!(chunk_corpus(&[doc("blank", "  \n\n ...")], 256, 64).unwrap().is_empty());
    }

    #[test]
    fn long_passage_splits_with_overlap() {
        let text: Vec<String> = (0..300).map(|i| format!("t{i}")).collect();
        let chunks = chunk_corpus(&[doc("d", &text.join(" "))], 256, 64).unwrap();
        let w = windows(&chunks);
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].token_range, Some((0, 256)));
        assert_eq!(w[1].token_range, Some((192, 300)));
        assert!(w[1].text.starts_with("t192 "));
        assert!(w[1].text.ends_with("t299"));
    }

    #[test]
    fn passages_split_on_blank_lines() {
        let text = "First passage line one.\nStill first.\n\n  \nSecond passage.\n";
        let chunks = chunk_corpus(&[doc("d", text)], 8, 2).unwrap();
        let passages: Vec<_> = chunks.iter().filter(|c| c.level == ChunkLevel::Passage).collect();
        assert_eq!(passages.len(), 2);
        assert_eq!(passages[0].text, "First passage line one.\nStill first.");
        assert_eq!(passages[1].text, "Second passage.");
        for w in windows(&chunks) {
            let parent = &chunks[w.parent.unwrap()];
            assert_eq!(parent.level, ChunkLevel::Passage);
            assert!(parent.text.contains(&w.text));
        }
    }

    #[test]
    fn bad_overlap_is_config_error() {
        assert!(matches!(chunk_corpus(&[], 64, 64), Err(Error::Config(_))));
        assert!(matches!(chunk_corpus(&[], 0, 0), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn windows_cover_every_token(
            paragraphs in proptest::collection::vec(proptest::collection::vec("[a-e]{1,3}", 0..40), 1..4),
            window in 2usize..12,
            overlap_frac in 0.0f64..1.0,
        ) {
            let overlap = ((window - 1) as f64 * overlap_frac) as usize;
            let text = paragraphs.iter().map(|p| p.join(" ")).collect::<Vec<_>>().join("\n\n");
            let chunks = chunk_corpus(&[doc("d", &text)], window, overlap).unwrap();
            // Multiset of corpus tokens ⊆ union of window tokens, checked per position.
            let mut covered = 0usize;
            for passage in chunks.iter().filter(|c| c.level == ChunkLevel::Passage) {
                let ptoks = tokenize(&passage.text).tokens;
                let mut seen = vec![false; ptoks.len()];
                for w in chunks.iter().filter(|c| c.parent == Some(passage.chunk_id)) {
                    let (s, e) = w.token_range.unwrap();
                    prop_assert!(e - s <= window);
                    prop_assert_eq!(&tokenize(&w.text).tokens[..], &ptoks[s..e]);
                    prop_assert_eq!(w.token_count, e - s);
                    seen[s..e].iter_mut().for_each(|x| *x = true);
                }
                prop_assert!(seen.iter().all(|&x| x));
                covered += ptoks.len();
            }
            prop_assert_eq!(covered, tokenize(&text).len());
        }
    }
}
