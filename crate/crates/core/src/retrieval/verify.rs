use serde::{Deserialize, Serialize};

use super::bm25::RankedEvidence;
use crate::fragments::FactFragment;
use crate::providers::{NliClassifier, NliLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentVerdict {
    pub fragment_id: usize,
    pub label: NliLabel,
    pub confidence: f64,
    /// Evidence chunk that decided the label; `None` without evidence or on failure.
    pub best_chunk_id: Option<usize>,
    /// Set when an NLI call failed; the fragment then counts as Neutral.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub fragments: Vec<FragmentVerdict>,
    pub support_score: f64,
    pub contradiction_fraction: f64,
}

impl VerificationReport {
    pub fn failed_fragments(&self) -> usize {
        self.fragments.iter().filter(|f| f.error.is_some()).count()
    }
}

fn label_rank(label: NliLabel) -> u8 {
    match label {
        NliLabel::Contradiction => 2,
        NliLabel::Entailment => 1,
        NliLabel::Neutral => 0,
    }
}

/// Checks each fragment against the first `top_m` evidence chunks, evidence as
/// premise and fragment as hypothesis.
///
/// A fragment is Contradiction if any chunk contradicts it, else Entailment if
/// any chunk entails it, else Neutral. Support counts entailed fragments fully
/// and neutral ones by half.
pub fn verify_fragments(
    fragments: &[FactFragment],
    evidence: &[RankedEvidence],
    nli: &dyn NliClassifier,
    top_m: usize,
) -> VerificationReport {
    let evidence = &evidence[..top_m.min(evidence.len())];
    let mut verdicts = Vec::with_capacity(fragments.len());
    for fragment in fragments {
        let mut best: Option<(NliLabel, f64, usize)> = None;
        let mut error = None;
        for chunk in evidence {
            match nli.nli(&chunk.text, &fragment.text) {
                Ok(v) => {
                    let better = match best {
                        None => true,
                        Some((label, conf, _)) => {
                            label_rank(v.label) > label_rank(label)
                                || (v.label == label && v.confidence > conf)
                        }
                    };
                    if better {
                        best = Some((v.label, v.confidence, chunk.chunk_id));
                    }
                }
                Err(e) => {
                    error = Some(e.to_string());
                    break;
                }
            }
        }
        verdicts.push(match (error, best) {
            (Some(message), _) => FragmentVerdict {
                fragment_id: fragment.fragment_id,
                label: NliLabel::Neutral,
                confidence: 0.0,
                best_chunk_id: None,
                error: Some(message),
            },
            (None, Some((label, confidence, chunk_id))) => FragmentVerdict {
                fragment_id: fragment.fragment_id,
                label,
                confidence,
                best_chunk_id: Some(chunk_id),
                error: None,
            },
            (None, None) => FragmentVerdict {
                fragment_id: fragment.fragment_id,
                label: NliLabel::Neutral,
                confidence: 0.0,
                best_chunk_id: None,
                error: None,
            },
        });
    }
    verdicts.sort_by_key(|v| v.fragment_id);

    if verdicts.is_empty() {
        return VerificationReport {
            fragments: verdicts,
            support_score: 0.5,
            contradiction_fraction: 0.0,
        };
    }
    let n = verdicts.len() as f64;
    let count = |l: NliLabel| verdicts.iter().filter(|v| v.label == l).count() as f64;
    let support_score = (count(NliLabel::Entailment) + 0.5 * count(NliLabel::Neutral)) / n;
    let contradiction_fraction = count(NliLabel::Contradiction) / n;
    VerificationReport {
        fragments: verdicts,
        support_score,
        contradiction_fraction,
    }
}
