//! Final reliability scores, three-way classification, paraphrase consistency
//! (PHCS), and computed-vs-recomputed agreement statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HallucinationLevel;
use crate::providers::Embedder;

/// Reliability above this is High Reliability (level Low).
pub const HIGH_RELIABILITY: f64 = 0.7;
/// Reliability below this is Low Reliability (level High).
pub const LOW_RELIABILITY: f64 = 0.5;

/// Cosine between response and ground truth embeddings, clamped to `[0, 1]`.
pub fn hallucination_score(response: &str, ground_truth: &str, embedder: &dyn Embedder) -> Result<f64> {
    if response.trim().is_empty() || ground_truth.trim().is_empty() {
        return Err(Error::InvalidInput("hallucination score needs two non-empty texts".into()));
    }
    let v = embedder.embed(&[response, ground_truth])?;
    Ok(v[0].cosine(&v[1])?.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReliabilityWeights {
    pub intrinsic: f64,
    pub support: f64,
    pub graph: f64,
    pub contradiction: f64,
    /// Used instead of the above when extrinsic verification was skipped.
    pub skipped_intrinsic: f64,
    pub skipped_graph: f64,
}

impl Default for ReliabilityWeights {
    fn default() -> Self {
        Self {
            intrinsic: 0.5,
            support: 0.3,
            graph: 0.2,
            contradiction: 0.3,
            skipped_intrinsic: 0.75,
            skipped_graph: 0.25,
        }
    }
}

impl ReliabilityWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.intrinsic,
            self.support,
            self.graph,
            self.contradiction,
            self.skipped_intrinsic,
            self.skipped_graph,
        ];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("scoring weights must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Inputs to a reliability score, kept for auditing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityComponents {
    pub intrinsic: f64,
    pub support: Option<f64>,
    /// Weighted contradiction fraction subtracted from the score; 0 when skipped.
    pub contradiction_penalty: f64,
    /// Weighted fragmentation: the share of the graph term that was lost.
    pub graph_penalty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityScore {
    pub value: f64,
    pub components: ReliabilityComponents,
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be in [0, 1], got {v}")))
    }
}

/// With extrinsic evidence:
/// `clamp(w_i·intrinsic + w_s·support + w_g·(1 − fragmentation) − w_c·contradiction)`.
/// Without: `clamp(w'_i·intrinsic + w'_g·(1 − fragmentation))`.
///
/// `support` and `contradiction_fraction` must both be present or both absent.
pub fn reliability_score(
    intrinsic: f64,
    support: Option<f64>,
    contradiction_fraction: Option<f64>,
    fragmentation: f64,
    weights: &ReliabilityWeights,
) -> Result<ReliabilityScore> {
    check_unit("intrinsic score", intrinsic)?;
    check_unit("fragmentation", fragmentation)?;
    let (value, components) = match (support, contradiction_fraction) {
        (Some(s), Some(c)) => {
            check_unit("support score", s)?;
            check_unit("contradiction fraction", c)?;
            let raw = weights.intrinsic * intrinsic + weights.support * s
                + weights.graph * (1.0 - fragmentation)
                - weights.contradiction * c;
            (
                raw,
                ReliabilityComponents {
                    intrinsic,
                    support: Some(s),
                    contradiction_penalty: weights.contradiction * c,
                    graph_penalty: weights.graph * fragmentation,
                },
            )
        }
        (None, None) => (
            weights.skipped_intrinsic * intrinsic + weights.skipped_graph * (1.0 - fragmentation),
            ReliabilityComponents {
                intrinsic,
                support: None,
                contradiction_penalty: 0.0,
                graph_penalty: weights.skipped_graph * fragmentation,
            },
        ),
        _ => {
            return Err(Error::InvalidInput(
                "support and contradiction fraction must be given together".into(),
            ))
        }
    };
    Ok(ReliabilityScore {
        value: value.clamp(0.0, 1.0),
        components,
    })
}

/// Maps a reliability (or similarity) value to a hallucination level:
/// above 0.7 is Low, 0.5 to 0.7 inclusive is Medium, below 0.5 is High.
pub fn classify(reliability: f64) -> HallucinationLevel {
    if reliability > HIGH_RELIABILITY {
        HallucinationLevel::Low
    } else if reliability >= LOW_RELIABILITY {
        HallucinationLevel::Medium
    } else {
        HallucinationLevel::High
    }
}

/// Human-readable reliability band for a level.
pub fn reliability_label(level: HallucinationLevel) -> &'static str {
    match level {
        HallucinationLevel::Low => "High Reliability",
        HallucinationLevel::Medium => "Medium Reliability",
        HallucinationLevel::High => "Low Reliability",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhcsMode {
    Population,
    /// Divides by N − 1 (sample standard deviation).
    #[default]
    Sample,
}

impl std::str::FromStr for PhcsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(Self::Sample),
            "population" => Ok(Self::Population),
            other => Err(Error::Config(format!("unknown PHCS mode {other:?}"))),
        }
    }
}

/// Standard deviation of a group's hallucination scores. A single score in
/// sample mode gives 0.
pub fn phcs(scores: &[f64], mode: PhcsMode) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("PHCS of an empty group".into()));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let ss: f64 = scores.iter().map(|s| (s - mean).powi(2)).sum();
    let denom = match mode {
        PhcsMode::Population => n,
        PhcsMode::Sample if scores.len() == 1 => return Ok(0.0),
        PhcsMode::Sample => n - 1.0,
    };
    Ok((ss / denom).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPhcs {
    pub group_id: String,
    pub phcs: f64,
    pub size: usize,
    pub mean_score: f64,
}

/// Groups by descending PHCS, ties by ascending group id, at most `top_n`.
pub fn rank_groups(
    groups: &BTreeMap<String, Vec<f64>>,
    mode: PhcsMode,
    top_n: usize,
) -> Result<Vec<GroupPhcs>> {
    let mut rows = Vec::with_capacity(groups.len());
    for (group_id, scores) in groups {
        rows.push(GroupPhcs {
            group_id: group_id.clone(),
            phcs: phcs(scores, mode)?,
            size: scores.len(),
            mean_score: scores.iter().sum::<f64>() / scores.len() as f64,
        });
    }
    // BTreeMap order is ascending group id, so a stable sort keeps the tie-break.
    rows.sort_by(|a, b| b.phcs.total_cmp(&a.phcs));
    rows.truncate(top_n);
    Ok(rows)
}

/// 3×3 counts indexed `[computed][recomputed]` in Low, Medium, High order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 3]; 3],
    pub total: usize,
    pub accuracy: f64,
    /// Per class, treating the computed level as truth.
    pub precision: [f64; 3],
    pub recall: [f64; 3],
    pub macro_precision: f64,
    pub macro_recall: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(
    computed: &[HallucinationLevel],
    recomputed: &[HallucinationLevel],
) -> Result<ConfusionMatrix> {
    if computed.len() != recomputed.len() {
        return Err(Error::InvalidInput(format!(
            "{} computed levels vs {} recomputed",
            computed.len(),
            recomputed.len()
        )));
    }
    let mut counts = [[0usize; 3]; 3];
    for (c, r) in computed.iter().zip(recomputed) {
        counts[c.index()][r.index()] += 1;
    }
    let total = computed.len();
    let trace: usize = (0..3).map(|i| counts[i][i]).sum();
    let mut precision = [0.0; 3];
    let mut recall = [0.0; 3];
    for k in 0..3 {
        let predicted: usize = (0..3).map(|i| counts[i][k]).sum();
        let actual: usize = counts[k].iter().sum();
        precision[k] = ratio(counts[k][k], predicted);
        recall[k] = ratio(counts[k][k], actual);
    }
    Ok(ConfusionMatrix {
        counts,
        total,
        accuracy: ratio(trace, total),
        precision,
        recall,
        macro_precision: precision.iter().sum::<f64>() / 3.0,
        macro_recall: recall.iter().sum::<f64>() / 3.0,
    })
}
