//! End-to-end evaluation: per-record stages, batch orchestration, and report
//! files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::fragments::{split_fragments, split_fragments_from, FactFragment, FragmentSource};
use crate::graph::{
    build_graph, export_graph, fragmentation, louvain, modularity, FragmentationReport,
    LouvainOptions, NodeLinkDocument,
};
use crate::intrinsic::{
    confidence_variance, internal_contradictions, intrinsic_score, refinement_drift,
    self_consistency_of, semantic_entropy_of, IntrinsicComponents, IntrinsicReport,
};
use crate::metrics::{bleu4, rouge_l, tokenize};
use crate::model::{group_paraphrases, summarize_dataset, DatasetSummary, HallucinationLevel, QueryRecord};
use crate::providers::{GenerationRequest, Providers};
use crate::retrieval::{
    chunk_corpus, rerank, verify_fragments, Document, EvidenceIndex, RankedEvidence,
    VerificationReport,
};
use crate::scoring::{
    classify, confusion, hallucination_score, rank_groups, reliability_score, ConfusionMatrix,
    GroupPhcs, ReliabilityScore,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Intrinsic,
    Verification,
    Graph,
    Metrics,
    Classification,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Intrinsic => "intrinsic",
            Stage::Verification => "verification",
            Stage::Graph => "graph",
            Stage::Metrics => "metrics",
            Stage::Classification => "classification",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextMetrics {
    pub bleu: f64,
    pub rouge_f1: f64,
    /// Embedding similarity to the ground truth, clamped to `[0, 1]`.
    pub ground_truth_cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub node_count: usize,
    pub edge_count: usize,
    pub modularity: f64,
    #[serde(flatten)]
    pub fragmentation: FragmentationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub record_id: String,
    pub group_id: String,
    pub is_paraphrase: bool,
    pub intrinsic: IntrinsicReport,
    /// Present exactly when `intrinsic.needs_extrinsic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationReport>,
    /// Reranked evidence behind `verification`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub evidence: Vec<RankedEvidence>,
    pub graph: GraphSummary,
    pub metrics: TextMetrics,
    pub reliability: ReliabilityScore,
    pub recomputed_level: HallucinationLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub computed_level: Option<HallucinationLevel>,
    /// Stages that ran, in order.
    pub stages: Vec<Stage>,
}

/// Plot data that is too bulky for the assessment itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordArtifacts {
    pub similarity: Vec<Vec<f64>>,
    pub graph: NodeLinkDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordFailure {
    pub record_id: String,
    pub stage: Stage,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecordOutcome {
    Assessed(Box<(Assessment, RecordArtifacts)>),
    Failed(RecordFailure),
}

/// Configuration, backends, and the built evidence index.
pub struct Engine {
    pub config: PipelineConfig,
    pub providers: Providers,
    pub index: EvidenceIndex,
}

impl Engine {
    pub fn new(config: PipelineConfig, providers: Providers, corpus: &[Document]) -> Result<Self> {
        config.validate()?;
        let chunks = chunk_corpus(corpus, config.retrieval.window_tokens, config.retrieval.overlap_tokens)?;
        let index = EvidenceIndex::build(&chunks, providers.embedder.as_ref())?;
        Ok(Self {
            config,
            providers,
            index,
        })
    }
}

fn at<T>(stage: Stage, r: Result<T>) -> std::result::Result<T, (Stage, Error)> {
    r.map_err(|e| (stage, e))
}

fn response_fragments(text: &str) -> Vec<FactFragment> {
    let mut frags = split_fragments(text);
    frags.retain(|f| !tokenize(&f.text).is_empty());
    frags
}

fn intrinsic_stage(record: &QueryRecord, fragments: &[FactFragment], engine: &Engine) -> Result<IntrinsicReport> {
    let cfg = &engine.config.intrinsic;
    let p = &engine.providers;
    let samples = p.generator.generate(&GenerationRequest {
        prompt: record.query.clone(),
        temperature: cfg.sample_temperature,
        sample_count: cfg.sample_count,
        seed: engine.config.seed,
    })?;
    let mut texts: Vec<&str> = vec![record.generated_response.as_str()];
    texts.extend(samples.iter().map(|s| s.text.as_str()));
    let embeddings = p.embedder.embed(&texts)?;
    let token_probs = record
        .token_probs
        .as_deref()
        .unwrap_or_else(|| samples.first().map_or(&[][..], |s| &s.token_probs));
    let components = IntrinsicComponents {
        self_consistency: self_consistency_of(&embeddings)?,
        confidence_variance: confidence_variance(token_probs),
        entropy: semantic_entropy_of(&embeddings, cfg.cluster_threshold)?,
        refinement_drift: refinement_drift(
            &record.query,
            p.generator.as_ref(),
            &cfg.temperatures,
            p.embedder.as_ref(),
            engine.config.seed,
        )?,
        internal_contradiction_fraction: internal_contradictions(fragments, p.nli.as_ref())?,
    };
    intrinsic_score(&components, &cfg.weights, cfg.fallback_threshold)
}

fn verification_stage(
    record: &QueryRecord,
    fragments: &[FactFragment],
    engine: &Engine,
) -> Result<(VerificationReport, Vec<RankedEvidence>)> {
    let cfg = &engine.config.retrieval;
    let top = engine
        .index
        .retrieve_topk(&record.query, cfg.k, engine.providers.embedder.as_ref())?;
    let ranked = rerank(&top, &record.query, &cfg.bm25, engine.index.stats())?;
    let report = verify_fragments(fragments, &ranked, engine.providers.nli.as_ref(), cfg.top_m);
    let mut evidence = ranked;
    evidence.truncate(cfg.top_m);
    Ok((report, evidence))
}

fn graph_stage(
    fragments: &[FactFragment],
    evidence: &[RankedEvidence],
    engine: &Engine,
) -> Result<(GraphSummary, RecordArtifacts)> {
    let cfg = &engine.config.graph;
    let mut nodes = fragments.to_vec();
    for chunk in evidence {
        nodes.extend(
            split_fragments_from(&chunk.text, FragmentSource::Retrieved)
                .into_iter()
                .filter(|f| !tokenize(&f.text).is_empty()),
        );
    }
    let graph = build_graph(&nodes, engine.providers.embedder.as_ref(), cfg.edge_threshold)?;
    let options = LouvainOptions {
        resolution: cfg.resolution,
        seed: None,
    };
    let partition = louvain(&graph, &options)?;
    let summary = GraphSummary {
        node_count: graph.node_count(),
        edge_count: graph.edges.len(),
        modularity: modularity(&graph, &partition, cfg.resolution)?,
        fragmentation: fragmentation(&graph, &partition, cfg.low_sim_threshold)?,
    };
    let artifacts = RecordArtifacts {
        graph: export_graph(&graph, &partition)?,
        similarity: graph.similarity,
    };
    Ok((summary, artifacts))
}

fn metrics_stage(record: &QueryRecord, engine: &Engine) -> Result<TextMetrics> {
    Ok(TextMetrics {
        bleu: bleu4(&record.generated_response, &record.ground_truth),
        rouge_f1: rouge_l(&record.generated_response, &record.ground_truth).f1,
        ground_truth_cosine: hallucination_score(
            &record.generated_response,
            &record.ground_truth,
            engine.providers.embedder.as_ref(),
        )?,
    })
}

fn assess(
    record: &QueryRecord,
    engine: &Engine,
) -> std::result::Result<(Assessment, RecordArtifacts), (Stage, Error)> {
    let fragments = response_fragments(&record.generated_response);
    let mut stages = vec![Stage::Intrinsic];
    let intrinsic = at(Stage::Intrinsic, intrinsic_stage(record, &fragments, engine))?;

    let (verification, evidence) = if intrinsic.needs_extrinsic {
        stages.push(Stage::Verification);
        let (report, evidence) = at(Stage::Verification, verification_stage(record, &fragments, engine))?;
        (Some(report), evidence)
    } else {
        (None, Vec::new())
    };

    stages.push(Stage::Graph);
    let (graph, artifacts) = at(Stage::Graph, graph_stage(&fragments, &evidence, engine))?;

    stages.push(Stage::Metrics);
    let metrics = at(Stage::Metrics, metrics_stage(record, engine))?;

    stages.push(Stage::Classification);
    let reliability = at(
        Stage::Classification,
        reliability_score(
            intrinsic.intrinsic_score,
            verification.as_ref().map(|v| v.support_score),
            verification.as_ref().map(|v| v.contradiction_fraction),
            graph.fragmentation.fragmentation,
            &engine.config.scoring.weights,
        ),
    )?;
    let assessment = Assessment {
        record_id: record.record_id.clone(),
        group_id: record.group_id.clone(),
        is_paraphrase: record.is_paraphrase,
        intrinsic,
        verification,
        evidence,
        graph,
        metrics,
        recomputed_level: classify(reliability.value),
        reliability,
        computed_level: record.computed_level,
        stages,
    };
    Ok((assessment, artifacts))
}

/// Runs every stage for one record. Provider failures become a `Failed`
/// outcome naming the stage; they never panic or abort.
pub fn run_pipeline(record: &QueryRecord, engine: &Engine) -> RecordOutcome {
    match assess(record, engine) {
        Ok(done) => RecordOutcome::Assessed(Box::new(done)),
        Err((stage, error)) => {
            log::warn!("record {} failed at {stage}: {error}", record.record_id);
            RecordOutcome::Failed(RecordFailure {
                record_id: record.record_id.clone(),
                stage,
                error: error.to_string(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Clean,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMean {
    pub group_id: String,
    /// Mean ground-truth cosine over the group's assessed records.
    pub mean_score: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub schema_version: u32,
    pub status: RunStatus,
    pub summary: DatasetSummary,
    /// Ordered by `record_id`.
    pub assessments: Vec<Assessment>,
    pub failures: Vec<RecordFailure>,
    /// Present when at least one assessed record carries a computed level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    /// Every group ranked by PHCS over recomputed level codes.
    pub phcs: Vec<GroupPhcs>,
    pub group_means: Vec<GroupMean>,
    #[serde(skip)]
    pub artifacts: BTreeMap<String, RecordArtifacts>,
}

impl PipelineReport {
    /// Canonical JSON: object keys sorted, stable float formatting.
    pub fn to_canonical_json(&self) -> Result<String> {
        canonical_json(self)
    }

    /// `(computed, recomputed)` for assessments that carry a computed level.
    pub fn level_pairs(&self) -> (Vec<HallucinationLevel>, Vec<HallucinationLevel>) {
        self.assessments
            .iter()
            .filter_map(|a| a.computed_level.map(|c| (c, a.recomputed_level)))
            .unzip()
    }
}

pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // Value maps are BTreeMaps, so keys come out sorted.
    let value = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&value)?)
}

/// Evaluates `records` with `parallelism` workers and reduces in `record_id` order.
pub fn run_batch(records: &[QueryRecord], engine: &Engine) -> Result<PipelineReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(engine.config.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let outcomes: Vec<RecordOutcome> =
        pool.install(|| records.par_iter().map(|r| run_pipeline(r, engine)).collect());

    let mut assessments = Vec::new();
    let mut failures = Vec::new();
    let mut artifacts = BTreeMap::new();
    for outcome in outcomes {
        match outcome {
            RecordOutcome::Assessed(done) => {
                let (assessment, art) = *done;
                artifacts.insert(assessment.record_id.clone(), art);
                assessments.push(assessment);
            }
            RecordOutcome::Failed(f) => failures.push(f),
        }
    }
    assessments.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    failures.sort_by(|a, b| a.record_id.cmp(&b.record_id));

    let by_id: BTreeMap<&str, &Assessment> =
        assessments.iter().map(|a| (a.record_id.as_str(), a)).collect();
    let mut level_scores: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut group_means = Vec::new();
    for (group_id, members) in group_paraphrases(records) {
        let assessed: Vec<&Assessment> = members
            .iter()
            .filter_map(|r| by_id.get(r.record_id.as_str()).copied())
            .collect();
        if assessed.is_empty() {
            continue;
        }
        level_scores.insert(
            group_id.to_string(),
            assessed.iter().map(|a| f64::from(a.recomputed_level.code())).collect(),
        );
        group_means.push(GroupMean {
            group_id: group_id.to_string(),
            mean_score: assessed.iter().map(|a| a.metrics.ground_truth_cosine).sum::<f64>()
                / assessed.len() as f64,
            size: assessed.len(),
        });
    }
    let phcs = rank_groups(&level_scores, engine.config.scoring.phcs_mode, usize::MAX)?;

    let mut report = PipelineReport {
        schema_version: SCHEMA_VERSION,
        status: if failures.is_empty() {
            RunStatus::Clean
        } else {
            RunStatus::Partial
        },
        summary: summarize_dataset(records),
        assessments,
        failures,
        confusion: None,
        phcs,
        group_means,
        artifacts,
    };
    let (computed, recomputed) = report.level_pairs();
    if !computed.is_empty() {
        report.confusion = Some(confusion(&computed, &recomputed)?);
    }
    Ok(report)
}

/// Replaces characters that are awkward in file names.
pub fn file_stem(record_id: &str) -> String {
    record_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn csv_bytes(rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv buffer: {e}")))
}

/// Confusion counts as a heatmap grid: header row of recomputed levels, one
/// row per computed level.
pub fn confusion_csv(m: &ConfusionMatrix) -> Result<Vec<u8>> {
    let mut rows = vec![vec!["computed\\recomputed".to_string()]];
    rows[0].extend(HallucinationLevel::ALL.iter().map(|l| l.to_string()));
    for level in HallucinationLevel::ALL {
        let mut row = vec![level.to_string()];
        row.extend(m.counts[level.index()].iter().map(|c| c.to_string()));
        rows.push(row);
    }
    csv_bytes(rows)
}

pub fn phcs_csv(rows: &[GroupPhcs]) -> Result<Vec<u8>> {
    let mut out = vec![vec!["rank", "group_id", "phcs", "size", "mean_score"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>()];
    for (i, r) in rows.iter().enumerate() {
        out.push(vec![
            (i + 1).to_string(),
            r.group_id.clone(),
            r.phcs.to_string(),
            r.size.to_string(),
            r.mean_score.to_string(),
        ]);
    }
    csv_bytes(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn summary_csv(assessments: &[Assessment]) -> Result<Vec<u8>> {
    let header = [
        "record_id", "group_id", "computed_level", "recomputed_level", "reliability",
        "intrinsic_score", "self_consistency", "entropy", "confidence_variance",
        "refinement_drift", "internal_contradiction_fraction", "needs_extrinsic",
        "support_score", "contradiction_fraction", "fragmentation", "community_count",
        "modularity", "bleu", "rouge_f1", "ground_truth_cosine",
    ];
    let mut rows = vec![header.iter().map(|h| h.to_string()).collect::<Vec<_>>()];
    for a in assessments {
        let i = &a.intrinsic;
        rows.push(vec![
            a.record_id.clone(),
            a.group_id.clone(),
            a.computed_level.map(|l| l.to_string()).unwrap_or_default(),
            a.recomputed_level.to_string(),
            a.reliability.value.to_string(),
            i.intrinsic_score.to_string(),
            i.self_consistency.to_string(),
            i.entropy.to_string(),
            i.confidence_variance.to_string(),
            i.refinement_drift.to_string(),
            i.internal_contradiction_fraction.to_string(),
            i.needs_extrinsic.to_string(),
            opt(a.verification.as_ref().map(|v| v.support_score)),
            opt(a.verification.as_ref().map(|v| v.contradiction_fraction)),
            a.graph.fragmentation.fragmentation.to_string(),
            a.graph.fragmentation.community_count.to_string(),
            a.graph.modularity.to_string(),
            a.metrics.bleu.to_string(),
            a.metrics.rouge_f1.to_string(),
            a.metrics.ground_truth_cosine.to_string(),
        ]);
    }
    csv_bytes(rows)
}

fn matrix_csv(m: &[Vec<f64>]) -> Result<Vec<u8>> {
    csv_bytes(m.iter().map(|row| row.iter().map(|v| v.to_string()).collect()).collect())
}

/// Writes `report.json`, `assessments.jsonl`, CSV extracts, and per-record
/// `graphs/*.json` and `similarity/*.csv` under `dir`.
pub fn write_report(report: &PipelineReport, dir: &Path) -> Result<()> {
    for sub in [dir.to_path_buf(), dir.join("graphs"), dir.join("similarity")] {
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    }
    write_file(&dir.join("report.json"), report.to_canonical_json()?.as_bytes())?;
    let mut lines = String::new();
    for a in &report.assessments {
        lines.push_str(&serde_json::to_string(&serde_json::to_value(a)?)?);
        lines.push('\n');
    }
    write_file(&dir.join("assessments.jsonl"), lines.as_bytes())?;
    write_file(&dir.join("summary.csv"), &summary_csv(&report.assessments)?)?;
    write_file(&dir.join("phcs.csv"), &phcs_csv(&report.phcs)?)?;
    if let Some(m) = &report.confusion {
        write_file(&dir.join("confusion.csv"), &confusion_csv(m)?)?;
    }
    for (record_id, art) in &report.artifacts {
        let stem = file_stem(record_id);
        write_file(
            &dir.join("graphs").join(format!("{stem}.json")),
            art.graph.to_json()?.as_bytes(),
        )?;
        write_file(
            &dir.join("similarity").join(format!("{stem}.csv")),
            &matrix_csv(&art.similarity)?,
        )?;
    }
    Ok(())
}

/// The level fields of an assessment line; everything else is ignored.
#[derive(Debug, Clone, Deserialize)]
pub struct LevelPair {
    pub record_id: String,
    #[serde(default)]
    pub computed_level: Option<HallucinationLevel>,
    pub recomputed_level: HallucinationLevel,
}

/// Reads `assessments.jsonl` (or a JSONL file given directly).
pub fn load_level_pairs(path: &Path) -> Result<Vec<LevelPair>> {
    let file = if path.is_dir() {
        path.join("assessments.jsonl")
    } else {
        path.to_path_buf()
    };
    let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::MalformedRecord {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
