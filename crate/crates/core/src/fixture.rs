//! Synthetic datasets with known answers.
//!
//! Each paraphrase group is about one material. Its ground truth is a handful of
//! template sentences and doubles as the group's corpus document. Faithful
//! records answer with the ground truth verbatim; corrupted records edit every
//! sentence (negation, entity swap, or numeric change) and the edits are
//! written to a label file. Generation replies are written as a replay
//! recording that matches the requests the pipeline will make under the
//! accompanying config: faithful records get reworded (shuffled) ground truth,
//! corrupted ones get unrelated confabulations.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, ProviderSpec};
use crate::error::{Error, Result};
use crate::model::{write_dataset, HallucinationLevel, QueryRecord};
use crate::providers::wire::{GenerateResponse, GENERATE};
use crate::providers::{replay::write_recordings, GenerationRequest, GenerationSample, ReplayRecording};
use crate::retrieval::Document;

pub const GROUP_SIZE: usize = 5;

const CATIONS: [&str; 20] = [
    "Titanium", "Zinc", "Gallium", "Copper", "Nickel", "Cobalt", "Iron", "Tin", "Indium",
    "Zirconium", "Hafnium", "Niobium", "Tantalum", "Tungsten", "Molybdenum", "Vanadium",
    "Chromium", "Manganese", "Aluminium", "Magnesium",
];
const ANIONS: [&str; 8] = [
    "oxide", "nitride", "carbide", "sulfide", "selenide", "telluride", "phosphide", "boride",
];
const ENVIRONMENTS: [&str; 5] = ["humid air", "acidic solution", "vacuum", "molten salt", "seawater"];
const STRUCTURES: [&str; 5] = ["rutile", "wurtzite", "perovskite", "spinel", "fluorite"];
const APPLICATIONS: [&str; 5] = [
    "solar cells", "gas sensors", "battery electrodes", "thermal coatings", "photocatalysis",
];
const QUERY_FORMS: [&str; GROUP_SIZE] = [
    "What are the key properties of {m}?",
    "Describe the main characteristics of {m}.",
    "Summarize what is known about {m}.",
    "Which properties define {m}?",
    "Explain the behaviour of {m} in materials research.",
];

/// One claim template: positive and negated wording, plus an optional number.
#[derive(Debug, Clone)]
struct Claim {
    frame: usize,
    material: String,
    value: f64,
    choice: usize,
    negated: bool,
}

const FRAMES: usize = 6;

impl Claim {
    fn random(material: &str, frame: usize, rng: &mut ChaCha8Rng) -> Self {
        let value = match frame {
            0 => (rng.gen_range(5..60) as f64) / 10.0,
            1 => rng.gen_range(600..3500) as f64,
            4 => rng.gen_range(2..400) as f64,
            5 => rng.gen_range(400..1800) as f64,
            _ => 0.0,
        };
        Self {
            frame,
            material: material.to_string(),
            value,
            choice: rng.gen_range(0..5),
            negated: false,
        }
    }

    fn has_number(&self) -> bool {
        matches!(self.frame, 0 | 1 | 4 | 5)
    }

    fn render(&self) -> String {
        let m = &self.material;
        let v = self.value;
        let n = self.negated;
        match self.frame {
            0 if n => format!("{m} does not have a band gap of {v:.1} eV."),
            0 => format!("{m} has a band gap of {v:.1} eV."),
            1 if n => format!("{m} does not melt at {v} K."),
            1 => format!("{m} melts at {v} K."),
            2 if n => format!("{m} is not stable in {}.", ENVIRONMENTS[self.choice]),
            2 => format!("{m} is stable in {}.", ENVIRONMENTS[self.choice]),
            3 if n => format!("{m} does not crystallize in the {} structure.", STRUCTURES[self.choice]),
            3 => format!("{m} crystallizes in the {} structure.", STRUCTURES[self.choice]),
            4 if n => format!("{m} does not reach a thermal conductivity of {v} W/mK."),
            4 => format!("{m} reaches a thermal conductivity of {v} W/mK."),
            5 if n => format!("{m} is never used in {} above {v} K.", APPLICATIONS[self.choice]),
            _ => format!("{m} is used in {} up to {v} K.", APPLICATIONS[self.choice]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureOptions {
    pub record_count: usize,
    pub seed: u64,
    pub corruption_rate: f64,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self {
            record_count: 100,
            seed: 0,
            corruption_rate: 0.5,
        }
    }
}

/// The recorded corruption for one record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionLabel {
    pub record_id: String,
    pub corrupted: bool,
    /// `kind:sentence_index` per edit, e.g. `negation:0`.
    pub edits: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SyntheticFixture {
    pub records: Vec<QueryRecord>,
    pub corpus: Vec<Document>,
    pub labels: Vec<CorruptionLabel>,
    pub recordings: Vec<ReplayRecording>,
    /// Config whose generator replays `recordings` from `replay.jsonl`.
    pub config: PipelineConfig,
}

fn material_name(group: usize, order: &[usize]) -> String {
    let slot = order[group % order.len()];
    let base = format!("{} {}", CATIONS[slot / ANIONS.len()], ANIONS[slot % ANIONS.len()]);
    match group / order.len() {
        0 => base,
        round => format!("{base} phase {}", round + 1),
    }
}

fn probs(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(lo..hi)).collect()
}

fn confabulation(material: &str, rng: &mut ChaCha8Rng) -> String {
    let mut frames: Vec<usize> = (0..FRAMES).collect();
    frames.shuffle(rng);
    let count = rng.gen_range(2..=4);
    frames[..count]
        .iter()
        .map(|&f| Claim::random(material, f, rng).render())
        .collect::<Vec<_>>()
        .join(" ")
}

fn shuffled(sentences: &[String], rng: &mut ChaCha8Rng) -> String {
    let mut s = sentences.to_vec();
    s.shuffle(rng);
    s.join(" ")
}

/// Applies one edit per claim; at least one edit is a negation.
fn corrupt(claims: &[Claim], all_materials: &[String], rng: &mut ChaCha8Rng) -> (Vec<Claim>, Vec<String>) {
    let mut out = claims.to_vec();
    let mut edits = Vec::new();
    for (i, claim) in out.iter_mut().enumerate() {
        let mut kinds = vec!["negation", "entity_swap"];
        if claim.has_number() {
            kinds.push("numeric");
        }
        let kind = *kinds.choose(rng).expect("non-empty");
        match kind {
            "negation" => claim.negated = true,
            "entity_swap" => {
                let others: Vec<&String> = all_materials.iter().filter(|m| **m != claim.material).collect();
                claim.material = others.choose(rng).map_or_else(
                    || format!("{} alloy", claim.material),
                    |m| (*m).clone(),
                );
            }
            _ => {
                let factor = rng.gen_range(1.5..3.0);
                claim.value = if claim.frame == 0 {
                    ((claim.value * factor) * 10.0).round() / 10.0
                } else {
                    (claim.value * factor).round()
                };
            }
        }
        edits.push(format!("{kind}:{i}"));
    }
    if !out.iter().any(|c| c.negated) {
        let i = rng.gen_range(0..out.len());
        out[i].negated = true;
        edits.push(format!("negation:{i}"));
    }
    (out, edits)
}

fn generate_reply(request: &GenerationRequest, texts: Vec<(String, Vec<f64>)>) -> ReplayRecording {
    let body = serde_json::to_value(request).expect("request serializes");
    let reply = GenerateResponse {
        samples: texts
            .into_iter()
            .map(|(text, token_probs)| GenerationSample { text, token_probs })
            .collect(),
    };
    ReplayRecording::new(GENERATE, &body, serde_json::to_value(reply).expect("reply serializes"))
}

/// Builds a deterministic synthetic dataset for `options` and the replay
/// recording that goes with `base_config` (its intrinsic sampling settings and
/// seed decide which requests are recorded).
pub fn gen_fixture(options: &FixtureOptions, base_config: &PipelineConfig) -> Result<SyntheticFixture> {
    if options.record_count == 0 {
        return Err(Error::InvalidInput("record count must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&options.corruption_rate) {
        return Err(Error::InvalidInput("corruption rate must be in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut order: Vec<usize> = (0..CATIONS.len() * ANIONS.len()).collect();
    order.shuffle(&mut rng);
    let groups = options.record_count.div_ceil(GROUP_SIZE);
    let materials: Vec<String> = (0..groups).map(|g| material_name(g, &order)).collect();

    let intrinsic = &base_config.intrinsic;
    let mut records = Vec::with_capacity(options.record_count);
    let mut corpus = Vec::with_capacity(groups);
    let mut labels = Vec::with_capacity(options.record_count);
    let mut recordings = Vec::new();

    for (g, material) in materials.iter().enumerate() {
        let mut frames: Vec<usize> = (0..FRAMES).collect();
        frames.shuffle(&mut rng);
        let count = rng.gen_range(3..=4);
        let claims: Vec<Claim> = frames[..count]
            .iter()
            .map(|&f| Claim::random(material, f, &mut rng))
            .collect();
        let truth_sentences: Vec<String> = claims.iter().map(Claim::render).collect();
        let truth = truth_sentences.join(" ");
        let group_id = format!("group-{g:03}");
        corpus.push(Document {
            document_id: group_id.clone(),
            text: truth.clone(),
        });

        for member in 0..GROUP_SIZE {
            let index = g * GROUP_SIZE + member;
            if index >= options.record_count {
                break;
            }
            let record_id = format!("rec-{index:04}");
            let query = QUERY_FORMS[member].replace("{m}", material);
            let corrupted = rng.gen_bool(options.corruption_rate);
            let (response, edits, lo, hi) = if corrupted {
                let (edited, edits) = corrupt(&claims, &materials, &mut rng);
                let text = edited.iter().map(Claim::render).collect::<Vec<_>>().join(" ");
                (text, edits, 0.2, 0.95)
            } else {
                (truth.clone(), Vec::new(), 0.85, 0.99)
            };
            let sample = |rng: &mut ChaCha8Rng| {
                let text = if corrupted {
                    confabulation(material, rng)
                } else {
                    shuffled(&truth_sentences, rng)
                };
                let p = probs(rng, 12, lo, hi);
                (text, p)
            };

            let request = GenerationRequest {
                prompt: query.clone(),
                temperature: intrinsic.sample_temperature,
                sample_count: intrinsic.sample_count,
                seed: base_config.seed,
            };
            let samples = (0..intrinsic.sample_count).map(|_| sample(&mut rng)).collect();
            recordings.push(generate_reply(&request, samples));
            for &temperature in &intrinsic.temperatures {
                let request = GenerationRequest {
                    prompt: query.clone(),
                    temperature,
                    sample_count: 1,
                    seed: base_config.seed,
                };
                let one = vec![sample(&mut rng)];
                recordings.push(generate_reply(&request, one));
            }

            records.push(QueryRecord {
                record_id: record_id.clone(),
                group_id: group_id.clone(),
                query,
                is_paraphrase: member > 0,
                generated_response: response,
                ground_truth: truth.clone(),
                token_probs: Some(probs(&mut rng, 16, lo, hi)),
                computed_score: None,
                computed_level: Some(if corrupted {
                    HallucinationLevel::High
                } else {
                    HallucinationLevel::Low
                }),
            });
            labels.push(CorruptionLabel {
                record_id,
                corrupted,
                edits,
            });
        }
    }

    let mut config = base_config.clone();
    config.output_dir = None;
    config.providers.generator = ProviderSpec::replay("replay.jsonl");
    Ok(SyntheticFixture {
        records,
        corpus,
        labels,
        recordings,
        config,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `dataset.jsonl`, `labels.jsonl`, `replay.jsonl`, `config.json`, and
/// one `corpus/<document_id>` file per document under `dir`.
pub fn write_fixture(fixture: &SyntheticFixture, dir: &Path) -> Result<()> {
    let corpus_dir = dir.join("corpus");
    std::fs::create_dir_all(&corpus_dir).map_err(|e| Error::io(&corpus_dir, e))?;
    write(&dir.join("dataset.jsonl"), &write_dataset(&fixture.records)?)?;
    let mut labels = String::new();
    for l in &fixture.labels {
        labels.push_str(&serde_json::to_string(l)?);
        labels.push('\n');
    }
    write(&dir.join("labels.jsonl"), &labels)?;
    write(&dir.join("replay.jsonl"), &write_recordings(&fixture.recordings)?)?;
    write(&dir.join("config.json"), &fixture.config.to_json()?)?;
    for doc in &fixture.corpus {
        write(&corpus_dir.join(&doc.document_id), &doc.text)?;
    }
    Ok(())
}

pub fn load_labels(path: &Path) -> Result<Vec<CorruptionLabel>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragments::split_sentences;
    use crate::metrics::tokenize;
    use crate::providers::fixture::NEGATION_WORDS;

    fn fixture(n: usize, seed: u64, rate: f64) -> SyntheticFixture {
        let options = FixtureOptions {
            record_count: n,
            seed,
            corruption_rate: rate,
        };
        gen_fixture(&options, &PipelineConfig::default()).unwrap()
    }

    #[test]
    fn same_seed_same_files() {
        let a = fixture(20, 4, 0.5);
        let b = fixture(20, 4, 0.5);
        assert_eq!(write_dataset(&a.records).unwrap(), write_dataset(&b.records).unwrap());
        assert_eq!(a.labels, b.labels);
        assert_eq!(write_recordings(&a.recordings).unwrap(), write_recordings(&b.recordings).unwrap());
        let c = fixture(20, 5, 0.5);
        assert_ne!(write_dataset(&a.records).unwrap(), write_dataset(&c.records).unwrap());
    }

    #[test]
    fn zero_corruption_copies_ground_truth() {
        let f = fixture(30, 1, 0.0);
        assert!(f.records.iter().all(|r| r.generated_response == r.ground_truth));
        assert!(f.labels.iter().all(|l| !l.corrupted && l.edits.is_empty()));
    }

    #[test]
    fn corruption_split_is_near_rate() {
        let f = fixture(100, 7, 0.5);
        let corrupted = f.labels.iter().filter(|l| l.corrupted).count();
        assert!((40..=60).contains(&corrupted), "{corrupted}");
    }

    #[test]
    fn corrupted_records_differ_and_carry_a_negation() {
        let f = fixture(60, 3, 1.0);
        for (r, l) in f.records.iter().zip(&f.labels) {
            assert!(l.corrupted);
            assert_ne!(r.generated_response, r.ground_truth);
            assert!(l.edits.iter().any(|e| e.starts_with("negation")));
            let sentences = split_sentences(&r.generated_response);
            assert_eq!(sentences.len(), split_sentences(&r.ground_truth).len());
        }
    }

    #[test]
    fn ground_truth_has_no_negation_words() {
        let f = fixture(50, 9, 0.5);
        for doc in &f.corpus {
            assert!(tokenize(&doc.text).iter().all(|t| !NEGATION_WORDS.contains(&t)));
        }
    }

    #[test]
    fn groups_and_recordings_line_up() {
        let f = fixture(12, 2, 0.5);
        assert_eq!(f.records.len(), 12);
        assert_eq!(f.corpus.len(), 3);
        let originals = f.records.iter().filter(|r| !r.is_paraphrase).count();
        assert_eq!(originals, 3);
        let per_record = 1 + PipelineConfig::default().intrinsic.temperatures.len();
        assert_eq!(f.recordings.len(), 12 * per_record);
        let queries: std::collections::HashSet<_> = f.records.iter().map(|r| &r.query).collect();
        assert_eq!(queries.len(), 12);
    }

    #[test]
    fn rejects_bad_options() {
        let cfg = PipelineConfig::default();
        let mut o = FixtureOptions::default();
        o.record_count = 0;
        assert!(gen_fixture(&o, &cfg).is_err());
        o.record_count = 5;
        o.corruption_rate = 1.5;
        assert!(gen_fixture(&o, &cfg).is_err());
    }

    #[test]
    fn written_fixture_loads_back() {
        let f = fixture(10, 0, 0.5);
        let dir = tempfile::tempdir().unwrap();
        write_fixture(&f, dir.path()).unwrap();
        let records = crate::model::parse_dataset_str(
            &std::fs::read_to_string(dir.path().join("dataset.jsonl")).unwrap(),
        )
        .unwrap();
        assert_eq!(records, f.records);
        assert_eq!(load_labels(&dir.path().join("labels.jsonl")).unwrap(), f.labels);
        let corpus = crate::retrieval::load_corpus(&dir.path().join("corpus")).unwrap();
        assert_eq!(corpus.len(), 2);
        let cfg = PipelineConfig::load(&dir.path().join("config.json")).unwrap();
        assert!(cfg.providers.build(dir.path()).is_ok());
    }
}
