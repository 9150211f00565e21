use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use halludetect::config::{PipelineConfig, CONFIG_ENV};
use halludetect::fixture::{gen_fixture, write_fixture, FixtureOptions};
use halludetect::model::{parse_dataset, QueryRecord};
use halludetect::pipeline::{
    canonical_json, confusion_csv, load_level_pairs, run_batch, run_pipeline, write_report, Engine,
    RecordOutcome, RunStatus,
};
use halludetect::retrieval::{load_corpus, Document};
use halludetect::scoring::{confusion, rank_groups, GroupPhcs, PhcsMode};
use halludetect::{Error, Result};

const EXIT_USAGE: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "halludetect", version, about = "Hallucination detection for generated scientific answers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline over a dataset and write the report directory.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// Directory of text files or a JSONL file of documents.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Defaults to $HALLUDETECT_CONFIG, then built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rank paraphrase groups by score spread.
    Phcs {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Sample)]
        mode: Mode,
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Which precomputed field to score.
        #[arg(long, value_enum, default_value_t = ScoreField::Level)]
        score: ScoreField,
        #[arg(long)]
        json: bool,
    },
    /// Export one record's fact graph as node-link JSON.
    Graph {
        #[arg(long)]
        record: String,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Confusion statistics from an evaluate output directory.
    Report {
        /// Output directory of `evaluate`, or an assessments JSONL file.
        #[arg(long)]
        assessments: PathBuf,
        /// Also write confusion.json and a heatmap CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset, corpus, replay recordings and config.
    GenFixture {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        corruption_rate: f64,
        /// Base config whose settings the generated config inherits.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sample,
    Population,
}

impl From<Mode> for PhcsMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Sample => PhcsMode::Sample,
            Mode::Population => PhcsMode::Population,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreField {
    /// `computed_level` as 1..3
    Level,
    /// `computed_score`
    Score,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Evaluate {
            dataset,
            corpus,
            config,
            out,
            parallelism,
            seed,
        } => {
            let (mut cfg, base_dir) = load_config(config)?;
            if let Some(p) = parallelism {
                cfg.parallelism = p;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let out = out
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))?;
            let records = load_dataset(&dataset)?;
            let engine = build_engine(cfg, &base_dir, corpus.as_deref())?;
            let report = run_batch(&records, &engine)?;
            write_report(&report, &out)?;
            log::info!(
                "{} assessed, {} failed, report in {}",
                report.assessments.len(),
                report.failures.len(),
                out.display()
            );
            for f in &report.failures {
                eprintln!("record {} failed at {}: {}", f.record_id, f.stage, f.error);
            }
            Ok(match report.status {
                RunStatus::Clean => ExitCode::SUCCESS,
                RunStatus::Partial => ExitCode::from(EXIT_PARTIAL),
            })
        }
        Command::Phcs {
            dataset,
            mode,
            top,
            score,
            json,
        } => {
            let records = load_dataset(&dataset)?;
            let rows = rank_groups(&group_scores(&records, score), mode.into(), top)?;
            if json {
                emit(&canonical_json(&rows)?)?;
            } else {
                emit(phcs_table(&rows).trim_end())?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Graph {
            record,
            dataset,
            corpus,
            config,
            out,
        } => {
            let (cfg, base_dir) = load_config(config)?;
            let records = load_dataset(&dataset)?;
            let rec = records
                .iter()
                .find(|r| r.record_id == record)
                .ok_or_else(|| Error::InvalidInput(format!("no record `{record}` in {}", dataset.display())))?;
            let engine = build_engine(cfg, &base_dir, corpus.as_deref())?;
            match run_pipeline(rec, &engine) {
                RecordOutcome::Assessed(boxed) => {
                    let json = boxed.1.graph.to_json()?;
                    match out {
                        Some(path) => std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?,
                        None => emit(&json)?,
                    }
                    Ok(ExitCode::SUCCESS)
                }
                RecordOutcome::Failed(f) => {
                    eprintln!("record {} failed at {}: {}", f.record_id, f.stage, f.error);
                    Ok(ExitCode::from(EXIT_PARTIAL))
                }
            }
        }
        Command::Report { assessments, out } => {
            let pairs = load_level_pairs(&assessments)?;
            let (computed, recomputed): (Vec<_>, Vec<_>) = pairs
                .iter()
                .filter_map(|p| p.computed_level.map(|c| (c, p.recomputed_level)))
                .unzip();
            if computed.is_empty() {
                return Err(Error::InvalidInput("no assessment carries a computed_level".into()));
            }
            let matrix = confusion(&computed, &recomputed)?;
            let json = canonical_json(&matrix)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                let path = dir.join("confusion.json");
                std::fs::write(&path, &json).map_err(|e| Error::io(&path, e))?;
                let path = dir.join("confusion.csv");
                std::fs::write(&path, confusion_csv(&matrix)?).map_err(|e| Error::io(&path, e))?;
            }
            emit(&json)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::GenFixture {
            n,
            seed,
            out,
            corruption_rate,
            config,
        } => {
            let base = match config {
                Some(path) => PipelineConfig::load(&path)?,
                None => PipelineConfig::default(),
            };
            let options = FixtureOptions {
                record_count: n,
                seed,
                corruption_rate,
            };
            let fixture = gen_fixture(&options, &base)?;
            write_fixture(&fixture, &out)?;
            log::info!("wrote {} records to {}", fixture.records.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// The config and the directory its relative paths resolve against.
fn load_config(flag: Option<PathBuf>) -> Result<(PipelineConfig, PathBuf)> {
    let path = flag.or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    match path {
        Some(path) => {
            let cfg = PipelineConfig::load(&path)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok((cfg, base))
        }
        None => Ok((PipelineConfig::default(), PathBuf::from("."))),
    }
}

/// Prints a line to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn load_dataset(path: &Path) -> Result<Vec<QueryRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(BufReader::new(file))
}

fn build_engine(cfg: PipelineConfig, base_dir: &Path, corpus: Option<&Path>) -> Result<Engine> {
    let docs: Vec<Document> = match corpus {
        Some(p) => load_corpus(p)?,
        None => Vec::new(),
    };
    let providers = cfg.providers.build(base_dir)?;
    Engine::new(cfg, providers, &docs)
}

fn group_scores(records: &[QueryRecord], field: ScoreField) -> BTreeMap<String, Vec<f64>> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records {
        let score = match field {
            ScoreField::Level => r.computed_level.map(|l| l.code() as f64),
            ScoreField::Score => r.computed_score,
        };
        if let Some(s) = score {
            groups.entry(r.group_id.clone()).or_default().push(s);
        }
    }
    groups
}

fn phcs_table(rows: &[GroupPhcs]) -> String {
    let width = rows.iter().map(|r| r.group_id.len()).max().unwrap_or(0).max(5);
    let mut out = format!("{:<width$}  {:>8}  {:>4}  {:>8}\n", "group", "phcs", "n", "mean");
    for r in rows {
        out.push_str(&format!(
            "{:<width$}  {:>8.4}  {:>4}  {:>8.4}\n",
            r.group_id, r.phcs, r.size, r.mean_score
        ));
    }
    out
}
