//! One-shot train, apply, classify, analyze and render run with a hashed
//! artifact manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{load_corpus, CorpusFormat, Trace, DEFAULT_CAP};
use crate::diagnostics::{category_shares, labeled_sequences, transition_report, EventFilter, Labels, Pooling};
use crate::entropy::{default_log2_vocab, entropy_report};
use crate::error::{Error, Result};
use crate::filter::RuleSet;
use crate::format;
use crate::render::{auto_windows, render_trace, RenderFormat, RenderPlan, DEFAULT_WINDOW};
use crate::supertokenizer::{write_segmentations, Supertokenizer};
use crate::taxonomy::classify_table;
use crate::trainer::{compression_curve, train, TrainConfig, DEFAULT_BUDGET};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub budget: u32,
    pub cap: u64,
    pub filter: RuleSet,
    pub base_vocab_size: Option<u32>,
    pub out_dir: PathBuf,
    /// Number of leading traces rendered to HTML.
    pub render_samples: usize,
    pub log2_vocab: Option<f64>,
    pub pooling: Pooling,
}

impl PipelineConfig {
    pub fn new(corpus: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            corpus: corpus.into(),
            budget: DEFAULT_BUDGET,
            cap: DEFAULT_CAP,
            filter: RuleSet::all(),
            base_vocab_size: None,
            out_dir: out_dir.into(),
            render_samples: 3,
            log2_vocab: None,
            pooling: Pooling::Pooled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepStatus {
    Done,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub name: String,
    pub status: StepStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestConfig {
    pub corpus_file: String,
    pub corpus_sha256: String,
    pub budget: u32,
    pub cap: u64,
    pub filter: RuleSet,
    pub base_vocab_size: Option<u32>,
    pub log2_vocab: f64,
    pub render_samples: usize,
    pub pooling: Pooling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ManifestConfig,
    pub n_traces: usize,
    pub n_merges: usize,
    pub token_reduction: f64,
    pub steps: Vec<StepRecord>,
    pub files: Vec<FileRecord>,
}

impl Manifest {
    pub fn file(&self, path: &str) -> Option<&FileRecord> {
        self.files.iter().find(|f| f.path == path)
    }

    pub fn step(&self, name: &str) -> Option<&StepRecord> {
        self.steps.iter().find(|s| s.name == name)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<FileRecord>,
    steps: Vec<StepRecord>,
}

impl Outputs<'_> {
    fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        format::write_bytes(&path, bytes)?;
        self.files.push(FileRecord {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn put_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let text = format::to_versioned_json(value)?;
        self.put(rel, text.as_bytes())
    }

    /// Records an artifact some other writer already produced.
    fn record(&mut self, rel: &str) -> Result<()> {
        let path = self.dir.join(rel);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.files.push(FileRecord {
            path: rel.to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn step(&mut self, name: &str, status: StepStatus, note: Option<String>) {
        self.steps.push(StepRecord {
            name: name.into(),
            status,
            note,
        });
    }
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn curve_prefixes(n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=n).step_by(10).collect();
    if v.last() != Some(&n) {
        v.push(n);
    }
    v
}

fn labels_of(traces: &[Trace]) -> Labels {
    Labels {
        labels: traces
            .iter()
            .filter_map(|t| t.correct.map(|c| (t.id.clone(), c)))
            .collect(),
    }
}

/// Runs every stage and writes `manifest.json` last. The manifest carries no
/// absolute paths or timestamps, so identical inputs give identical bytes.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Manifest> {
    let corpus_bytes = std::fs::read(&config.corpus).map_err(|e| Error::io(&config.corpus, e))?;
    let traces = load_corpus(&config.corpus, CorpusFormat::Jsonl)?;
    let log2_vocab = config.log2_vocab.unwrap_or_else(default_log2_vocab::<f64>);
    let mut out = Outputs {
        dir: &config.out_dir,
        files: Vec::new(),
        steps: Vec::new(),
    };

    let table = train(
        &traces,
        &TrainConfig {
            budget: config.budget,
            cap: config.cap,
            rules: config.filter.clone(),
            base_vocab_size: config.base_vocab_size,
        },
    )?;
    out.put_json("merges.json", &table)?;
    out.step("train", StepStatus::Done, None);

    let segs = Supertokenizer::new(&table)?.apply_corpus(&traces)?;
    write_segmentations(&config.out_dir.join("seg.jsonl"), &segs)?;
    out.record("seg.jsonl")?;
    let curve = compression_curve(&traces, &table, &curve_prefixes(table.len()))?;
    let token_reduction = curve.last().map_or(0.0, |p| p.reduction);
    out.put_json("curve.json", &serde_json::json!({ "points": curve }))?;
    out.step("apply", StepStatus::Done, None);

    let cmap = classify_table(&table);
    out.put_json("categories.json", &cmap)?;
    out.put_json("category_shares.json", &category_shares::<f64>(&cmap, &segs)?)?;
    out.step("classify", StepStatus::Done, None);

    if traces.iter().all(|t| t.entropy.is_some()) && !traces.is_empty() {
        let report = entropy_report::<f64>(&traces, &segs, log2_vocab)?;
        out.put_json("entropy.json", &report)?;
        out.step("entropy", StepStatus::Done, None);
    } else {
        out.step("entropy", StepStatus::Skipped, Some("entropy missing on one or more traces".into()));
    }

    let labels = labels_of(&traces);
    if labels.labels.is_empty() {
        out.step("transitions", StepStatus::Skipped, Some("no correctness labels".into()));
    } else {
        out.put_json("labels.json", &labels)?;
        let seqs = labeled_sequences(&segs, &cmap, &labels, EventFilter::All)?;
        let report = transition_report::<f64>(&seqs, config.pooling, EventFilter::All)?;
        out.put_json("transitions.json", &report)?;
        out.step("transitions", StepStatus::Done, None);
    }

    let n_render = config.render_samples.min(traces.len());
    for (i, (trace, seg)) in traces.iter().zip(&segs).take(n_render).enumerate() {
        let plan = RenderPlan {
            trace_id: trace.id.clone(),
            windows: auto_windows(seg, &cmap, 3, DEFAULT_WINDOW),
            format: RenderFormat::Html,
        };
        let doc = render_trace(trace, seg, &cmap, &plan)?;
        out.put(&format!("render/{i:04}-{}.html", file_stem(&trace.id)), &doc)?;
    }
    if n_render > 0 {
        out.step("render", StepStatus::Done, None);
    } else {
        out.step("render", StepStatus::Skipped, Some("no traces to render".into()));
    }

    let manifest = Manifest {
        config: ManifestConfig {
            corpus_file: config
                .corpus
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            corpus_sha256: sha256_hex(&corpus_bytes),
            budget: config.budget,
            cap: config.cap,
            filter: config.filter.clone(),
            base_vocab_size: config.base_vocab_size,
            log2_vocab,
            render_samples: config.render_samples,
            pooling: config.pooling,
        },
        n_traces: traces.len(),
        n_merges: table.len(),
        token_reduction,
        steps: out.steps,
        files: out.files,
    };
    format::write_versioned(&config.out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Runs `f` on a dedicated pool of `threads` workers, or the global pool when `None`.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
