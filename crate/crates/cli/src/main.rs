use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use supertoken::corpus::{count_pairs, CorpusFormat};
use supertoken::diagnostics::{labeled_sequences, transition_report, EventFilter, Labels, Pooling};
use supertoken::entropy::{assign_roles, cross_model_gap, default_log2_vocab, entropy_report, role_stats};
use supertoken::filter::is_eligible;
use supertoken::format;
use supertoken::intervals::{accuracy_ci, accuracy_ci_with_delta, paired_token_ci};
use supertoken::render::{auto_windows, render_trace, RenderFormat, RenderPlan, DEFAULT_WINDOW};
use supertoken::supertokenizer::{read_segmentations, write_segmentations, Supertokenizer};
use supertoken::{
    classify_table, extend_embeddings, load_corpus, run_pipeline, train, BaseVocab, CategoryMap, EmbeddingInit, Embeddings, Error, ErrorKind, MergeTable, PipelineConfig, RuleSet,
    TrainConfig, Trace, DEFAULT_CAP,
};

#[derive(Parser)]
#[command(name = "supertoken", version, about = "Cross-word BPE supertokens for reasoning traces")]
struct Cli {
    /// Worker thread cap.
    #[arg(long, global = true, env = "SUPERTOKEN_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a merge table from a corpus.
    Train(TrainArgs),
    /// Supertokenize a corpus with a merge table.
    Apply {
        #[arg(long)]
        merges: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign a structural category to every merge.
    Classify {
        #[arg(long)]
        merges: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-role entropy statistics and the compression ceiling.
    Entropy {
        #[arg(long)]
        merges: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// log2 of the extended vocabulary size.
        #[arg(long)]
        log2_vocab: Option<f64>,
        /// Same traces scored by a second model, for the cross-model gap.
        #[arg(long)]
        cross: Option<PathBuf>,
    },
    /// Category transition matrices split by correctness.
    Transitions {
        #[arg(long)]
        seg: PathBuf,
        #[arg(long)]
        categories: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum, default_value_t = PoolingArg::Pooled)]
        pooling: PoolingArg,
        /// Drop Reasoning and Computation events.
        #[arg(long)]
        signposts_only: bool,
    },
    /// 95% interval for an accuracy or token-count difference.
    Ci {
        #[arg(long, value_enum)]
        mode: CiMode,
        #[arg(long)]
        base: f64,
        #[arg(long)]
        sft: f64,
        #[arg(long)]
        n: u64,
        /// Centre the accuracy interval on this reported difference.
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<f64>,
    },
    /// Ribbon and zoom-window view of one trace.
    Render {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        trace: String,
        #[arg(long)]
        seg: PathBuf,
        #[arg(long)]
        categories: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Html)]
        format: FormatArg,
        #[arg(long)]
        out: PathBuf,
        /// Zoom window as START:END in output tokens; repeatable. Chosen automatically when absent.
        #[arg(long = "window", value_parser = parse_window)]
        windows: Vec<(usize, usize)>,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        width: usize,
    },
    /// Train, apply, classify, analyze and render in one run.
    Pipeline(PipelineArgs),
    /// List frequent adjacent pairs with their filter verdicts.
    FilterReport {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 50)]
        top: usize,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u64,
        #[command(flatten)]
        filter: FilterArgs,
    },
    /// Append embedding rows for new supertokens.
    Embed {
        #[arg(long)]
        merges: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = InitArg::Pairwise)]
        init: InitArg,
    },
}

#[derive(Args)]
struct FilterArgs {
    /// Disable the eligibility filter.
    #[arg(long, conflicts_with = "filter_config")]
    no_filter: bool,
    /// JSON rule set: {"format_version": 1, "enabled": [...]}.
    #[arg(long)]
    filter_config: Option<PathBuf>,
}

impl FilterArgs {
    fn rules(&self) -> Result<RuleSet> {
        if self.no_filter {
            return Ok(RuleSet::disabled());
        }
        match &self.filter_config {
            Some(p) => Ok(format::read_versioned(p)?),
            None => Ok(RuleSet::all()),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = supertoken::trainer::DEFAULT_BUDGET)]
    budget: u32,
    #[arg(long, default_value_t = DEFAULT_CAP, value_parser = clap::value_parser!(u64).range(1..))]
    cap: u64,
    #[arg(long)]
    base_vocab_size: Option<u32>,
    #[command(flatten)]
    filter: FilterArgs,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = supertoken::trainer::DEFAULT_BUDGET)]
    budget: u32,
    #[arg(long, default_value_t = DEFAULT_CAP, value_parser = clap::value_parser!(u64).range(1..))]
    cap: u64,
    #[arg(long)]
    base_vocab_size: Option<u32>,
    #[arg(long, default_value_t = 3)]
    render_samples: usize,
    #[arg(long)]
    log2_vocab: Option<f64>,
    #[arg(long, value_enum, default_value_t = PoolingArg::Pooled)]
    pooling: PoolingArg,
    #[command(flatten)]
    filter: FilterArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum CiMode {
    Accuracy,
    Tokens,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Html,
    Ansi,
}

#[derive(Clone, Copy, ValueEnum)]
enum PoolingArg {
    Pooled,
    PerTraceMean,
}

impl From<PoolingArg> for Pooling {
    fn from(p: PoolingArg) -> Self {
        match p {
            PoolingArg::Pooled => Pooling::Pooled,
            PoolingArg::PerTraceMean => Pooling::PerTraceMean,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Pairwise,
    Flat,
}

fn parse_window(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected START:END")?;
    let a = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    format::write_versioned(path, value).with_context(|| format!("writing {}", path.display()))
}

fn corpus(path: &Path) -> Result<Vec<Trace>> {
    load_corpus(path, CorpusFormat::Jsonl).with_context(|| format!("loading corpus {}", path.display()))
}

fn merge_table(path: &Path) -> Result<MergeTable> {
    MergeTable::read(path).with_context(|| format!("reading merge table {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => {
            let traces = corpus(&a.input)?;
            let config = TrainConfig {
                budget: a.budget,
                cap: a.cap,
                rules: a.filter.rules()?,
                base_vocab_size: a.base_vocab_size,
            };
            let table = train(&traces, &config).context("train")?;
            table.write(&a.out)?;
            eprintln!("{} merges written to {}", table.len(), a.out.display());
        }
        Command::Apply { merges, input, out } => {
            let table = merge_table(&merges)?;
            let traces = corpus(&input)?;
            let segs = Supertokenizer::new(&table)?.apply_corpus(&traces).context("apply")?;
            write_segmentations(&out, &segs)?;
        }
        Command::Classify { merges, out } => {
            let cmap = classify_table(&merge_table(&merges)?);
            cmap.write(&out)?;
            for (c, n) in cmap.counts() {
                eprintln!("{c:<16}{n}");
            }
            if !cmap.unclassified.is_empty() {
                eprintln!("unclassified    {}", cmap.unclassified.len());
            }
        }
        Command::Entropy {
            merges,
            input,
            report,
            log2_vocab,
            cross,
        } => {
            let table = merge_table(&merges)?;
            let traces = corpus(&input)?;
            let segs = Supertokenizer::new(&table)?.apply_corpus(&traces)?;
            let log2v = log2_vocab.unwrap_or_else(default_log2_vocab::<f64>);
            let rep = entropy_report::<f64>(&traces, &segs, log2v).context("entropy")?;
            let mut doc = serde_json::to_value(&rep)?;
            if let Some(cross) = cross {
                let other = corpus(&cross)?;
                let by_id: BTreeMap<&str, &Trace> = other.iter().map(|t| (t.id.as_str(), t)).collect();
                let aligned: Vec<Trace> = traces
                    .iter()
                    .map(|t| {
                        by_id
                            .get(t.id.as_str())
                            .map(|o| (*o).clone())
                            .ok_or_else(|| Error::InvalidInput(format!("trace {:?} missing from cross-scored corpus", t.id)))
                    })
                    .collect::<std::result::Result<_, _>>()?;
                let roles: Vec<_> = segs.iter().map(assign_roles).collect();
                let cross_stats = role_stats::<f64>(&aligned, &roles)?;
                let gap = cross_model_gap(&rep.stats.means(), &cross_stats.means())?;
                doc["cross_model"] = serde_json::json!({ "stats": cross_stats, "gap": gap });
            }
            write_json(&report, &doc)?;
        }
        Command::Transitions {
            seg,
            categories,
            labels,
            report,
            pooling,
            signposts_only,
        } => {
            let segs = read_segmentations(&seg)?;
            let cmap = CategoryMap::read(&categories)?;
            let labels = Labels::read(&labels)?;
            let filter = if signposts_only {
                EventFilter::SignpostsOnly
            } else {
                EventFilter::All
            };
            let seqs = labeled_sequences(&segs, &cmap, &labels, filter)?;
            let rep = transition_report::<f64>(&seqs, pooling.into(), filter)?;
            write_json(&report, &rep)?;
        }
        Command::Ci {
            mode,
            base,
            sft,
            n,
            delta,
        } => {
            let est = match (mode, delta) {
                (CiMode::Accuracy, None) => accuracy_ci(base, sft, n)?,
                (CiMode::Accuracy, Some(d)) => accuracy_ci_with_delta(base, sft, n, d)?,
                (CiMode::Tokens, _) => paired_token_ci(base, sft, n)?,
            };
            println!("{}", serde_json::to_string_pretty(&est)?);
        }
        Command::Render {
            input,
            trace,
            seg,
            categories,
            format,
            out,
            windows,
            k,
            width,
        } => {
            let traces = corpus(&input)?;
            let t = traces
                .iter()
                .find(|t| t.id == trace)
                .ok_or_else(|| Error::InvalidInput(format!("trace {trace:?} not in corpus")))?;
            let s = read_segmentations(&seg)?
                .into_iter()
                .find(|s| s.trace_id == trace)
                .ok_or_else(|| Error::InvalidInput(format!("trace {trace:?} not in segmentations")))?;
            let cmap = CategoryMap::read(&categories)?;
            let windows = if windows.is_empty() {
                auto_windows(&s, &cmap, k, width)
            } else {
                windows
            };
            let plan = RenderPlan {
                trace_id: trace,
                windows,
                format: match format {
                    FormatArg::Html => RenderFormat::Html,
                    FormatArg::Ansi => RenderFormat::Ansi,
                },
            };
            let doc = render_trace(t, &s, &cmap, &plan)?;
            format::write_bytes(&out, &doc)?;
        }
        Command::Pipeline(a) => {
            let config = PipelineConfig {
                corpus: a.input,
                budget: a.budget,
                cap: a.cap,
                filter: a.filter.rules()?,
                base_vocab_size: a.base_vocab_size,
                out_dir: a.out_dir,
                render_samples: a.render_samples,
                log2_vocab: a.log2_vocab,
                pooling: a.pooling.into(),
            };
            let manifest = run_pipeline(&config).context("pipeline")?;
            for s in &manifest.steps {
                let note = s.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default();
                eprintln!("{:<12}{:?}{note}", s.name, s.status);
            }
        }
        Command::FilterReport { input, top, cap, filter } => {
            let traces = corpus(&input)?;
            let rules = filter.rules()?;
            let vocab = BaseVocab::from_traces(&traces);
            let seqs: Vec<Vec<u32>> = traces
                .iter()
                .map(|t| vocab.encode(&t.token_texts().collect::<Vec<_>>()))
                .collect::<std::result::Result<_, _>>()?;
            let table = count_pairs(&seqs, cap);
            let mut rows: Vec<(u64, String)> = table
                .counts
                .iter()
                .map(|(&(l, r), &n)| {
                    let s = format!("{}{}", vocab.token(l).unwrap_or(""), vocab.token(r).unwrap_or(""));
                    (n, s)
                })
                .collect();
            rows.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            for (n, surface) in rows.into_iter().take(top) {
                let e = is_eligible(&surface, &rules);
                let verdict = if e.eligible { "eligible" } else { "rejected" };
                let matched: Vec<String> = e.matched.iter().map(|k| k.to_string()).collect();
                let matched = if matched.is_empty() { "-".to_string() } else { matched.join(",") };
                println!("{n}\t{verdict}\t{matched}\t{surface:?}");
            }
        }
        Command::Embed {
            merges,
            matrix,
            out,
            init,
        } => {
            let table = merge_table(&merges)?;
            let m = Embeddings::<f32>::read(&matrix)?;
            let init = match init {
                InitArg::Pairwise => EmbeddingInit::Pairwise,
                InitArg::Flat => EmbeddingInit::Flat,
            };
            extend_embeddings(&m, &table, init)?.write(&out)?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e.kind() {
                ErrorKind::Validation => 1,
                ErrorKind::Io => 2,
                ErrorKind::Internal => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 1;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
