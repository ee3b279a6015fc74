//! Trace corpora: JSONL ingestion, offset validation and capped pair counting.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier in the combined base + supertoken vocabulary.
pub type TokenId = u32;

/// Ordered pair of adjacent token ids.
pub type Pair = (TokenId, TokenId);

/// Default per-trace cap on a pair's contribution.
pub const DEFAULT_CAP: u64 = 10;

/// Cap value that disables capping.
pub const UNCAPPED: u64 = u64::MAX;

/// A base token: an exact byte slice `[start, end)` of its trace text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(String, usize, usize)", into = "(String, usize, usize)")]
pub struct BaseToken {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl BaseToken {
    pub fn new(text: impl Into<String>, start: usize, end: usize) -> Self {
        Self {
            text: text.into(),
            start,
            end,
        }
    }
}

impl From<(String, usize, usize)> for BaseToken {
    fn from((text, start, end): (String, usize, usize)) -> Self {
        Self { text, start, end }
    }
}

impl From<BaseToken> for (String, usize, usize) {
    fn from(t: BaseToken) -> Self {
        (t.text, t.start, t.end)
    }
}

/// One reasoning trace with its base tokenization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub id: String,
    pub text: String,
    pub tokens: Vec<BaseToken>,
    /// Per-token conditional entropy in bits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

impl Trace {
    /// Builds a trace from token surfaces, computing contiguous offsets.
    pub fn from_pieces<S: AsRef<str>>(id: impl Into<String>, pieces: &[S]) -> Self {
        let mut text = String::new();
        let mut tokens = Vec::with_capacity(pieces.len());
        for p in pieces {
            let p = p.as_ref();
            let start = text.len();
            text.push_str(p);
            tokens.push(BaseToken::new(p, start, text.len()));
        }
        Self {
            id: id.into(),
            text,
            tokens,
            entropy: None,
            correct: None,
        }
    }

    pub fn with_entropy(mut self, entropy: Vec<f64>) -> Self {
        self.entropy = Some(entropy);
        self
    }

    pub fn with_correct(mut self, correct: bool) -> Self {
        self.correct = Some(correct);
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_texts(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }

    /// Checks offset tiling and entropy shape.
    pub fn validate(&self) -> Result<()> {
        let mismatch = || Error::OffsetMismatch(self.id.clone());
        let mut cursor = 0usize;
        for tok in &self.tokens {
            if tok.start != cursor || tok.end <= tok.start || tok.end > self.text.len() {
                return Err(mismatch());
            }
            match self.text.get(tok.start..tok.end) {
                Some(slice) if slice == tok.text => {}
                _ => return Err(mismatch()),
            }
            cursor = tok.end;
        }
        if cursor != self.text.len() {
            return Err(mismatch());
        }
        if let Some(h) = &self.entropy {
            if h.len() != self.tokens.len() {
                return Err(Error::EntropyLengthMismatch(self.id.clone()));
            }
            if h.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidEntropy(self.id.clone()));
            }
        }
        Ok(())
    }
}

/// Supported corpus encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    #[default]
    Jsonl,
}

/// Loads and validates a corpus file.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<Trace>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        CorpusFormat::Jsonl => read_corpus(BufReader::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        }),
    }
}

/// Reads JSONL trace records from any buffered reader. Blank lines are skipped;
/// line numbers in errors are 1-based.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Trace>> {
    let mut traces = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let trace: Trace = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        trace.validate()?;
        if !seen.insert(trace.id.clone()) {
            return Err(Error::DuplicateTraceId(trace.id));
        }
        traces.push(trace);
    }
    Ok(traces)
}

/// Writes traces back out as JSONL.
pub fn write_corpus(path: &Path, traces: &[Trace]) -> Result<()> {
    let mut out = String::new();
    for t in traces {
        out.push_str(&serde_json::to_string(t)?);
        out.push('\n');
    }
    crate::format::write_bytes(path, out.as_bytes())
}

/// Capped adjacent-pair frequencies over a corpus segmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairCountTable {
    pub counts: FxHashMap<Pair, u64>,
    pub cap: u64,
}

impl PairCountTable {
    pub fn get(&self, pair: Pair) -> u64 {
        self.counts.get(&pair).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Non-overlapping left-to-right occurrences of every adjacent pair in one sequence.
///
/// Pairs of distinct ids can never overlap; for a run of `k` identical ids the
/// self-pair is counted `k / 2` times, which is exactly how many merges fire.
pub fn pair_occurrences(seq: &[TokenId]) -> FxHashMap<Pair, u64> {
    let mut out = FxHashMap::default();
    let mut i = 0;
    while i + 1 < seq.len() {
        let pair = (seq[i], seq[i + 1]);
        *out.entry(pair).or_insert(0) += 1;
        // A counted self-pair consumes its right token.
        if pair.0 == pair.1 && i + 2 < seq.len() && seq[i + 2] == pair.0 {
            // next window (i+1, i+2) overlaps this occurrence
            i += 2;
            continue;
        }
        i += 1;
    }
    out
}

/// Sums `min(cap, occurrences)` per pair across all sequences.
///
/// Shards are reduced by integer addition, so the table does not depend on
/// thread count or shard boundaries.
pub fn count_pairs<S: AsRef<[TokenId]> + Sync>(sequences: &[S], cap: u64) -> PairCountTable {
    assert!(cap >= 1, "cap must be positive");
    let counts = sequences
        .par_iter()
        .fold(FxHashMap::default, |mut acc: FxHashMap<Pair, u64>, seq| {
            for (pair, n) in pair_occurrences(seq.as_ref()) {
                *acc.entry(pair).or_insert(0) += n.min(cap);
            }
            acc
        })
        .reduce(FxHashMap::default, |mut a, b| {
            if a.len() < b.len() {
                return merge_counts(b, a);
            }
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });
    PairCountTable { counts, cap }
}

fn merge_counts(mut into: FxHashMap<Pair, u64>, from: FxHashMap<Pair, u64>) -> FxHashMap<Pair, u64> {
    for (k, v) in from {
        *into.entry(k).or_insert(0) += v;
    }
    into
}
