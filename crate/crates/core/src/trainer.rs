//! Merge-table learning: iterated capped-frequency pair selection under the
//! structural filter, BPE-style over the growing base + super vocabulary.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{count_pairs, Pair, TokenId, Trace, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::filter::{is_eligible, RuleSet};
use crate::format;
use crate::supertokenizer::merge_pair_in_place;
use crate::vocab::BaseVocab;

pub const DEFAULT_BUDGET: u32 = 250;

/// Merges below this capped frequency are never adopted.
pub const MIN_MERGE_FREQUENCY: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeRule {
    pub rank: u32,
    pub left: TokenId,
    pub right: TokenId,
    pub new_id: TokenId,
    pub surface: String,
    /// Flattened base-token decomposition.
    pub parts: Vec<String>,
    /// Capped corpus frequency at adoption time.
    pub frequency: u64,
}

impl MergeRule {
    pub fn pair(&self) -> Pair {
        (self.left, self.right)
    }

    /// Number of base tokens the merged token spans.
    pub fn span_len(&self) -> usize {
        self.parts.len()
    }
}

/// Ordered merge rules plus the base vocabulary their ids refer to.
///
/// Supertoken ids are `base_vocab_size + rank`. `base_vocab` lists the base
/// surfaces by id and may be shorter than `base_vocab_size` when the declared
/// size is that of an external model vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeTable {
    pub base_vocab_size: u32,
    pub budget: u32,
    pub base_vocab: Vec<String>,
    pub merges: Vec<MergeRule>,
}

impl MergeTable {
    pub fn empty(base_vocab: Vec<String>, base_vocab_size: u32, budget: u32) -> Self {
        Self {
            base_vocab_size,
            budget,
            base_vocab,
            merges: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.base_vocab_size as usize + self.merges.len()
    }

    pub fn is_super(&self, id: TokenId) -> bool {
        id >= self.base_vocab_size
    }

    pub fn merge_for(&self, id: TokenId) -> Option<&MergeRule> {
        id.checked_sub(self.base_vocab_size)
            .and_then(|r| self.merges.get(r as usize))
    }

    /// Surface text of any id in the combined vocabulary.
    pub fn surface(&self, id: TokenId) -> Option<&str> {
        if id < self.base_vocab_size {
            self.base_vocab.get(id as usize).map(String::as_str)
        } else {
            self.merge_for(id).map(|m| m.surface.as_str())
        }
    }

    /// Number of base tokens behind `id` (1 for base ids).
    pub fn span_len(&self, id: TokenId) -> Option<usize> {
        if id < self.base_vocab_size {
            Some(1)
        } else {
            self.merge_for(id).map(MergeRule::span_len)
        }
    }

    pub fn vocab(&self) -> Result<BaseVocab> {
        BaseVocab::from_tokens(self.base_vocab.clone())
    }

    /// The first `k` merges as a table of their own.
    pub fn prefix(&self, k: usize) -> Result<MergeTable> {
        if k > self.merges.len() {
            return Err(Error::PrefixOutOfRange {
                prefix: k,
                available: self.merges.len(),
            });
        }
        Ok(MergeTable {
            base_vocab_size: self.base_vocab_size,
            budget: self.budget,
            base_vocab: self.base_vocab.clone(),
            merges: self.merges[..k].to_vec(),
        })
    }

    /// Checks every structural invariant of the table.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InconsistentTable(m));
        if self.base_vocab.len() > self.base_vocab_size as usize {
            return bad(format!(
                "{} base tokens exceed declared base size {}",
                self.base_vocab.len(),
                self.base_vocab_size
            ));
        }
        if self.merges.len() > self.budget as usize {
            return bad(format!("{} merges exceed budget {}", self.merges.len(), self.budget));
        }
        self.vocab()?;
        for (i, m) in self.merges.iter().enumerate() {
            let expected_id = self.base_vocab_size as u64 + i as u64;
            if m.rank as usize != i || m.new_id as u64 != expected_id {
                return bad(format!("merge {i} has rank {} and id {}", m.rank, m.new_id));
            }
            let (Some(l), Some(r)) = (self.surface(m.left), self.surface(m.right)) else {
                return bad(format!("merge {i} references unknown constituent"));
            };
            if m.left >= m.new_id || m.right >= m.new_id {
                return bad(format!("merge {i} references a later id"));
            }
            if m.parts.len() < 2 || m.surface != m.parts.concat() || m.surface.len() != l.len() + r.len() {
                return bad(format!("merge {i} surface/parts disagree"));
            }
            let lp = self.parts_of(m.left);
            let rp = self.parts_of(m.right);
            if lp.len() + rp.len() != m.parts.len()
                || lp.iter().chain(rp.iter()).zip(&m.parts).any(|(a, b)| *a != b)
            {
                return bad(format!("merge {i} parts are not the join of its constituents"));
            }
        }
        Ok(())
    }

    fn parts_of(&self, id: TokenId) -> Vec<&str> {
        match self.merge_for(id) {
            Some(m) => m.parts.iter().map(String::as_str).collect(),
            None => self.surface(id).into_iter().collect(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        format::write_versioned(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let table: MergeTable = format::read_versioned(path)?;
        table.validate()?;
        Ok(table)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainConfig {
    pub budget: u32,
    pub cap: u64,
    pub rules: RuleSet,
    /// Declared base vocabulary size; defaults to the observed distinct count.
    pub base_vocab_size: Option<u32>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            cap: DEFAULT_CAP,
            rules: RuleSet::all(),
            base_vocab_size: None,
        }
    }
}

/// Surfaces for every id assigned so far.
struct SurfaceBook<'a> {
    base: &'a BaseVocab,
    base_size: TokenId,
    supers: Vec<String>,
}

impl SurfaceBook<'_> {
    fn get(&self, id: TokenId) -> &str {
        if id < self.base_size {
            self.base.token(id).unwrap_or("")
        } else {
            &self.supers[(id - self.base_size) as usize]
        }
    }

    fn joined(&self, (l, r): Pair) -> String {
        let mut s = String::with_capacity(self.get(l).len() + self.get(r).len());
        s.push_str(self.get(l));
        s.push_str(self.get(r));
        s
    }
}

/// Learns up to `config.budget` merges.
///
/// Each round recounts capped pair frequencies over the current segmentation,
/// adopts the most frequent eligible pair (ties: smaller flattened surface,
/// then smaller `(left, right)`), and re-segments. Stops early when no
/// eligible pair reaches [`MIN_MERGE_FREQUENCY`].
pub fn train(traces: &[Trace], config: &TrainConfig) -> Result<MergeTable> {
    if config.cap == 0 {
        return Err(Error::InvalidInput("cap must be at least 1".into()));
    }
    let vocab = BaseVocab::from_traces(traces);
    let base_size = match config.base_vocab_size {
        Some(n) if (n as usize) < vocab.len() => {
            return Err(Error::BaseVocabTooSmall {
                declared: n as usize,
                observed: vocab.len(),
            })
        }
        Some(n) => n,
        None => vocab.len() as u32,
    };
    let mut seqs: Vec<Vec<TokenId>> = traces
        .iter()
        .map(|t| {
            let pieces: Vec<&str> = t.token_texts().collect();
            vocab.encode(&pieces)
        })
        .collect::<Result<_>>()?;

    let mut parts: FxHashMap<TokenId, Vec<String>> = FxHashMap::default();
    let mut book = SurfaceBook {
        base: &vocab,
        base_size,
        supers: Vec::new(),
    };
    let mut eligible_cache: FxHashMap<Pair, bool> = FxHashMap::default();
    let mut merges = Vec::new();

    for rank in 0..config.budget {
        let counts = count_pairs(&seqs, config.cap);
        let Some((pair, frequency)) = select_pair(&counts.counts, &book, &config.rules, &mut eligible_cache)
        else {
            break;
        };
        let new_id = base_size + rank;
        let surface = book.joined(pair);
        let mut merged_parts = parts_for(&parts, &book, pair.0);
        merged_parts.extend(parts_for(&parts, &book, pair.1));
        parts.insert(new_id, merged_parts.clone());
        book.supers.push(surface.clone());
        merges.push(MergeRule {
            rank,
            left: pair.0,
            right: pair.1,
            new_id,
            surface,
            parts: merged_parts,
            frequency,
        });
        seqs.par_iter_mut()
            .for_each(|s| merge_pair_in_place(s, None, pair, new_id));
    }

    let table = MergeTable {
        base_vocab_size: base_size,
        budget: config.budget,
        base_vocab: vocab.into_tokens(),
        merges,
    };
    debug_assert!(table.validate().is_ok());
    Ok(table)
}

fn parts_for(parts: &FxHashMap<TokenId, Vec<String>>, book: &SurfaceBook<'_>, id: TokenId) -> Vec<String> {
    parts
        .get(&id)
        .cloned()
        .unwrap_or_else(|| vec![book.get(id).to_owned()])
}

fn select_pair(
    counts: &FxHashMap<Pair, u64>,
    book: &SurfaceBook<'_>,
    rules: &RuleSet,
    cache: &mut FxHashMap<Pair, bool>,
) -> Option<(Pair, u64)> {
    let mut best_freq = 0u64;
    let mut tied: Vec<Pair> = Vec::new();
    for (&pair, &freq) in counts {
        if freq < MIN_MERGE_FREQUENCY || freq < best_freq {
            continue;
        }
        let ok = *cache
            .entry(pair)
            .or_insert_with(|| is_eligible(&book.joined(pair), rules).eligible);
        if !ok {
            continue;
        }
        if freq > best_freq {
            best_freq = freq;
            tied.clear();
        }
        tied.push(pair);
    }
    tied.into_iter()
        .map(|p| (book.joined(p), p))
        .min()
        .map(|(_, p)| (p, best_freq))
}

/// One point of a compression curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub merges: usize,
    /// `1 - supertokenized / base` token count, pooled over the corpus.
    pub reduction: f64,
}

/// Token reduction after applying each requested table prefix.
pub fn compression_curve(traces: &[Trace], table: &MergeTable, prefix_sizes: &[usize]) -> Result<Vec<CurvePoint>> {
    if let Some(&bad) = prefix_sizes.iter().find(|&&k| k > table.merges.len()) {
        return Err(Error::PrefixOutOfRange {
            prefix: bad,
            available: table.merges.len(),
        });
    }
    let vocab = table.vocab()?;
    let mut seqs: Vec<Vec<TokenId>> = traces
        .iter()
        .map(|t| {
            let pieces: Vec<&str> = t.token_texts().collect();
            vocab.encode(&pieces)
        })
        .collect::<Result<_>>()?;
    let base_total: usize = seqs.iter().map(Vec::len).sum();

    let mut wanted: Vec<usize> = prefix_sizes.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    let mut at: BTreeMap<usize, f64> = BTreeMap::new();
    let mut applied = 0usize;
    for k in wanted {
        for m in &table.merges[applied..k] {
            seqs.par_iter_mut()
                .for_each(|s| merge_pair_in_place(s, None, m.pair(), m.new_id));
        }
        applied = k;
        let total: usize = seqs.iter().map(Vec::len).sum();
        let reduction = if base_total == 0 {
            0.0
        } else {
            1.0 - total as f64 / base_total as f64
        };
        at.insert(k, reduction);
    }
    Ok(prefix_sizes
        .iter()
        .map(|&k| CurvePoint {
            merges: k,
            reduction: at[&k],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::UNCAPPED;

    fn repeated(pieces: &[&str], n: usize) -> Vec<Trace> {
        (0..n).map(|i| Trace::from_pieces(format!("t{i}"), pieces)).collect()
    }

    #[test]
    fn zero_budget_is_empty() {
        let traces = repeated(&["Let", "'s"], 5);
        let cfg = TrainConfig {
            budget: 0,
            ..TrainConfig::default()
        };
        let table = train(&traces, &cfg).unwrap();
        assert!(table.is_empty());
        assert_eq!(table.vocab_size(), table.base_vocab_size as usize);
    }

    #[test]
    fn lets_check_chain() {
        let traces = repeated(&["Let", "'s", " check"], 20);
        let table = train(&traces, &TrainConfig::default()).unwrap();
        assert_eq!(table.len(), 2);
        let first = &table.merges[0];
        assert_eq!(first.surface, "Let's");
        assert_eq!(first.frequency, 20);
        let second = &table.merges[1];
        assert_eq!(second.left, first.new_id);
        assert_eq!(table.surface(second.right), Some(" check"));
        assert_eq!(second.parts, ["Let", "'s", " check"]);
    }

    #[test]
    fn ineligible_corpus_adopts_nothing() {
        let traces = repeated(&[" is", " the", " is", " the"], 30);
        let table = train(&traces, &TrainConfig::default()).unwrap();
        assert!(table.is_empty());
    }

    #[test]
    fn singletons_are_not_adopted() {
        let traces = vec![Trace::from_pieces("a", &["A", "b"])];
        let table = train(&traces, &TrainConfig::default()).unwrap();
        assert!(table.is_empty());
    }

    #[test]
    fn tie_prefers_smaller_surface() {
        let traces = vec![
            Trace::from_pieces("a", &["Z", "z", "B", "b"]),
            Trace::from_pieces("b", &["Z", "z", "B", "b"]),
        ];
        let cfg = TrainConfig {
            budget: 1,
            ..TrainConfig::default()
        };
        let table = train(&traces, &cfg).unwrap();
        // "Bb", "Zz" and "zB" all have frequency 2
        assert_eq!(table.merges[0].surface, "Bb");
    }

    #[test]
    fn declared_base_size_offsets_super_ids() {
        let traces = repeated(&["Let", "'s"], 3);
        let cfg = TrainConfig {
            base_vocab_size: Some(151_669),
            ..TrainConfig::default()
        };
        let table = train(&traces, &cfg).unwrap();
        assert_eq!(table.merges[0].new_id, 151_669);
        assert_eq!(table.vocab_size(), 151_670);
        let too_small = TrainConfig {
            base_vocab_size: Some(1),
            ..TrainConfig::default()
        };
        assert!(matches!(train(&traces, &too_small), Err(Error::BaseVocabTooSmall { .. })));
    }

    #[test]
    fn curve_examples() {
        let traces = vec![Trace::from_pieces("t", &["a", "b", "a", "b"])];
        let cfg = TrainConfig {
            budget: 1,
            cap: UNCAPPED,
            rules: RuleSet::disabled(),
            base_vocab_size: None,
        };
        let table = train(&traces, &cfg).unwrap();
        assert_eq!(table.merges[0].surface, "ab");
        let curve = compression_curve(&traces, &table, &[0, 1]).unwrap();
        assert_eq!(curve[0].reduction, 0.0);
        assert_eq!(curve[1].reduction, 0.5);
        assert!(matches!(
            compression_curve(&traces, &table, &[2]),
            Err(Error::PrefixOutOfRange { prefix: 2, available: 1 })
        ));
    }

    #[test]
    fn table_json_roundtrip_and_validation() {
        let traces = repeated(&["Let", "'s", " check"], 4);
        let table = train(&traces, &TrainConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        table.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"format_version\": 1"));
        assert_eq!(MergeTable::read(&path).unwrap(), table);

        let mut broken = table.clone();
        broken.merges[1].parts[0] = "X".into();
        assert!(broken.validate().is_err());
        let mut broken = table;
        broken.merges[0].new_id += 5;
        assert!(broken.validate().is_err());
    }
}
