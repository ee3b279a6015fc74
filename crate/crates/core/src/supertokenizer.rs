//! Lossless post-processing of base-token sequences with a merge table.

use std::path::Path;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{Pair, TokenId, Trace};
use crate::error::{Error, Result};
use crate::format;
use crate::scalar::Scalar;
use crate::trainer::MergeTable;
use crate::vocab::BaseVocab;

/// Output tokens of one trace with the base-token range each one covers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub trace_id: String,
    pub token_ids: Vec<TokenId>,
    /// Half-open base-token index ranges, one per output token.
    pub spans: Vec<(usize, usize)>,
}

impl Segmentation {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn base_len(&self) -> usize {
        self.spans.last().map_or(0, |s| s.1)
    }

    /// Spans are contiguous from zero and each covers at least one base token.
    pub fn check_spans(&self) -> Result<()> {
        if self.spans.len() != self.token_ids.len() {
            return Err(Error::Invariant(format!(
                "segmentation {:?} has {} ids but {} spans",
                self.trace_id,
                self.token_ids.len(),
                self.spans.len()
            )));
        }
        let mut cursor = 0;
        for &(s, e) in &self.spans {
            if s != cursor || e <= s {
                return Err(Error::Invariant(format!(
                    "segmentation {:?} spans are not contiguous",
                    self.trace_id
                )));
            }
            cursor = e;
        }
        Ok(())
    }
}

/// Replaces non-overlapping left-to-right occurrences of `pair` with `new_id`,
/// merging the matching spans when given.
pub(crate) fn merge_pair_in_place(
    ids: &mut Vec<TokenId>,
    mut spans: Option<&mut Vec<(usize, usize)>>,
    pair: Pair,
    new_id: TokenId,
) {
    let n = ids.len();
    if n < 2 {
        return;
    }
    let mut read = 0;
    let mut write = 0;
    while read < n {
        if read + 1 < n && ids[read] == pair.0 && ids[read + 1] == pair.1 {
            ids[write] = new_id;
            if let Some(sp) = spans.as_deref_mut() {
                sp[write] = (sp[read].0, sp[read + 1].1);
            }
            read += 2;
        } else {
            ids[write] = ids[read];
            if let Some(sp) = spans.as_deref_mut() {
                sp[write] = sp[read];
            }
            read += 1;
        }
        write += 1;
    }
    ids.truncate(write);
    if let Some(sp) = spans {
        sp.truncate(write);
    }
}

/// A merge table prepared for repeated application.
#[derive(Debug, Clone)]
pub struct Supertokenizer<'a> {
    table: &'a MergeTable,
    vocab: BaseVocab,
    ranks: FxHashMap<Pair, u32>,
}

impl<'a> Supertokenizer<'a> {
    pub fn new(table: &'a MergeTable) -> Result<Self> {
        let vocab = table.vocab()?;
        let ranks = table.merges.iter().map(|m| (m.pair(), m.rank)).collect();
        Ok(Self { table, vocab, ranks })
    }

    pub fn table(&self) -> &MergeTable {
        self.table
    }

    /// Applies merges in rank order, each exhaustively left to right.
    ///
    /// A pair containing the token minted by rank `r` can only have a rank
    /// above `r`, so repeatedly firing the lowest-ranked pair present gives
    /// the same result as sweeping every rank in turn while skipping the
    /// ranks that never occur.
    pub fn apply<S: AsRef<str>>(&self, pieces: &[S]) -> Result<Segmentation> {
        let mut ids = self.vocab.encode(pieces)?;
        let mut spans: Vec<(usize, usize)> = (0..ids.len()).map(|i| (i, i + 1)).collect();
        loop {
            let best = ids
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0], w[1])).copied())
                .min();
            let Some(rank) = best else { break };
            let m = &self.table.merges[rank as usize];
            merge_pair_in_place(&mut ids, Some(&mut spans), m.pair(), m.new_id);
        }
        Ok(Segmentation {
            trace_id: String::new(),
            token_ids: ids,
            spans,
        })
    }

    pub fn apply_trace(&self, trace: &Trace) -> Result<Segmentation> {
        let pieces: Vec<&str> = trace.token_texts().collect();
        let mut seg = self.apply(&pieces)?;
        seg.trace_id = trace.id.clone();
        Ok(seg)
    }

    /// Segments a whole corpus, one trace per task.
    pub fn apply_corpus(&self, traces: &[Trace]) -> Result<Vec<Segmentation>> {
        traces.par_iter().map(|t| self.apply_trace(t)).collect()
    }
}

pub fn apply<S: AsRef<str>>(pieces: &[S], table: &MergeTable) -> Result<Segmentation> {
    Supertokenizer::new(table)?.apply(pieces)
}

/// Reconstructs the surface text of a segmentation.
pub fn decode(seg: &Segmentation, table: &MergeTable) -> Result<String> {
    let mut out = String::new();
    for &id in &seg.token_ids {
        let s = table
            .surface(id)
            .ok_or_else(|| Error::InconsistentTable(format!("token id {id} is not in the table")))?;
        out.push_str(s);
    }
    Ok(out)
}

/// Fraction of output tokens drawn from the supertoken range.
pub fn adoption_rate<T: Scalar>(seg: &Segmentation, table: &MergeTable) -> T {
    if seg.is_empty() {
        return T::zero();
    }
    let supers = seg.token_ids.iter().filter(|&&id| table.is_super(id)).count();
    T::from_count(supers) / T::from_count(seg.len())
}

pub fn write_segmentations(path: &Path, segs: &[Segmentation]) -> Result<()> {
    format::write_jsonl(path, segs)
}

pub fn read_segmentations(path: &Path) -> Result<Vec<Segmentation>> {
    let segs: Vec<Segmentation> = format::read_jsonl(path)?;
    for s in &segs {
        s.check_spans().map_err(|_| Error::InvalidInput(format!("bad spans in {:?}", s.trace_id)))?;
    }
    Ok(segs)
}
