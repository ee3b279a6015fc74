//! Category event streams, transition matrices by correctness, cell ratios
//! and composite quality metrics.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format;
use crate::scalar::{CompensatedSum, Scalar};
use crate::supertokenizer::Segmentation;
use crate::taxonomy::{Category, CategoryMap};

const K: usize = 9;

pub type Counts = [[u64; K]; K];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    All,
    Correct,
    Incorrect,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::All, Group::Correct, Group::Incorrect];

    pub fn admits(self, correct: Option<bool>) -> bool {
        match self {
            Group::All => true,
            Group::Correct => correct == Some(true),
            Group::Incorrect => correct == Some(false),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EventFilter {
    /// Every classified supertoken is an event.
    #[default]
    All,
    /// Drop Reasoning and Computation events.
    SignpostsOnly,
}

impl EventFilter {
    fn keeps(self, c: Category) -> bool {
        self == EventFilter::All || c.is_signpost()
    }
}

/// Categories of the supertoken occurrences in `seg`, in trace order.
/// Base tokens and unclassified supertokens produce no event.
pub fn event_sequence(seg: &Segmentation, cmap: &CategoryMap, filter: EventFilter) -> Result<Vec<Category>> {
    let mut out = Vec::new();
    for &id in &seg.token_ids {
        if let Some(c) = cmap.lookup(id)? {
            if filter.keeps(c) {
                out.push(c);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSequence {
    pub trace_id: String,
    pub events: Vec<Category>,
    pub correct: Option<bool>,
}

/// Correctness label per trace id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Labels {
    pub labels: BTreeMap<String, bool>,
}

impl Labels {
    pub fn get(&self, trace_id: &str) -> Option<bool> {
        self.labels.get(trace_id).copied()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        format::write_versioned(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        format::read_versioned(path)
    }
}

pub fn labeled_sequences(
    segs: &[Segmentation],
    cmap: &CategoryMap,
    labels: &Labels,
    filter: EventFilter,
) -> Result<Vec<LabeledSequence>> {
    segs.par_iter()
        .map(|s| {
            Ok(LabeledSequence {
                trace_id: s.trace_id.clone(),
                events: event_sequence(s, cmap, filter)?,
                correct: labels.get(&s.trace_id),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Pooling {
    /// Sum bigram counts across traces, then normalize rows.
    #[default]
    Pooled,
    /// Normalize each trace's rows, then average over traces with a nonzero row.
    PerTraceMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TransitionMatrix<T> {
    pub group: Group,
    pub pooling: Pooling,
    /// Indexed by [`Category::index`]: `counts[from][to]`.
    pub counts: Counts,
    pub probs: Vec<Vec<T>>,
    pub n_events: u64,
    pub n_traces: usize,
    /// Source categories with no outgoing transition.
    pub empty_rows: Vec<Category>,
}

impl<T: Scalar> TransitionMatrix<T> {
    pub fn prob(&self, from: Category, to: Category) -> T {
        self.probs[from.index()][to.index()]
    }

    pub fn count(&self, from: Category, to: Category) -> u64 {
        self.counts[from.index()][to.index()]
    }

    pub fn row_total(&self, from: Category) -> u64 {
        self.counts[from.index()].iter().sum()
    }

    /// Row-normalizes `counts` directly.
    pub fn from_counts(group: Group, counts: Counts, n_traces: usize) -> Self {
        let mut probs = vec![vec![T::zero(); K]; K];
        let mut empty_rows = Vec::new();
        for (i, row) in counts.iter().enumerate() {
            let total: u64 = row.iter().sum();
            if total == 0 {
                empty_rows.push(Category::ALL[i]);
                continue;
            }
            for (j, &c) in row.iter().enumerate() {
                probs[i][j] = T::from_count(c as usize) / T::from_count(total as usize);
            }
        }
        Self {
            group,
            pooling: Pooling::Pooled,
            n_events: counts.iter().flatten().sum(),
            counts,
            probs,
            n_traces,
            empty_rows,
        }
    }
}

pub fn bigram_counts(events: &[Category]) -> Counts {
    let mut c = [[0u64; K]; K];
    for w in events.windows(2) {
        c[w[0].index()][w[1].index()] += 1;
    }
    c
}

fn add_counts(mut a: Counts, b: &Counts) -> Counts {
    for i in 0..K {
        for j in 0..K {
            a[i][j] += b[i][j];
        }
    }
    a
}

/// Transition matrix of the sequences admitted by `group`.
pub fn transition_matrix<T: Scalar>(
    sequences: &[LabeledSequence],
    group: Group,
    pooling: Pooling,
) -> Result<TransitionMatrix<T>> {
    let members: Vec<&LabeledSequence> = sequences
        .iter()
        .filter(|s| group.admits(s.correct) && s.events.len() >= 2)
        .collect();
    if members.is_empty() {
        return Err(Error::EmptyGroup(group));
    }
    let per_trace: Vec<Counts> = members.par_iter().map(|s| bigram_counts(&s.events)).collect();
    let pooled = per_trace.iter().fold([[0u64; K]; K], add_counts);
    let mut m = TransitionMatrix::<T>::from_counts(group, pooled, members.len());
    if pooling == Pooling::PerTraceMean {
        m.pooling = Pooling::PerTraceMean;
        for i in 0..K {
            let mut sums = [CompensatedSum::<T>::new(); K];
            let mut n = 0usize;
            for c in &per_trace {
                let total: u64 = c[i].iter().sum();
                if total == 0 {
                    continue;
                }
                n += 1;
                for (sum, &cij) in sums.iter_mut().zip(&c[i]) {
                    sum.add(T::from_count(cij as usize) / T::from_count(total as usize));
                }
            }
            if n > 0 {
                for (p, sum) in m.probs[i].iter_mut().zip(&sums) {
                    *p = sum.total() / T::from_count(n);
                }
            }
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Over-represented in incorrect traces.
    Problematic,
    /// Over-represented in correct traces.
    Productive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RatioCell<T> {
    pub from: Category,
    pub to: Category,
    pub ratio: T,
    pub direction: Direction,
}

/// Per-cell over-representation, always reported as a ratio ≥ 1. Cells where
/// either probability is zero are omitted; equal cells count as problematic.
pub fn ratio_table<T: Scalar>(correct: &TransitionMatrix<T>, incorrect: &TransitionMatrix<T>) -> Vec<RatioCell<T>> {
    let mut out = Vec::new();
    for &from in &Category::ALL {
        for &to in &Category::ALL {
            let c = correct.prob(from, to);
            let i = incorrect.prob(from, to);
            if !(c > T::zero() && i > T::zero()) {
                continue;
            }
            let (ratio, direction) = if i >= c {
                (i / c, Direction::Problematic)
            } else {
                (c / i, Direction::Productive)
            };
            out.push(RatioCell {
                from,
                to,
                ratio,
                direction,
            });
        }
    }
    out
}

pub fn find_cell<T: Scalar>(cells: &[RatioCell<T>], from: Category, to: Category) -> Option<&RatioCell<T>> {
    cells.iter().find(|c| c.from == from && c.to == to)
}

use Category::*;

/// Bigrams over-represented in incorrect traces, with reference ratios.
pub const PROBLEMATIC_BIGRAMS: [(Category, Category, f64); 5] = [
    (Sequencing, Sequencing, 3.7),
    (ProblemRef, Hedging, 2.1),
    (Counterargument, ProblemRef, 2.0),
    (Hedging, Hedging, 1.4),
    (Counterargument, Counterargument, 1.3),
];

/// Bigrams over-represented in correct traces, with reference ratios.
pub const PRODUCTIVE_BIGRAMS: [(Category, Category, f64); 4] = [
    (ProblemRef, StrategyShift, 3.0),
    (Verification, StrategyShift, 2.1),
    (Reasoning, Verification, 1.6),
    (Backtracking, StrategyShift, 1.5),
];

pub const RECOVERY_SOURCES: [Category; 4] = [Backtracking, Counterargument, ProblemRef, Hedging];
pub const RECOVERY_TARGETS: [Category; 2] = [StrategyShift, Verification];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CompositeMetrics<T> {
    /// Absent when no transition leaves a recovery source.
    pub productive_recovery_rate: Option<T>,
    pub confusion_cycle_rate: Option<T>,
    pub verification_inflow_rate: Option<T>,
}

fn ratio_of<T: Scalar>(num: u64, den: u64) -> Option<T> {
    (den > 0).then(|| T::from_count(num as usize) / T::from_count(den as usize))
}

/// Computed from the pooled counts of `m`.
pub fn composite_metrics<T: Scalar>(m: &TransitionMatrix<T>) -> CompositeMetrics<T> {
    let from_sources: u64 = RECOVERY_SOURCES.iter().map(|&s| m.row_total(s)).sum();
    let recovered: u64 = RECOVERY_SOURCES
        .iter()
        .flat_map(|&s| RECOVERY_TARGETS.iter().map(move |&t| (s, t)))
        .map(|(s, t)| m.count(s, t))
        .sum();
    let confusion: u64 = PROBLEMATIC_BIGRAMS.iter().map(|&(a, b, _)| m.count(a, b)).sum();
    let inflow: u64 = Category::ALL.iter().map(|&s| m.count(s, Verification)).sum();
    CompositeMetrics {
        productive_recovery_rate: ratio_of(recovered, from_sources),
        confusion_cycle_rate: ratio_of(confusion, m.n_events),
        verification_inflow_rate: ratio_of(inflow, m.n_events),
    }
}

/// Category shares weighted by merge-table entries and by occurrences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CategoryShares<T> {
    pub by_merge: BTreeMap<Category, T>,
    pub by_occurrence: BTreeMap<Category, T>,
    pub n_merges: usize,
    pub n_occurrences: u64,
}

pub fn category_shares<T: Scalar>(cmap: &CategoryMap, segs: &[Segmentation]) -> Result<CategoryShares<T>> {
    let merge_counts = cmap.counts();
    let n_merges = cmap.len();
    let per_trace: Vec<[u64; K]> = segs
        .par_iter()
        .map(|s| {
            let mut c = [0u64; K];
            for &id in &s.token_ids {
                if let Some(cat) = cmap.lookup(id)? {
                    c[cat.index()] += 1;
                }
            }
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let mut occ = [0u64; K];
    for c in &per_trace {
        for i in 0..K {
            occ[i] += c[i];
        }
    }
    let n_occurrences: u64 = occ.iter().sum();
    let share = |num: u64, den: u64| ratio_of::<T>(num, den).unwrap_or_else(T::zero);
    Ok(CategoryShares {
        by_merge: merge_counts
            .iter()
            .map(|(c, n)| (*c, share(*n as u64, n_merges as u64)))
            .collect(),
        by_occurrence: Category::ALL
            .iter()
            .map(|c| (*c, share(occ[c.index()], n_occurrences)))
            .collect(),
        n_merges,
        n_occurrences,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GroupReport<T> {
    pub matrix: TransitionMatrix<T>,
    pub metrics: CompositeMetrics<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TransitionReport<T> {
    pub pooling: Pooling,
    pub event_filter: EventFilter,
    /// Groups without a sequence of two or more events are absent.
    pub groups: BTreeMap<Group, GroupReport<T>>,
    /// Present when both correct and incorrect groups exist.
    pub ratio_cells: Vec<RatioCell<T>>,
}

pub fn transition_report<T: Scalar>(
    sequences: &[LabeledSequence],
    pooling: Pooling,
    event_filter: EventFilter,
) -> Result<TransitionReport<T>> {
    let mut groups = BTreeMap::new();
    for g in Group::ALL {
        match transition_matrix::<T>(sequences, g, pooling) {
            Ok(matrix) => {
                let metrics = composite_metrics(&matrix);
                groups.insert(g, GroupReport { matrix, metrics });
            }
            Err(Error::EmptyGroup(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let ratio_cells = match (groups.get(&Group::Correct), groups.get(&Group::Incorrect)) {
        (Some(c), Some(i)) => ratio_table(&c.matrix, &i.matrix),
        _ => Vec::new(),
    };
    Ok(TransitionReport {
        pooling,
        event_filter,
        groups,
        ratio_cells,
    })
}
