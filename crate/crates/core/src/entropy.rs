//! Token roles inside merge spans, per-role entropy statistics, the
//! compression ceiling, and cross-scorer entropy gaps.
//!
//! Entropies are inputs (bits per base token); nothing here runs a model.
//! Corpus-level reductions sum per-trace partials in corpus order with a
//! compensated accumulator, so results do not depend on thread count.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Trace;
use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Scalar};
use crate::supertokenizer::Segmentation;

/// Extended vocabulary size used for the default `log2 |V|`.
pub const DEFAULT_VOCAB_SIZE: u32 = 151_919;

pub fn default_log2_vocab<T: Scalar>() -> T {
    T::from_count(DEFAULT_VOCAB_SIZE as usize).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    NonMerged,
    First,
    Continuation,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::NonMerged, Role::First, Role::Continuation];

    pub fn is_merged(self) -> bool {
        self != Role::NonMerged
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleAnnotation {
    pub role: Role,
    /// Base-token length of the owning span; 1 for non-merged tokens.
    pub merge_len: usize,
}

/// One annotation per base token covered by `seg`.
pub fn assign_roles(seg: &Segmentation) -> Vec<RoleAnnotation> {
    let mut out = Vec::with_capacity(seg.base_len());
    for &(s, e) in &seg.spans {
        let len = e - s;
        if len == 1 {
            out.push(RoleAnnotation {
                role: Role::NonMerged,
                merge_len: 1,
            });
        } else {
            out.push(RoleAnnotation {
                role: Role::First,
                merge_len: len,
            });
            out.extend(std::iter::repeat_n(
                RoleAnnotation {
                    role: Role::Continuation,
                    merge_len: len,
                },
                len - 1,
            ));
        }
    }
    out
}

/// Merged-position fraction over any number of annotated traces.
pub fn merged_fraction<T: Scalar>(roles: &[Vec<RoleAnnotation>]) -> T {
    let n: usize = roles.iter().map(Vec::len).sum();
    if n == 0 {
        return T::zero();
    }
    let merged: usize = roles
        .iter()
        .flatten()
        .filter(|r| r.role.is_merged())
        .count();
    T::from_count(merged) / T::from_count(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoleSummary<T> {
    pub count: usize,
    /// Share of all annotated positions.
    pub fraction: T,
    /// Absent when the role has no positions.
    pub mean_bits: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RoleStats<T> {
    pub n_traces: usize,
    pub n_tokens: usize,
    pub roles: BTreeMap<Role, RoleSummary<T>>,
    /// First and continuation positions pooled.
    pub merged: RoleSummary<T>,
}

impl<T: Scalar> RoleStats<T> {
    pub fn role(&self, role: Role) -> &RoleSummary<T> {
        &self.roles[&role]
    }

    /// ρ: share of positions inside merge spans.
    pub fn rho(&self) -> T {
        self.merged.fraction
    }

    pub fn means(&self) -> RoleMeans<T> {
        RoleMeans(
            self.roles
                .iter()
                .filter_map(|(r, s)| s.mean_bits.map(|m| (*r, m)))
                .collect(),
        )
    }
}

#[derive(Default)]
struct Partial<T> {
    sums: [CompensatedSum<T>; 3],
    counts: [usize; 3],
}

fn role_index(role: Role) -> usize {
    match role {
        Role::NonMerged => 0,
        Role::First => 1,
        Role::Continuation => 2,
    }
}

fn entropies<'a>(trace: &'a Trace, roles: &[RoleAnnotation]) -> Result<&'a [f64]> {
    let h = trace
        .entropy
        .as_deref()
        .ok_or_else(|| Error::MissingEntropy(trace.id.clone()))?;
    if h.len() != roles.len() {
        return Err(Error::EntropyLengthMismatch(trace.id.clone()));
    }
    Ok(h)
}

fn check_aligned(traces: &[Trace], roles: &[Vec<RoleAnnotation>]) -> Result<()> {
    if traces.len() != roles.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} role lists", traces.len()),
            found: format!("{} role lists", roles.len()),
        });
    }
    Ok(())
}

/// Mean entropy and position share per role.
pub fn role_stats<T: Scalar>(traces: &[Trace], roles: &[Vec<RoleAnnotation>]) -> Result<RoleStats<T>> {
    check_aligned(traces, roles)?;
    let partials: Vec<Partial<T>> = traces
        .par_iter()
        .zip(roles.par_iter())
        .map(|(trace, ann)| {
            let h = entropies(trace, ann)?;
            let mut p = Partial::<T> {
                sums: [CompensatedSum::new(); 3],
                counts: [0; 3],
            };
            for (a, &v) in ann.iter().zip(h) {
                let i = role_index(a.role);
                p.sums[i].add(T::lit(v));
                p.counts[i] += 1;
            }
            Ok(p)
        })
        .collect::<Result<_>>()?;

    let mut sums = [CompensatedSum::<T>::new(); 3];
    let mut counts = [0usize; 3];
    for p in &partials {
        for i in 0..3 {
            sums[i].merge(&p.sums[i]);
            counts[i] += p.counts[i];
        }
    }
    let n: usize = counts.iter().sum();
    let frac = |c: usize| {
        if n == 0 {
            T::zero()
        } else {
            T::from_count(c) / T::from_count(n)
        }
    };
    let mean = |s: &CompensatedSum<T>, c: usize| (c > 0).then(|| s.total() / T::from_count(c));
    let roles_out = Role::ALL
        .iter()
        .map(|&r| {
            let i = role_index(r);
            (
                r,
                RoleSummary {
                    count: counts[i],
                    fraction: frac(counts[i]),
                    mean_bits: mean(&sums[i], counts[i]),
                },
            )
        })
        .collect();
    let mut merged_sum = sums[1];
    merged_sum.merge(&sums[2]);
    let merged_count = counts[1] + counts[2];
    Ok(RoleStats {
        n_traces: traces.len(),
        n_tokens: n,
        roles: roles_out,
        merged: RoleSummary {
            count: merged_count,
            fraction: frac(merged_count),
            mean_bits: mean(&merged_sum, merged_count),
        },
    })
}

/// Merge-length bucket: exact lengths 2 through 15, then 16 and longer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LengthBin(u8);

impl LengthBin {
    pub const LONGEST_EXACT: usize = 15;

    pub fn of(merge_len: usize) -> Option<Self> {
        match merge_len {
            0 | 1 => None,
            n if n <= Self::LONGEST_EXACT => Some(Self(n as u8)),
            _ => Some(Self(16)),
        }
    }

    pub fn all() -> impl Iterator<Item = LengthBin> {
        (2u8..=16).map(LengthBin)
    }

    pub fn is_open_ended(self) -> bool {
        self.0 == 16
    }

    pub fn min_len(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for LengthBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_open_ended() {
            write!(f, "16+")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for LengthBin {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LengthBin {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let n = if s == "16+" {
            16
        } else {
            s.parse::<usize>().map_err(serde::de::Error::custom)?
        };
        LengthBin::of(n)
            .filter(|b| b.0 as usize == n)
            .ok_or_else(|| serde::de::Error::custom(format!("bad length bin {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BinStat<T> {
    pub bin: LengthBin,
    pub continuation_count: usize,
    pub mean_continuation_bits: T,
    /// `1 - mean_continuation / mean_non_merged`; absent without a non-merged mean.
    pub reduction: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LengthBinReport<T> {
    pub non_merged_mean_bits: Option<T>,
    /// Only bins with at least one continuation token.
    pub bins: Vec<BinStat<T>>,
}

/// Continuation entropy grouped by owning merge length.
pub fn length_binned_stats<T: Scalar>(
    traces: &[Trace],
    roles: &[Vec<RoleAnnotation>],
) -> Result<LengthBinReport<T>> {
    check_aligned(traces, roles)?;
    type Bins<T> = BTreeMap<LengthBin, (CompensatedSum<T>, usize)>;
    let partials: Vec<(CompensatedSum<T>, usize, Bins<T>)> = traces
        .par_iter()
        .zip(roles.par_iter())
        .map(|(trace, ann)| {
            let h = entropies(trace, ann)?;
            let mut nm = CompensatedSum::new();
            let mut nm_count = 0;
            let mut bins: Bins<T> = BTreeMap::new();
            for (a, &v) in ann.iter().zip(h) {
                match a.role {
                    Role::NonMerged => {
                        nm.add(T::lit(v));
                        nm_count += 1;
                    }
                    Role::Continuation => {
                        if let Some(bin) = LengthBin::of(a.merge_len) {
                            let e = bins.entry(bin).or_insert((CompensatedSum::new(), 0));
                            e.0.add(T::lit(v));
                            e.1 += 1;
                        }
                    }
                    Role::First => {}
                }
            }
            Ok((nm, nm_count, bins))
        })
        .collect::<Result<_>>()?;

    let mut nm = CompensatedSum::<T>::new();
    let mut nm_count = 0;
    let mut bins: Bins<T> = BTreeMap::new();
    for (s, c, b) in &partials {
        nm.merge(s);
        nm_count += c;
        for (bin, (bs, bc)) in b {
            let e = bins.entry(*bin).or_insert((CompensatedSum::new(), 0));
            e.0.merge(bs);
            e.1 += bc;
        }
    }
    let nm_mean = (nm_count > 0).then(|| nm.total() / T::from_count(nm_count));
    let bins = bins
        .into_iter()
        .map(|(bin, (s, c))| {
            let mean = s.total() / T::from_count(c);
            BinStat {
                bin,
                continuation_count: c,
                mean_continuation_bits: mean,
                reduction: nm_mean.filter(|m| *m > T::zero()).map(|m| T::one() - mean / m),
            }
        })
        .collect();
    Ok(LengthBinReport {
        non_merged_mean_bits: nm_mean,
        bins,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoleCeiling<T> {
    pub continuation: T,
    pub first: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CeilingReport<T> {
    pub rho: T,
    /// Mean entropy over the merged positions the ceiling is computed from.
    pub mean_entropy_bits: T,
    pub log2_vocab: T,
    pub delta: T,
    /// Absent when `rho` is zero.
    pub delta_over_rho: Option<T>,
    pub delta_by_role: Option<RoleCeiling<T>>,
}

/// `Δ = ρ (1 - h / log2|V|)`.
pub fn compression_ceiling<T: Scalar>(rho: T, h_merged: T, log2_vocab: T) -> Result<CeilingReport<T>> {
    if log2_vocab.is_nan() || log2_vocab <= T::zero() {
        return Err(Error::NonPositiveVocab);
    }
    if !(rho >= T::zero() && rho <= T::one()) {
        return Err(Error::InvalidInput(format!("rho {rho} outside [0, 1]")));
    }
    if !(h_merged >= T::zero() && h_merged <= log2_vocab) {
        return Err(Error::InvalidInput(format!(
            "mean entropy {h_merged} outside [0, log2|V| = {log2_vocab}]"
        )));
    }
    let delta = rho * (T::one() - h_merged / log2_vocab);
    Ok(CeilingReport {
        rho,
        mean_entropy_bits: h_merged,
        log2_vocab,
        delta,
        delta_over_rho: (rho > T::zero()).then(|| delta / rho),
        delta_by_role: None,
    })
}

/// Ceiling from measured role statistics, with its split into continuation and
/// merge-head contributions. The two parts sum to the headline Δ because the
/// merged mean is the position-weighted mean of the two roles.
pub fn ceiling_from_stats<T: Scalar>(stats: &RoleStats<T>, log2_vocab: T) -> Result<CeilingReport<T>> {
    let h = stats.merged.mean_bits.unwrap_or_else(T::zero);
    let mut report = compression_ceiling(stats.rho(), h, log2_vocab)?;
    let part = |role: Role| -> Result<T> {
        let s = stats.role(role);
        match s.mean_bits {
            Some(m) => Ok(compression_ceiling(s.fraction, m, log2_vocab)?.delta),
            None => Ok(T::zero()),
        }
    };
    report.delta_by_role = Some(RoleCeiling {
        continuation: part(Role::Continuation)?,
        first: part(Role::First)?,
    });
    Ok(report)
}

/// Per-role mean entropies from one scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RoleMeans<T>(pub BTreeMap<Role, T>);

impl<T: Scalar> RoleMeans<T> {
    pub fn new(non_merged: T, first: T, continuation: T) -> Self {
        Self(BTreeMap::from([
            (Role::NonMerged, non_merged),
            (Role::First, first),
            (Role::Continuation, continuation),
        ]))
    }

    pub fn get(&self, role: Role) -> Option<T> {
        self.0.get(&role).copied()
    }

    /// Non-merged minus continuation mean.
    pub fn structural_gap(&self) -> Option<T> {
        Some(self.get(Role::NonMerged)? - self.get(Role::Continuation)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GapTable<T> {
    /// Cross-scored minus self-scored mean, per role.
    pub deltas: BTreeMap<Role, T>,
    pub gap_self: T,
    pub gap_cross: T,
}

pub fn cross_model_gap<T: Scalar>(self_scored: &RoleMeans<T>, cross_scored: &RoleMeans<T>) -> Result<GapTable<T>> {
    let complete = |m: &RoleMeans<T>| m.0.len() == Role::ALL.len() && Role::ALL.iter().all(|r| m.0.contains_key(r));
    if !complete(self_scored) || !complete(cross_scored) {
        return Err(Error::RoleMismatch);
    }
    let deltas = Role::ALL
        .iter()
        .map(|&r| (r, cross_scored.0[&r] - self_scored.0[&r]))
        .collect();
    Ok(GapTable {
        deltas,
        gap_self: self_scored.structural_gap().ok_or(Error::RoleMismatch)?,
        gap_cross: cross_scored.structural_gap().ok_or(Error::RoleMismatch)?,
    })
}

/// Everything the entropy step reports for one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EntropyReport<T> {
    pub stats: RoleStats<T>,
    pub length_bins: LengthBinReport<T>,
    pub ceiling: CeilingReport<T>,
}

/// Role statistics, length bins and ceiling for traces aligned with `segs`.
pub fn entropy_report<T: Scalar>(traces: &[Trace], segs: &[Segmentation], log2_vocab: T) -> Result<EntropyReport<T>> {
    if traces.len() != segs.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} segmentations", traces.len()),
            found: format!("{} segmentations", segs.len()),
        });
    }
    let roles: Vec<Vec<RoleAnnotation>> = segs.par_iter().map(assign_roles).collect();
    let stats = role_stats(traces, &roles)?;
    let length_bins = length_binned_stats(traces, &roles)?;
    let ceiling = ceiling_from_stats(&stats, log2_vocab)?;
    Ok(EntropyReport {
        stats,
        length_bins,
        ceiling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg_with_spans(spans: &[(usize, usize)]) -> Segmentation {
        Segmentation {
            trace_id: "t".into(),
            token_ids: vec![0; spans.len()],
            spans: spans.to_vec(),
        }
    }

    fn trace_with_entropy(n: usize, h: Vec<f64>) -> Trace {
        let pieces: Vec<String> = (0..n).map(|i| format!("w{i} ")).collect();
        Trace::from_pieces("t", &pieces).with_entropy(h)
    }

    #[test]
    fn no_merges_all_non_merged() {
        let seg = seg_with_spans(&[(0, 1), (1, 2), (2, 3)]);
        let roles = assign_roles(&seg);
        assert!(roles.iter().all(|r| r.role == Role::NonMerged && r.merge_len == 1));
        assert_eq!(merged_fraction::<f64>(&[roles]), 0.0);
    }

    #[test]
    fn one_length_three_span_in_ten() {
        let mut spans = vec![(0, 1), (1, 2), (2, 5)];
        spans.extend((5..10).map(|i| (i, i + 1)));
        let roles = assign_roles(&seg_with_spans(&spans));
        assert_eq!(roles.len(), 10);
        assert_eq!(roles.iter().filter(|r| r.role == Role::First).count(), 1);
        assert_eq!(roles.iter().filter(|r| r.role == Role::Continuation).count(), 2);
        assert_eq!(roles[3].merge_len, 3);
        assert!((merged_fraction::<f64>(&[roles]) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn constant_entropy_gives_constant_means() {
        let seg = seg_with_spans(&[(0, 2), (2, 3), (3, 6)]);
        let roles = vec![assign_roles(&seg)];
        let traces = vec![trace_with_entropy(6, vec![1.0; 6])];
        let stats: RoleStats<f64> = role_stats(&traces, &roles).unwrap();
        for r in Role::ALL {
            assert_eq!(stats.role(r).mean_bits, Some(1.0));
        }
        let total: f64 = Role::ALL.iter().map(|r| stats.role(*r).fraction).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_entropy_is_reported() {
        let seg = seg_with_spans(&[(0, 1)]);
        let traces = vec![Trace::from_pieces("nope", &["x"])];
        let err = role_stats::<f64>(&traces, &[assign_roles(&seg)]).unwrap_err();
        assert!(matches!(err, Error::MissingEntropy(id) if id == "nope"));
    }

    #[test]
    fn manual_two_trace_average() {
        // trace a: [NM 2.0][F 1.0, C 0.5]; trace b: [F 0.9, C 0.1, C 0.2][NM 3.0]
        let a = trace_with_entropy(3, vec![2.0, 1.0, 0.5]);
        let b = trace_with_entropy(4, vec![0.9, 0.1, 0.2, 3.0]);
        let roles = vec![
            assign_roles(&seg_with_spans(&[(0, 1), (1, 3)])),
            assign_roles(&seg_with_spans(&[(0, 3), (3, 4)])),
        ];
        let stats: RoleStats<f64> = role_stats(&[a, b], &roles).unwrap();
        assert!((stats.role(Role::NonMerged).mean_bits.unwrap() - 2.5).abs() < 1e-12);
        assert!((stats.role(Role::First).mean_bits.unwrap() - 0.95).abs() < 1e-12);
        assert!((stats.role(Role::Continuation).mean_bits.unwrap() - 0.8 / 3.0).abs() < 1e-12);
        assert!((stats.merged.mean_bits.unwrap() - 2.7 / 5.0).abs() < 1e-12);
        assert!((stats.rho() - 5.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn half_entropy_bins() {
        // continuation tokens at 0.5 x the non-merged mean in lengths 2, 3 and 17
        let spans = [(0, 1), (1, 3), (3, 4), (4, 7), (7, 24)];
        let mut h = vec![2.0, 9.0, 1.0, 2.0, 9.0, 1.0, 1.0, 9.0];
        h.extend(std::iter::repeat_n(1.0, 16));
        let traces = vec![trace_with_entropy(24, h)];
        let roles = vec![assign_roles(&seg_with_spans(&spans))];
        let rep: LengthBinReport<f64> = length_binned_stats(&traces, &roles).unwrap();
        assert_eq!(rep.non_merged_mean_bits, Some(2.0));
        let labels: Vec<String> = rep.bins.iter().map(|b| b.bin.to_string()).collect();
        assert_eq!(labels, ["2", "3", "16+"]);
        for b in &rep.bins {
            assert!((b.reduction.unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn bin_equal_to_non_merged_has_zero_reduction() {
        let traces = vec![trace_with_entropy(3, vec![1.3, 0.2, 1.3])];
        let roles = vec![assign_roles(&seg_with_spans(&[(0, 1), (1, 3)]))];
        let rep: LengthBinReport<f64> = length_binned_stats(&traces, &roles).unwrap();
        assert_eq!(rep.bins[0].reduction, Some(0.0));
    }

    #[test]
    fn length_bin_serde() {
        let json = serde_json::to_string(&LengthBin::of(40).unwrap()).unwrap();
        assert_eq!(json, "\"16+\"");
        let b: LengthBin = serde_json::from_str("\"7\"").unwrap();
        assert_eq!(b.min_len(), 7);
        assert!(serde_json::from_str::<LengthBin>("\"1\"").is_err());
    }

    #[test]
    fn ceiling_limits_and_errors() {
        let r = compression_ceiling(0.2f64, 0.0, 17.0).unwrap();
        assert_eq!(r.delta, 0.2);
        assert!(matches!(compression_ceiling(0.2f64, 1.0, 0.0), Err(Error::NonPositiveVocab)));
        assert!(compression_ceiling(1.2f64, 1.0, 17.0).is_err());
        assert!(compression_ceiling(0.2f64, 18.0, 17.0).is_err());
        assert_eq!(compression_ceiling(0.0f64, 1.0, 17.0).unwrap().delta_over_rho, None);
    }

    #[test]
    fn ceiling_headline_value() {
        let log2v = default_log2_vocab::<f64>();
        let r = compression_ceiling(0.152, 0.06 * log2v, log2v).unwrap();
        assert!((r.delta - 0.14288).abs() < 1e-12);
        assert!((r.delta_over_rho.unwrap() - 0.94).abs() < 1e-12);
    }

    #[test]
    fn default_vocab_is_about_17_2_bits() {
        let v = default_log2_vocab::<f64>();
        assert!((v - 17.2130).abs() < 1e-3);
    }

    #[test]
    fn role_decomposition_sums_to_headline() {
        let traces = vec![trace_with_entropy(7, vec![1.2, 1.1, 0.9, 1.3, 0.4, 0.2, 2.0])];
        let roles = vec![assign_roles(&seg_with_spans(&[(0, 1), (1, 3), (3, 6), (6, 7)]))];
        let stats: RoleStats<f64> = role_stats(&traces, &roles).unwrap();
        let rep = ceiling_from_stats(&stats, 17.2).unwrap();
        let parts = rep.delta_by_role.unwrap();
        assert!((parts.continuation + parts.first - rep.delta).abs() < 1e-12);
    }

    #[test]
    fn gap_examples() {
        let same = RoleMeans::new(1.0f64, 0.8, 0.5);
        let g = cross_model_gap(&same, &same).unwrap();
        assert!(g.deltas.values().all(|d| *d == 0.0));

        let a = RoleMeans::new(3.0f64, 2.0, 0.5);
        let b = RoleMeans::new(4.0f64, 2.5, 1.0);
        let g = cross_model_gap(&a, &b).unwrap();
        assert_eq!(g.gap_self, 2.5);
        assert_eq!(g.gap_cross, 3.0);
        assert_eq!(g.deltas[&Role::First], 0.5);

        let partial = RoleMeans(BTreeMap::from([(Role::First, 1.0f64)]));
        assert!(matches!(cross_model_gap(&a, &partial), Err(Error::RoleMismatch)));
    }

    #[test]
    fn works_in_f32() {
        let r = compression_ceiling(0.152f32, 1.0, 17.2).unwrap();
        assert!(r.delta > 0.14 && r.delta < 0.15);
    }

    proptest::proptest! {
        #[test]
        fn delta_bounded_and_decreasing(rho in 0.0f64..=1.0, h1 in 0.0f64..17.0, dh in 0.001f64..0.2) {
            let a = compression_ceiling(rho, h1, 17.2).unwrap();
            let b = compression_ceiling(rho, h1 + dh, 17.2).unwrap();
            proptest::prop_assert!(a.delta >= 0.0 && a.delta <= rho);
            if rho > 0.0 {
                proptest::prop_assert!(b.delta < a.delta);
            }
        }
    }
}
