//! Normal-approximation 95% intervals for accuracy and token-count deltas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

/// Assumed coefficient of variation of per-sample token counts.
pub const TOKEN_CV: f64 = 0.24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntervalKind {
    Accuracy,
    PairedTokens,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IntervalEstimate<T> {
    pub delta: T,
    pub lo: T,
    pub hi: T,
    pub n: u64,
    pub kind: IntervalKind,
    /// The interval excludes zero.
    pub significant: bool,
}

impl<T: Scalar> IntervalEstimate<T> {
    fn centred(delta: T, half: T, n: u64, kind: IntervalKind) -> Self {
        let lo = delta - half;
        let hi = delta + half;
        Self {
            delta,
            lo,
            hi,
            n,
            kind,
            significant: lo > T::zero() || hi < T::zero(),
        }
    }

    pub fn half_width(&self) -> T {
        (self.hi - self.lo) / T::lit(2.0)
    }

    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }
}

fn check_proportion<T: Scalar>(p: T) -> Result<()> {
    if p >= T::zero() && p <= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidProportion(p.to_f64_lossy()))
    }
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidInput("sample size must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn accuracy_half_width<T: Scalar>(p_base: T, p_sft: T, n: u64) -> Result<T> {
    check_proportion(p_base)?;
    check_proportion(p_sft)?;
    check_n(n)?;
    let nn = T::from_count(n as usize);
    let var = p_base * (T::one() - p_base) / nn + p_sft * (T::one() - p_sft) / nn;
    Ok(T::lit(Z_95) * var.sqrt())
}

/// `Δp ± 1.96 sqrt(p_b(1-p_b)/n + p_s(1-p_s)/n)`, in the units of the inputs.
pub fn accuracy_ci<T: Scalar>(p_base: T, p_sft: T, n: u64) -> Result<IntervalEstimate<T>> {
    let half = accuracy_half_width(p_base, p_sft, n)?;
    Ok(IntervalEstimate::centred(p_sft - p_base, half, n, IntervalKind::Accuracy))
}

/// As [`accuracy_ci`], but centred on an externally reported delta, for
/// reproducing tables whose delta column was computed from unrounded
/// accuracies.
pub fn accuracy_ci_with_delta<T: Scalar>(p_base: T, p_sft: T, n: u64, delta: T) -> Result<IntervalEstimate<T>> {
    let half = accuracy_half_width(p_base, p_sft, n)?;
    if !delta.is_finite() {
        return Err(Error::InvalidInput(format!("delta {delta} is not finite")));
    }
    Ok(IntervalEstimate::centred(delta, half, n, IntervalKind::Accuracy))
}

/// `Δt ± 1.96 (0.24 T̄) / sqrt(n)` with `T̄` the mean of the two token counts.
pub fn paired_token_ci<T: Scalar>(t_base: T, t_sft: T, n: u64) -> Result<IntervalEstimate<T>> {
    if !(t_base > T::zero() && t_sft > T::zero()) || !t_base.is_finite() || !t_sft.is_finite() {
        return Err(Error::InvalidInput(format!(
            "token means must be positive (got {t_base}, {t_sft})"
        )));
    }
    check_n(n)?;
    let mean = (t_base + t_sft) / T::lit(2.0);
    let half = T::lit(Z_95) * T::lit(TOKEN_CV) * mean / T::from_count(n as usize).sqrt();
    Ok(IntervalEstimate::centred(t_sft - t_base, half, n, IntervalKind::PairedTokens))
}
