// SPDX-License-Identifier: MIT OR Apache-2.0

//! Instability of a score series, minimized when choosing `psi`.

use crate::error::{IcidError, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstabilityKind {
    ApproxEntropy,
    Variance,
    Gini,
}

impl fmt::Display for InstabilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ApproxEntropy => "approx_entropy",
            Self::Variance => "variance",
            Self::Gini => "gini",
        })
    }
}

impl FromStr for InstabilityKind {
    type Err = IcidError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "approx_entropy" | "apen" => Ok(Self::ApproxEntropy),
            "variance" => Ok(Self::Variance),
            "gini" => Ok(Self::Gini),
            other => Err(IcidError::invalid(format!(
                "unknown instability measure {other:?} (expected approx_entropy, variance or gini)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstabilityMeasure {
    pub kind: InstabilityKind,
    /// ApEn embedding dimension.
    pub apen_m: usize,
    /// ApEn tolerance as a multiple of the series standard deviation.
    pub apen_r_factor: f64,
}

impl Default for InstabilityMeasure {
    fn default() -> Self {
        Self::new(InstabilityKind::ApproxEntropy)
    }
}

impl InstabilityMeasure {
    pub fn new(kind: InstabilityKind) -> Self {
        Self {
            kind,
            apen_m: 2,
            apen_r_factor: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.apen_m < 1 {
            return Err(IcidError::invalid("apen_m must be >= 1"));
        }
        if !self.apen_r_factor.is_finite() || self.apen_r_factor <= 0.0 {
            return Err(IcidError::invalid(format!(
                "apen_r_factor must be finite and > 0; got {}",
                self.apen_r_factor
            )));
        }
        Ok(())
    }

    /// Minimum series length this measure accepts.
    pub fn min_len(&self) -> usize {
        match self.kind {
            InstabilityKind::ApproxEntropy => self.apen_m + 1,
            _ => 1,
        }
    }
}

pub fn instability(scores: &[f64], measure: &InstabilityMeasure) -> Result<f64> {
    measure.validate()?;
    if scores.len() < measure.min_len() {
        return Err(IcidError::SeriesTooShort(format!(
            "{} needs at least {} scores, got {}",
            measure.kind,
            measure.min_len(),
            scores.len()
        )));
    }
    Ok(match measure.kind {
        InstabilityKind::ApproxEntropy => {
            approximate_entropy(scores, measure.apen_m, measure.apen_r_factor * std_dev(scores))
        }
        InstabilityKind::Variance => variance(scores),
        InstabilityKind::Gini => gini(scores),
    })
}

/// Arithmetic mean, accumulated relative to the first value so a constant
/// series returns that constant exactly.
pub fn mean(xs: &[f64]) -> f64 {
    let Some(&first) = xs.first() else {
        return f64::NAN;
    };
    first + xs.iter().map(|x| x - first).sum::<f64>() / xs.len() as f64
}

/// Population variance.
pub fn variance(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Gini coefficient, `sum |x_i - x_j| / (2 n^2 mean)`. Zero for an all-zero series.
pub fn gini(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mu = mean(xs);
    if mu <= 0.0 {
        return 0.0;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return 0.0;
    }
    // sum_{i<j} (x_j - x_i) over sorted values, via prefix sums
    let mut prefix = 0.0;
    let mut acc = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        acc += i as f64 * x - prefix;
        prefix += x;
    }
    2.0 * acc / (2.0 * n * n * mu)
}

/// Pincus approximate entropy with Chebyshev distance and self-matches.
/// A zero tolerance (constant series) yields 0, as does a series of at most `m` values.
pub fn approximate_entropy(xs: &[f64], m: usize, r: f64) -> f64 {
    if r <= 0.0 || xs.len() <= m {
        return 0.0;
    }
    let phi = |len: usize| -> f64 {
        let count = xs.len() + 1 - len;
        let mut total = 0.0;
        for i in 0..count {
            let a = &xs[i..i + len];
            let matches = (0..count)
                .filter(|&j| {
                    xs[j..j + len]
                        .iter()
                        .zip(a)
                        .all(|(p, q)| (p - q).abs() <= r)
                })
                .count();
            total += (matches as f64 / count as f64).ln();
        }
        total / count as f64
    };
    (phi(m) - phi(m + 1)).max(0.0)
}
