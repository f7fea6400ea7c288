// SPDX-License-Identifier: MIT OR Apache-2.0

//! Interval scoring, `psi` selection, thresholding and offline detection.

use crate::embedding::{embed_rows, finish_mmd, isolation_mmd, point_kernel_mean, IntervalEmbedding, PointKernelSpec};
use crate::error::{IcidError, Result};
use crate::instability::{instability, mean, std_dev, InstabilityMeasure};
use crate::kernel::{IsolationModel, DEFAULT_T};
use ndarray::{s, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Subsample sizes searched by default.
pub const DEFAULT_PSI_GRID: [usize; 6] = [2, 4, 8, 16, 32, 64];

/// Threshold multipliers searched when tuning: `0.0, 0.1, ..., 3.0`.
pub fn alpha_grid() -> Vec<f64> {
    (0..=30).map(|k| k as f64 / 10.0).collect()
}

/// Intervals embedded per parallel task in offline scoring.
const CHUNK_INTERVALS: usize = 32;

/// How adjacent intervals are compared.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scoring {
    /// `1 -` normalized isolation distributional similarity.
    Icid,
    /// Squared MMD under the isolation kernel.
    IcidMmd,
    /// Squared MMD under a point kernel; `None` picks a Gaussian by the median heuristic.
    GcidMmd { kernel: Option<PointKernelSpec> },
}

impl Scoring {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Icid => "icid",
            Self::IcidMmd => "icid_mmd",
            Self::GcidMmd { .. } => "gcid_mmd",
        }
    }

    pub fn uses_isolation(&self) -> bool {
        !matches!(self, Self::GcidMmd { .. })
    }
}

impl fmt::Display for Scoring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scoring {
    type Err = IcidError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "icid" => Ok(Self::Icid),
            "icid_mmd" => Ok(Self::IcidMmd),
            "gcid_mmd" => Ok(Self::GcidMmd { kernel: None }),
            other => Err(IcidError::invalid(format!(
                "unknown scoring {other:?} (expected icid, icid_mmd or gcid_mmd)"
            ))),
        }
    }
}

/// Scores of consecutive non-overlapping intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub scores: Vec<f64>,
    pub window: usize,
    /// `None` for point-kernel scoring, which has no subsample size.
    pub psi: Option<usize>,
    pub scoring: Scoring,
}

impl ScoreSeries {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Splits `n` rows into `n / w` consecutive blocks of `w`; the remainder is dropped.
pub fn split_intervals(series: ArrayView2<'_, f64>, w: usize) -> Result<Vec<ArrayView2<'_, f64>>> {
    let n_intervals = interval_count(series.nrows(), w)?;
    Ok((0..n_intervals)
        .map(|i| series.slice_move(s![i * w..(i + 1) * w, ..]))
        .collect())
}

fn interval_count(n: usize, w: usize) -> Result<usize> {
    if w < 2 {
        return Err(IcidError::invalid(format!("window must be >= 2; got {w}")));
    }
    if n < 2 * w {
        return Err(IcidError::TooFewIntervals { n, w });
    }
    Ok(n / w)
}

/// Dissimilarity of `current` against its predecessor under isolation scoring.
#[inline]
pub(crate) fn isolation_pair_score(
    current: &IntervalEmbedding,
    previous: &IntervalEmbedding,
    scoring: Scoring,
) -> f64 {
    match scoring {
        Scoring::IcidMmd => isolation_mmd(current, previous),
        _ => 1.0 - current.cosine(previous),
    }
}

/// Scores every interval of `data` with an already built isolation model.
pub fn score_with_model(
    model: &IsolationModel,
    data: ArrayView2<'_, f64>,
    w: usize,
    scoring: Scoring,
) -> Result<ScoreSeries> {
    if !scoring.uses_isolation() {
        return Err(IcidError::invalid("score_with_model requires an isolation scoring"));
    }
    let n_intervals = interval_count(data.nrows(), w)?;
    model.check_dim(data.ncols())?;
    let data = data.as_standard_layout();
    let flat = data.as_slice().expect("standard layout is contiguous");
    let d = model.dim();
    let interval = |i: usize| flat[i * w * d..(i + 1) * w * d].chunks_exact(d);

    let chunks: Vec<Vec<f64>> = (0..n_intervals.div_ceil(CHUNK_INTERVALS))
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK_INTERVALS;
            let end = (start + CHUNK_INTERVALS).min(n_intervals);
            let mut out = Vec::with_capacity(end - start);
            let mut prev = (start > 0).then(|| embed_rows(model, interval(start - 1)));
            for i in start..end {
                let cur = embed_rows(model, interval(i));
                out.push(match &prev {
                    Some(p) => isolation_pair_score(&cur, p, scoring),
                    None => 0.0,
                });
                prev = Some(cur);
            }
            out
        })
        .collect();

    Ok(ScoreSeries {
        scores: chunks.concat(),
        window: w,
        psi: Some(model.psi()),
        scoring,
    })
}

fn score_with_point_kernel(
    data: ArrayView2<'_, f64>,
    w: usize,
    spec: &PointKernelSpec,
    scoring: Scoring,
) -> Result<ScoreSeries> {
    let intervals = split_intervals(data, w)?;
    let mut scores = vec![0.0];
    let rest: Vec<f64> = (1..intervals.len())
        .into_par_iter()
        .map(|i| {
            let (cur, prev) = (intervals[i], intervals[i - 1]);
            let raw = point_kernel_mean(cur, cur, spec)? + point_kernel_mean(prev, prev, spec)?
                - 2.0 * point_kernel_mean(cur, prev, spec)?;
            Ok(finish_mmd(raw, spec))
        })
        .collect::<Result<_>>()?;
    scores.extend(rest);
    Ok(ScoreSeries {
        scores,
        window: w,
        psi: None,
        scoring,
    })
}

/// Resolves the point kernel for `GcidMmd`, applying the median heuristic when unset.
pub fn resolve_point_kernel(
    data: ArrayView2<'_, f64>,
    kernel: Option<PointKernelSpec>,
    seed: u64,
) -> Result<PointKernelSpec> {
    let spec = match kernel {
        Some(k) => k,
        None => PointKernelSpec::gaussian_median_heuristic(data, seed)?,
    };
    spec.validate()?;
    Ok(spec)
}

/// Scores with a model fitted on all of `data`.
pub fn score_series(
    data: ArrayView2<'_, f64>,
    w: usize,
    psi: usize,
    t: usize,
    seed: u64,
    scoring: Scoring,
) -> Result<ScoreSeries> {
    match scoring {
        Scoring::GcidMmd { kernel } => {
            let spec = resolve_point_kernel(data, kernel, seed)?;
            score_with_point_kernel(data, w, &spec, Scoring::GcidMmd { kernel: Some(spec) })
        }
        _ => {
            interval_count(data.nrows(), w)?;
            let model = IsolationModel::build(data, psi, t, seed)?;
            score_with_model(&model, data, w, scoring)
        }
    }
}

/// Outcome of the `psi` search.
#[derive(Clone, Debug, PartialEq)]
pub struct PsiSelection {
    pub psi_star: usize,
    pub series: ScoreSeries,
    /// `(psi, instability)` for every candidate, ascending in `psi`.
    pub instabilities: Vec<(usize, f64)>,
}

fn normalized_psi_list(psi_list: &[usize]) -> Result<Vec<usize>> {
    if psi_list.is_empty() {
        return Err(IcidError::invalid("psi list must not be empty"));
    }
    let mut psis = psi_list.to_vec();
    psis.sort_unstable();
    psis.dedup();
    if psis[0] == 0 {
        return Err(IcidError::invalid("psi must be >= 1"));
    }
    Ok(psis)
}

/// Picks the `psi` whose score series is least unstable; ties go to the smaller `psi`.
pub fn select_psi(
    data: ArrayView2<'_, f64>,
    w: usize,
    psi_list: &[usize],
    t: usize,
    seed: u64,
    measure: &InstabilityMeasure,
    scoring: Scoring,
) -> Result<PsiSelection> {
    let psis = normalized_psi_list(psi_list)?;
    measure.validate()?;
    let n_intervals = interval_count(data.nrows(), w)?;
    if n_intervals < measure.min_len() {
        return Err(IcidError::SeriesTooShort(format!(
            "{} intervals are too few for {}",
            n_intervals, measure.kind
        )));
    }
    if let Some(&big) = psis.iter().find(|&&p| p > data.nrows()) {
        return Err(IcidError::InsufficientData {
            psi: big,
            available: data.nrows(),
        });
    }
    let candidates: Vec<(usize, ScoreSeries, f64)> = psis
        .par_iter()
        .map(|&psi| {
            let series = score_series(data, w, psi, t, seed, scoring)?;
            let e = instability(&series.scores, measure)?;
            Ok((psi, series, e))
        })
        .collect::<Result<_>>()?;
    Ok(choose_min(candidates))
}

/// `candidates` must be sorted by `psi`; the first minimum wins.
fn choose_min(candidates: Vec<(usize, ScoreSeries, f64)>) -> PsiSelection {
    let instabilities: Vec<(usize, f64)> = candidates.iter().map(|(p, _, e)| (*p, *e)).collect();
    let best = instabilities
        .iter()
        .enumerate()
        .fold(0, |best, (i, &(_, e))| if e < instabilities[best].1 { i } else { best });
    let (psi_star, series, _) = candidates.into_iter().nth(best).expect("nonempty");
    PsiSelection {
        psi_star,
        series,
        instabilities,
    }
}

/// Selects among precomputed candidate series; exposed for testing the selection rule.
pub fn select_from_series(
    candidates: &[(usize, Vec<f64>)],
    measure: &InstabilityMeasure,
) -> Result<usize> {
    let psis = normalized_psi_list(&candidates.iter().map(|c| c.0).collect::<Vec<_>>())?;
    if psis.len() != candidates.len() {
        return Err(IcidError::invalid("duplicate psi among candidates"));
    }
    let mut scored = Vec::with_capacity(candidates.len());
    for &psi in &psis {
        let scores = &candidates.iter().find(|c| c.0 == psi).expect("present").1;
        let series = ScoreSeries {
            scores: scores.clone(),
            window: 0,
            psi: Some(psi),
            scoring: Scoring::Icid,
        };
        let e = instability(scores, measure)?;
        scored.push((psi, series, e));
    }
    Ok(choose_min(scored).psi_star)
}

/// `mean + alpha * sigma` with the population standard deviation.
pub fn threshold(scores: &[f64], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(IcidError::invalid("threshold needs at least one score"));
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(IcidError::invalid(format!("alpha must be finite and >= 0; got {alpha}")));
    }
    Ok(mean(scores) + alpha * std_dev(scores))
}

/// Indices `j >= 1` with `scores[j] > tau`.
pub fn flag_intervals(scores: &[f64], tau: f64) -> Vec<usize> {
    scores
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &s)| s > tau)
        .map(|(j, _)| j)
        .collect()
}

/// Parameters of an offline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub window: usize,
    pub psi_list: Vec<usize>,
    pub alpha: f64,
    pub t: usize,
    pub seed: u64,
    pub measure: InstabilityMeasure,
    pub scoring: Scoring,
}

impl DetectorConfig {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            psi_list: DEFAULT_PSI_GRID.to_vec(),
            alpha: 1.0,
            t: DEFAULT_T,
            seed: 0,
            measure: InstabilityMeasure::default(),
            scoring: Scoring::Icid,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub series: ScoreSeries,
    pub threshold: f64,
    pub alpha: f64,
    pub flagged: Vec<usize>,
    pub psi_star: Option<usize>,
    /// Instability of each candidate `psi` (empty for point-kernel scoring).
    pub instabilities: Vec<(usize, f64)>,
}

impl DetectionResult {
    /// Recomputes the threshold and flags for another `alpha` on the same scores.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let tau = threshold(&self.series.scores, alpha)?;
        Ok(Self {
            threshold: tau,
            alpha,
            flagged: flag_intervals(&self.series.scores, tau),
            ..self.clone()
        })
    }
}

/// Offline detection: choose `psi`, threshold the chosen series, flag intervals.
pub fn detect_offline(data: ArrayView2<'_, f64>, config: &DetectorConfig) -> Result<DetectionResult> {
    let (series, psi_star, instabilities) = match config.scoring {
        Scoring::GcidMmd { .. } => {
            let series = score_series(data, config.window, 0, config.t, config.seed, config.scoring)?;
            (series, None, Vec::new())
        }
        _ => {
            let sel = select_psi(
                data,
                config.window,
                &config.psi_list,
                config.t,
                config.seed,
                &config.measure,
                config.scoring,
            )?;
            (sel.series, Some(sel.psi_star), sel.instabilities)
        }
    };
    let tau = threshold(&series.scores, config.alpha)?;
    Ok(DetectionResult {
        flagged: flag_intervals(&series.scores, tau),
        series,
        threshold: tau,
        alpha: config.alpha,
        psi_star,
        instabilities,
    })
}

/// Per-point change scores from sliding a pair of adjacent windows one step at a time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointScores {
    pub scores: Vec<f64>,
    pub window: usize,
    pub psi: usize,
    /// Number of adjacent-window pairs compared.
    pub pair_evaluations: usize,
}

/// Scores every point `i` in `[w, n - w)` by comparing `[i - w, i)` with `[i, i + w)`.
/// The first and last `w` points score 0.
pub fn score_points_cpd(
    data: ArrayView2<'_, f64>,
    w: usize,
    psi: usize,
    t: usize,
    seed: u64,
) -> Result<PointScores> {
    check_cpd_len(data.nrows(), w)?;
    let model = IsolationModel::build(data, psi, t, seed)?;
    score_points_with_model(&model, data, w)
}

fn check_cpd_len(n: usize, w: usize) -> Result<()> {
    if w < 1 {
        return Err(IcidError::invalid("window must be >= 1"));
    }
    if n < 2 * w + 1 {
        return Err(IcidError::SeriesTooShort(format!(
            "point scoring needs n >= 2w + 1 = {}, got {n}",
            2 * w + 1
        )));
    }
    Ok(())
}

pub fn score_points_with_model(
    model: &IsolationModel,
    data: ArrayView2<'_, f64>,
    w: usize,
) -> Result<PointScores> {
    let n = data.nrows();
    check_cpd_len(n, w)?;
    model.check_dim(data.ncols())?;
    let data = data.as_standard_layout();
    let flat = data.as_slice().expect("standard layout is contiguous");
    let d = model.dim();
    let rows = |a: usize, b: usize| flat[a * d..b * d].chunks_exact(d);

    let inner: Vec<f64> = (w..n - w)
        .into_par_iter()
        .map(|i| {
            let left = embed_rows(model, rows(i - w, i));
            let right = embed_rows(model, rows(i, i + w));
            1.0 - right.cosine(&left)
        })
        .collect();
    let mut scores = vec![0.0; n];
    scores[w..n - w].copy_from_slice(&inner);
    Ok(PointScores {
        pair_evaluations: inner.len(),
        scores,
        window: w,
        psi: model.psi(),
    })
}
