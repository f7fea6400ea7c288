// SPDX-License-Identifier: MIT OR Apache-2.0

//! Online detection over a bounded buffer of the latest `k` points.
//!
//! `psi` is chosen once from a reference stream. Each step appends `w`
//! points, rebuilds the isolation model from the buffer and scores the newest
//! interval against the one before it.

use crate::data::{apply_norm, minmax_normalize, NormParams, TimeSeries};
use crate::detector::{isolation_pair_score, select_psi, Scoring};
use crate::embedding::embed_rows;
use crate::error::{IcidError, Result};
use crate::instability::InstabilityMeasure;
use crate::kernel::IsolationModel;
use ndarray::{s, Array2, ArrayView2};

/// Ring buffer of normalized points. The model samples physical slots, so
/// overwriting the oldest interval in place leaves untouched slots where they are.
#[derive(Clone, Debug)]
struct Ring {
    slots: Array2<f64>,
    len: usize,
    head: usize,
}

impl Ring {
    fn new(capacity: usize, dim: usize) -> Self {
        Self {
            slots: Array2::zeros((capacity, dim)),
            len: 0,
            head: 0,
        }
    }

    fn capacity(&self) -> usize {
        self.slots.nrows()
    }

    fn push_rows(&mut self, rows: ArrayView2<'_, f64>) {
        for row in rows.rows() {
            self.slots.row_mut(self.head).assign(&row);
            self.head = (self.head + 1) % self.capacity();
            self.len = (self.len + 1).min(self.capacity());
        }
    }

    fn clear(&mut self) {
        self.len = 0;
        self.head = 0;
    }

    fn filled(&self) -> ArrayView2<'_, f64> {
        self.slots.slice(s![..self.len, ..])
    }

    /// Rows `[from, to)` counted back from the newest point (`from` > `to`).
    fn recent(&self, from: usize, to: usize) -> impl Iterator<Item = &[f64]> {
        let cap = self.capacity();
        let slots = self.slots.as_slice().expect("owned array is contiguous");
        let d = self.slots.ncols();
        (to + 1..=from)
            .rev()
            .map(move |back| (self.head + cap - back) % cap)
            .map(move |p| &slots[p * d..(p + 1) * d])
    }
}

/// Settings for [`init_online`].
#[derive(Clone, Debug, PartialEq)]
pub struct OnlineConfig {
    pub window: usize,
    pub psi_list: Vec<usize>,
    pub t: usize,
    pub seed: u64,
    pub measure: InstabilityMeasure,
    pub scoring: Scoring,
}

/// Single-owner state of an online run.
#[derive(Clone, Debug)]
pub struct OnlineState {
    psi_star: usize,
    window: usize,
    t: usize,
    seed: u64,
    measure: InstabilityMeasure,
    scoring: Scoring,
    norm: NormParams,
    buffer: Ring,
    steps: usize,
}

/// Selects `psi` on the normalized reference and seeds the buffer with it.
/// The buffer holds at most `reference.len()` points.
pub fn init_online(reference: &TimeSeries, config: &OnlineConfig) -> Result<OnlineState> {
    if !config.scoring.uses_isolation() {
        return Err(IcidError::invalid("online mode supports icid and icid_mmd scoring"));
    }
    let (normalized, norm) = minmax_normalize(reference);
    let selection = select_psi(
        normalized.view(),
        config.window,
        &config.psi_list,
        config.t,
        config.seed,
        &config.measure,
        config.scoring,
    )?;
    let mut buffer = Ring::new(reference.len(), reference.dim());
    buffer.push_rows(normalized.view());
    Ok(OnlineState {
        psi_star: selection.psi_star,
        window: config.window,
        t: config.t,
        seed: config.seed,
        measure: config.measure,
        scoring: config.scoring,
        norm,
        buffer,
        steps: 0,
    })
}

impl OnlineState {
    pub fn psi_star(&self) -> usize {
        self.psi_star
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn capacity(&self) -> usize {
        self.buffer.capacity()
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len
    }

    pub fn norm(&self) -> &NormParams {
        &self.norm
    }

    pub fn measure(&self) -> &InstabilityMeasure {
        &self.measure
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Steps scored so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Drops buffered points; `psi` and normalization stay fixed.
    pub fn clear_buffer(&mut self) {
        self.buffer.clear();
    }

    /// Appends one interval of raw points and scores it against its predecessor.
    ///
    /// Points are appended even when the buffer is still too short to score.
    pub fn online_step(&mut self, new_points: ArrayView2<'_, f64>) -> Result<f64> {
        let w = self.window;
        if new_points.nrows() != w {
            return Err(IcidError::invalid(format!(
                "online step expects exactly w = {w} points, got {}",
                new_points.nrows()
            )));
        }
        let normalized = apply_norm(&self.norm, new_points)?;
        self.buffer.push_rows(normalized.view());
        let need = (2 * w).max(self.psi_star);
        if self.buffer.len < need {
            return Err(IcidError::WarmingUp {
                have: self.buffer.len,
                need,
            });
        }
        let model = IsolationModel::build(self.buffer.filled(), self.psi_star, self.t, self.seed)?;
        let current = embed_rows(&model, self.buffer.recent(w, 0));
        let previous = embed_rows(&model, self.buffer.recent(2 * w, w));
        self.steps += 1;
        Ok(isolation_pair_score(&current, &previous, self.scoring))
    }
}
