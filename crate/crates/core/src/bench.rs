// SPDX-License-Identifier: MIT OR Apache-2.0

//! Wall-clock scaling check for offline and online detection.

use crate::data::{gen_s1_blocks, TimeSeries};
use crate::detector::{detect_offline, DetectorConfig, Scoring, DEFAULT_PSI_GRID};
use crate::error::{IcidError, Result};
use crate::instability::InstabilityMeasure;
use crate::kernel::DEFAULT_T;
use crate::online::{init_online, OnlineConfig};
use ndarray::{s, Axis};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Stream lengths timed by default.
pub const BENCH_SIZES: [usize; 4] = [12_500, 25_000, 50_000, 100_000];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub window: usize,
    pub psi_list: Vec<usize>,
    pub t: usize,
    pub seed: u64,
    pub measure: InstabilityMeasure,
    /// Offline runs per size; the fastest is reported.
    pub repeats: usize,
    /// Online steps timed per size after the buffer is full.
    pub online_steps: usize,
    /// Online buffer capacity, identical for every size.
    pub online_capacity: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: BENCH_SIZES.to_vec(),
            window: 60,
            psi_list: DEFAULT_PSI_GRID.to_vec(),
            t: DEFAULT_T,
            seed: 0,
            measure: InstabilityMeasure::default(),
            repeats: 2,
            online_steps: 40,
            online_capacity: 6_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    /// Seconds for a full offline run including `psi` selection.
    pub offline_secs: f64,
    /// `offline_secs` relative to the smallest size.
    pub offline_ratio: f64,
    /// Median seconds per online step.
    pub online_step_secs: f64,
    /// `online_step_secs` relative to the smallest size.
    pub online_ratio: f64,
    pub psi_star: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Coefficient of determination of the least-squares line through (n, offline_secs).
    pub r_squared: f64,
    /// Largest offline time ratio between consecutive sizes, normalized to a doubling of n.
    pub max_doubling_factor: f64,
    /// Largest over smallest online per-step time.
    pub online_spread: f64,
}

impl BenchReport {
    /// Plain-text table, one line per size.
    pub fn table(&self) -> String {
        let mut out = String::from("n\toffline_s\tratio\tonline_step_ms\tratio\tpsi_star\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{:.4}\t{:.3}\t{:.4}\t{:.3}\t{}\n",
                r.n,
                r.offline_secs,
                r.offline_ratio,
                r.online_step_secs * 1e3,
                r.online_ratio,
                r.psi_star.map_or("none".to_string(), |p| p.to_string())
            ));
        }
        out.push_str(&format!(
            "r_squared={:.4} max_doubling_factor={:.3} online_spread={:.3}\n",
            self.r_squared, self.max_doubling_factor, self.online_spread
        ));
        out
    }
}

/// Slope, intercept and R² of the least-squares line through the points.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

fn stream(n: usize, seed: u64) -> TimeSeries {
    let (series, _) = gen_s1_blocks(n / 5, seed);
    series
}

/// Times offline detection and online steps on synthetic streams of each size.
pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    if config.sizes.len() < 2 {
        return Err(IcidError::invalid("bench needs at least two sizes"));
    }
    if config.repeats == 0 || config.online_steps == 0 {
        return Err(IcidError::invalid("bench repeats and online steps must be >= 1"));
    }
    let mut sizes = config.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let w = config.window;
    let k = config.online_capacity;
    let psi_online = *config
        .psi_list
        .iter()
        .max()
        .ok_or_else(|| IcidError::invalid("psi list must not be empty"))?;

    let mut raw = Vec::new();
    for &n in &sizes {
        if n < k + config.online_steps * w {
            return Err(IcidError::invalid(format!(
                "size {n} too small for online capacity {k} plus {} steps of {w}",
                config.online_steps
            )));
        }
        let series = stream(n, config.seed);
        let (normalized, _) = crate::data::minmax_normalize(&series);
        let detector = DetectorConfig {
            window: w,
            psi_list: config.psi_list.clone(),
            alpha: 1.0,
            t: config.t,
            seed: config.seed,
            measure: config.measure,
            scoring: Scoring::Icid,
        };
        let mut best = f64::INFINITY;
        let mut psi_star = None;
        for _ in 0..config.repeats {
            let start = Instant::now();
            let result = detect_offline(normalized.view(), &detector)?;
            best = best.min(start.elapsed().as_secs_f64());
            psi_star = result.psi_star;
        }

        // online: identical k, w, psi and t for every size
        let reference = TimeSeries::new(series.values.slice(s![..k, ..]).to_owned())?;
        let online = OnlineConfig {
            window: w,
            psi_list: vec![psi_online],
            t: config.t,
            seed: config.seed,
            measure: config.measure,
            scoring: Scoring::Icid,
        };
        let mut state = init_online(&reference, &online)?;
        let tail = series.values.slice(s![n - config.online_steps * w.., ..]);
        let mut step_secs = Vec::with_capacity(config.online_steps);
        for chunk in tail.axis_chunks_iter(Axis(0), w) {
            let start = Instant::now();
            state.online_step(chunk)?;
            step_secs.push(start.elapsed().as_secs_f64());
        }
        step_secs.sort_by(f64::total_cmp);
        let per_step = step_secs[step_secs.len() / 2];
        log::info!("bench n={n}: offline {best:.3}s, online {:.3}ms/step", per_step * 1e3);
        raw.push((n, best, per_step, psi_star));
    }

    let (_, base_off, base_on, _) = raw[0];
    let rows: Vec<BenchRow> = raw
        .iter()
        .map(|&(n, off, on, psi_star)| BenchRow {
            n,
            offline_secs: off,
            offline_ratio: off / base_off,
            online_step_secs: on,
            online_ratio: on / base_on,
            psi_star,
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.offline_secs).collect();
    let (_, _, r_squared) = linear_fit(&xs, &ys);
    let max_doubling_factor = rows
        .windows(2)
        .map(|p| {
            let size_ratio = p[1].n as f64 / p[0].n as f64;
            (p[1].offline_secs / p[0].offline_secs).powf(size_ratio.log2().recip())
        })
        .fold(0.0, f64::max);
    let on: Vec<f64> = rows.iter().map(|r| r.online_step_secs).collect();
    let online_spread = on.iter().cloned().fold(0.0, f64::max) / on.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(BenchReport {
        rows,
        r_squared,
        max_doubling_factor,
        online_spread,
    })
}
