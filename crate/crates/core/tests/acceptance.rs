// SPDX-License-Identifier: MIT OR Apache-2.0

//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line.
//!
//! Tests hold a shared lock so that wall-clock limits are measured without
//! competing work.

use icid::bench::{run_bench, BenchConfig};
use icid::detector::alpha_grid;
use icid::{
    detect_offline, flag_intervals, gen_s1, gen_s2, idk_similarity, init_online, minmax_normalize, score_series,
    threshold, DetectorConfig, InstabilityKind, InstabilityMeasure, IsolationModel, Labels, OnlineConfig,
    Scoring, TimeSeries, DEFAULT_PSI_GRID,
};
use ndarray::{s, Array2, ArrayView2, Axis};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::sync::Mutex;
use std::time::{Duration, Instant};

static SERIAL: Mutex<()> = Mutex::new(());

const SEEDS: std::ops::Range<u64> = 0..10;

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: u32, pass: bool, detail: impl std::fmt::Display) -> bool {
    println!("criterion {n}: {} — {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.random::<f64>())
}

fn nearest(centers: &[&[f64]], x: &[f64]) -> usize {
    let dist = |c: &[f64]| c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let mut best = 0;
    for (j, c) in centers.iter().enumerate() {
        if dist(c) < dist(centers[best]) {
            best = j;
        }
    }
    best
}

/// Kernel value counted directly over partitionings.
fn kernel_oracle(model: &IsolationModel, x: &[f64], y: &[f64]) -> f64 {
    let same = model
        .partitionings()
        .iter()
        .filter(|p| {
            let centers: Vec<&[f64]> = p.centers().collect();
            nearest(&centers, x) == nearest(&centers, y)
        })
        .count();
    same as f64 / model.t() as f64
}

#[test]
fn criterion_01_kernel_oracle() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let data = uniform(&mut rng, 200, 2);
    let model = IsolationModel::build(data.view(), 8, 50, 7).unwrap();
    let mut mismatches = 0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
        let k = model.point_kernel(&x, &y).unwrap();
        if k != kernel_oracle(&model, &x, &y) || k != (k * 50.0).round() / 50.0 {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && elapsed < Duration::from_secs(1);
    assert!(report(1, pass, format!("{mismatches} mismatches in 100 pairs, {elapsed:.2?}")));
}

fn idk_oracle(model: &IsolationModel, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> f64 {
    let mean_kernel = |a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>| {
        let mut total = 0.0;
        for p in a.rows() {
            for q in b.rows() {
                total += kernel_oracle(model, p.as_slice().unwrap(), q.as_slice().unwrap());
            }
        }
        total / (a.nrows() * b.nrows()) as f64
    };
    mean_kernel(x, y) / (mean_kernel(x, x) * mean_kernel(y, y)).sqrt()
}

#[test]
fn criterion_02_idk_oracle() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let data = uniform(&mut rng, 300, 2);
    let model = IsolationModel::build(data.view(), 8, 30, 3).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (wx, wy) = (rng.random_range(1..=50), rng.random_range(1..=50));
        let x = uniform(&mut rng, wx, 2);
        let y = uniform(&mut rng, wy, 2);
        let got = idk_similarity(&model, x.view(), y.view()).unwrap();
        worst = worst.max((got - idk_oracle(&model, x.view(), y.view())).abs());
    }
    assert!(report(2, worst <= 1e-12, format!("max |error| = {worst:e} over 20 pairs")));
}

/// Change-point intervals and intervals whose only labeled event is an outlier.
fn s1_targets(labels: &Labels, w: usize) -> (Vec<usize>, Vec<usize>) {
    let boundary: Vec<usize> = labels.change_points.iter().map(|c| c / w).collect();
    let mut outlier_only: Vec<usize> =
        labels.outliers.iter().map(|o| o / w).filter(|j| !boundary.contains(j)).collect();
    outlier_only.dedup();
    (boundary, outlier_only)
}

fn s1_outcome(flagged: &[usize], boundary: &[usize], outlier_only: &[usize]) -> bool {
    boundary.iter().all(|j| flagged.contains(j)) && outlier_only.iter().all(|j| !flagged.contains(j))
}

struct S1Run {
    passing_alphas: Vec<f64>,
    psi_star: usize,
    elapsed: Duration,
}

/// Offline S1 run with `w = 60` and the default grid; reports every alpha in `[1, 3]` that succeeds.
fn s1_offline(seed: u64, kind: InstabilityKind) -> S1Run {
    let (series, labels) = gen_s1(seed);
    let start = Instant::now();
    let (normalized, _) = minmax_normalize(&series);
    let mut config = DetectorConfig::new(60);
    config.seed = seed;
    config.measure = InstabilityMeasure::new(kind);
    let result = detect_offline(normalized.view(), &config).unwrap();
    let elapsed = start.elapsed();
    let (boundary, outlier_only) = s1_targets(&labels, 60);
    let passing_alphas = alpha_grid()
        .into_iter()
        .filter(|a| (1.0..=3.0).contains(a))
        .filter(|&a| {
            let tau = threshold(&result.series.scores, a).unwrap();
            s1_outcome(&flag_intervals(&result.series.scores, tau), &boundary, &outlier_only)
        })
        .collect();
    S1Run {
        passing_alphas,
        psi_star: result.psi_star.unwrap(),
        elapsed,
    }
}

fn s1_summary(kind: InstabilityKind) -> (usize, String) {
    let mut passed = 0;
    let mut detail = Vec::new();
    let mut slow = Duration::ZERO;
    for seed in SEEDS {
        let run = s1_offline(seed, kind);
        slow = slow.max(run.elapsed);
        if run.elapsed < Duration::from_secs(5) && !run.passing_alphas.is_empty() {
            passed += 1;
        }
        let alphas = match (run.passing_alphas.first(), run.passing_alphas.last()) {
            (Some(lo), Some(hi)) => format!("{lo:.1}..{hi:.1}"),
            _ => "-".into(),
        };
        detail.push(format!("s{seed}:psi={},alpha={alphas}", run.psi_star));
    }
    (passed, format!("{kind}: {passed}/10 seeds, slowest run {slow:.2?} [{}]", detail.join(" ")))
}

#[test]
fn criterion_03_s1_end_to_end() {
    let _g = serial();
    let (passed, detail) = s1_summary(InstabilityKind::ApproxEntropy);
    assert!(report(3, passed >= 8, detail));
}

/// Point held by the intervals `c / w - 1 ..= c / w + 1`.
fn region(c: usize, w: usize) -> std::ops::RangeInclusive<usize> {
    (c / w).saturating_sub(1)..=c / w + 1
}

#[test]
fn criterion_04_s2_end_to_end() {
    let _g = serial();
    let w = 100;
    let (mut exact, mut marginal) = (0, 0);
    let mut detail = Vec::new();
    for seed in SEEDS {
        let (series, labels) = gen_s2(seed);
        let (normalized, _) = minmax_normalize(&series);
        let mut config = DetectorConfig::new(w);
        config.seed = seed;
        let joint = detect_offline(normalized.view(), &config).unwrap();
        let target: Vec<usize> = labels.change_points.iter().map(|c| c / w).collect();
        let joint_ok = alpha_grid().into_iter().any(|a| {
            flag_intervals(&joint.series.scores, threshold(&joint.series.scores, a).unwrap()) == target
        });

        let dim1 = normalized.column(0).unwrap();
        let single = detect_offline(dim1.view(), &config).unwrap();
        let (first, second) = (region(labels.change_points[0], w), region(labels.change_points[1], w));
        let single_ok = alpha_grid().into_iter().any(|a| {
            let flagged = flag_intervals(&single.series.scores, threshold(&single.series.scores, a).unwrap());
            flagged.iter().any(|j| first.contains(j)) && !flagged.iter().any(|j| second.contains(j))
        });
        exact += joint_ok as usize;
        marginal += single_ok as usize;
        detail.push(format!("s{seed}:{}{}", if joint_ok { "J" } else { "-" }, if single_ok { "M" } else { "-" }));
    }
    let pass = exact >= 8 && marginal >= 8;
    assert!(report(
        4,
        pass,
        format!(
            "exactly {{10, 20}} flagged for {exact}/10 seeds; dim-1 flags 1/2 but not 2/3 for {marginal}/10 [{}]",
            detail.join(" ")
        )
    ));
}

#[test]
fn criterion_05_measure_robustness() {
    let _g = serial();
    let mut all = true;
    let mut details = Vec::new();
    for kind in [InstabilityKind::ApproxEntropy, InstabilityKind::Variance, InstabilityKind::Gini] {
        let (passed, detail) = s1_summary(kind);
        all &= passed >= 8;
        details.push(detail);
    }
    assert!(report(5, all, details.join("; ")));
}

#[test]
fn criterion_06_data_dependence() {
    let _g = serial();
    let mut held = 0;
    for seed in SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let dense = Normal::new(0.0, 0.01).unwrap();
        let sparse = Normal::new(0.0, 0.5).unwrap();
        let mut data = Array2::zeros((2000, 2));
        for i in 0..1000 {
            for d in 0..2 {
                data[[i, d]] = dense.sample(&mut rng);
                data[[1000 + i, d]] = 5.0 + sparse.sample(&mut rng);
            }
        }
        let model = IsolationModel::build(data.view(), 16, 5000, seed).unwrap();
        let k_dense = model.point_kernel(&[-0.025, 0.0], &[0.025, 0.0]).unwrap();
        let k_sparse = model.point_kernel(&[4.975, 5.0], &[5.025, 5.0]).unwrap();
        held += (k_sparse > k_dense) as usize;
    }
    assert!(report(6, held >= 9, format!("sparse pair more similar in {held}/10 seeds")));
}

fn online_config(w: usize, seed: u64) -> OnlineConfig {
    OnlineConfig {
        window: w,
        psi_list: DEFAULT_PSI_GRID.to_vec(),
        t: 200,
        seed,
        measure: InstabilityMeasure::default(),
        scoring: Scoring::Icid,
    }
}

#[test]
fn criterion_07_online_consistency() {
    let _g = serial();
    let w = 60;
    let mut identical = true;
    let mut peaks = 0;
    let mut detail = Vec::new();
    for seed in SEEDS {
        let (series, labels) = gen_s1(seed);

        // k = n: a full buffer of the stream itself replays the offline model
        let mut full = init_online(&series, &online_config(w, seed)).unwrap();
        let (normalized, _) = minmax_normalize(&series);
        let offline = score_series(normalized.view(), w, full.psi_star(), 200, seed, Scoring::Icid).unwrap();
        for (i, chunk) in series.values.axis_chunks_iter(Axis(0), w).enumerate() {
            let score = full.online_step(chunk).unwrap();
            identical &= i == 0 || score.to_bits() == offline.scores[i].to_bits();
        }

        // k = n / 2: reference is the first half; the whole stream is replayed from empty
        let reference = TimeSeries::new(series.values.slice(s![..series.len() / 2, ..]).to_owned()).unwrap();
        let mut half = init_online(&reference, &online_config(w, seed)).unwrap();
        half.clear_buffer();
        let mut scored: Vec<(usize, f64)> = series
            .values
            .axis_chunks_iter(Axis(0), w)
            .enumerate()
            .filter_map(|(i, chunk)| half.online_step(chunk).ok().map(|s| (i, s)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut top: Vec<usize> = scored[..4].iter().map(|p| p.0).collect();
        top.sort_unstable();
        let boundary: Vec<usize> = labels.change_points.iter().map(|c| c / w).collect();
        peaks += (top == boundary) as usize;
        detail.push(format!("s{seed}:psi={},top4={top:?}", half.psi_star()));
    }
    let pass = identical && peaks >= 8;
    assert!(report(
        7,
        pass,
        format!(
            "k=n bit-identical for intervals >= 1: {identical}; k=n/2 top-4 at boundaries in {peaks}/10 [{}]",
            detail.join(" ")
        )
    ));
}

#[test]
fn criterion_08_scaling() {
    let _g = serial();
    let report_ = run_bench(&BenchConfig {
        repeats: 3,
        ..BenchConfig::default()
    }).unwrap();
    print!("{}", report_.table());
    let pass = report_.r_squared >= 0.98 && report_.max_doubling_factor <= 2.5 && report_.online_spread <= 2.0;
    assert!(report(
        8,
        pass,
        format!(
            "R^2 = {:.4}, worst doubling factor {:.3}, online per-step spread {:.3}",
            report_.r_squared, report_.max_doubling_factor, report_.online_spread
        )
    ));
}

/// Whether any threshold flags every boundary interval and no outlier-only interval.
fn separable(scores: &[f64], boundary: &[usize], outlier_only: &[usize]) -> bool {
    let lowest = boundary.iter().map(|&j| scores[j]).fold(f64::INFINITY, f64::min);
    let highest = outlier_only.iter().map(|&j| scores[j]).fold(f64::NEG_INFINITY, f64::max);
    lowest > highest
}

#[test]
fn criterion_09_gdk_contrast() {
    let _g = serial();
    let (mut gdk_misses, mut icid_hits) = (0, 0);
    for seed in SEEDS {
        let (series, labels) = gen_s1(seed);
        let (normalized, _) = minmax_normalize(&series);
        let (boundary, outlier_only) = s1_targets(&labels, 60);
        let gdk = score_series(normalized.view(), 60, 0, 200, seed, Scoring::GcidMmd { kernel: None }).unwrap();
        gdk_misses += !separable(&gdk.scores, &boundary, &outlier_only) as usize;
        icid_hits += !s1_offline(seed, InstabilityKind::ApproxEntropy).passing_alphas.is_empty() as usize;
    }
    let expected = gdk_misses >= 8 && icid_hits >= 8;
    let detail = format!("gcid_mmd inseparable in {gdk_misses}/10 seeds; icid succeeds in {icid_hits}/10");
    if !report(9, expected, &detail) {
        println!("warning: criterion 9 is bandwidth-sensitive and reported only as a warning");
    }
}

#[test]
fn criterion_10_threshold_and_selection_properties() {
    let _g = serial();
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let series = prop::collection::vec(0.0f64..1.0, 3..30);
    let monotone = runner.run(&(series.clone(), 0.0f64..3.0, 0.0f64..3.0), |(s, a, b)| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (t_lo, t_hi) = (threshold(&s, lo).unwrap(), threshold(&s, hi).unwrap());
        prop_assert!(t_lo <= t_hi);
        let strict = flag_intervals(&s, t_hi);
        let loose = flag_intervals(&s, t_lo);
        prop_assert!(strict.iter().all(|j| loose.contains(j)));
        Ok(())
    });
    let candidates = prop::collection::vec(series, 1..6);
    let selection = runner.run(&(candidates, 0usize..3, any::<bool>()), |(all, kind, tie)| {
        let measure = InstabilityMeasure::new(
            [InstabilityKind::ApproxEntropy, InstabilityKind::Variance, InstabilityKind::Gini][kind],
        );
        let mut cands: Vec<(usize, Vec<f64>)> = all
            .iter()
            .enumerate()
            .map(|(i, s)| (2usize << i, if tie { all[0].clone() } else { s.clone() }))
            .collect();
        let forward = icid::detector::select_from_series(&cands, &measure).unwrap();
        cands.reverse();
        prop_assert_eq!(forward, icid::detector::select_from_series(&cands, &measure).unwrap());
        if tie {
            prop_assert_eq!(forward, 2);
        }
        Ok(())
    });
    let pass = monotone.is_ok() && selection.is_ok();
    assert!(report(
        10,
        pass,
        format!("1000 cases each: threshold/flag monotonicity {monotone:?}, selection order and ties {selection:?}")
    ));
}
