// SPDX-License-Identifier: MIT OR Apache-2.0

//! Distributional similarity between intervals.
//!
//! Isolation embeddings keep per-cell integer counts, so every inner product
//! on the isolation path is exact and independent of row order.

use crate::error::{IcidError, Result};
use crate::kernel::IsolationModel;
use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Points drawn for the median bandwidth heuristic.
pub const MEDIAN_HEURISTIC_SAMPLE: usize = 500;

const MMD_TOLERANCE: f64 = 1e-9;

/// Kernel mean embedding of one interval under an isolation model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalEmbedding {
    counts: Vec<u32>,
    count: usize,
    psi: usize,
}

impl IntervalEmbedding {
    pub(crate) fn zeroed(model: &IsolationModel) -> Self {
        Self {
            counts: vec![0; model.feature_len()],
            count: 0,
            psi: model.psi(),
        }
    }

    pub(crate) fn add_point(&mut self, model: &IsolationModel, x: &[f64]) {
        model.accumulate(x, &mut self.counts);
        self.count += 1;
    }

    /// Number of points averaged.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Points of the interval per cell, laid out partitioning by partitioning.
    pub fn cell_counts(&self) -> &[u32] {
        &self.counts
    }

    /// The mean feature vector, length `t * psi`.
    pub fn mean_feature(&self) -> Vec<f64> {
        let w = self.count as f64;
        self.counts.iter().map(|&c| c as f64 / w).collect()
    }

    pub fn t(&self) -> usize {
        self.counts.len() / self.psi
    }

    fn count_dot(&self, other: &Self) -> u64 {
        self.counts
            .iter()
            .zip(&other.counts)
            .map(|(&a, &b)| a as u64 * b as u64)
            .sum()
    }

    /// Cosine similarity of two embeddings.
    pub fn cosine(&self, other: &Self) -> f64 {
        let xy = self.count_dot(other) as f64;
        let xx = self.count_dot(self) as f64;
        let yy = other.count_dot(other) as f64;
        (xy / (xx * yy).sqrt()).min(1.0)
    }

    /// `(1/t) <mean_x, mean_y>`, the unnormalized distributional kernel.
    pub fn kernel(&self, other: &Self) -> f64 {
        self.count_dot(other) as f64
            / (self.t() as f64 * self.count as f64 * other.count as f64)
    }
}

pub fn embed_interval(model: &IsolationModel, interval: ArrayView2<'_, f64>) -> Result<IntervalEmbedding> {
    if interval.nrows() == 0 {
        return Err(IcidError::EmptyInterval);
    }
    model.check_dim(interval.ncols())?;
    let rows = interval.as_standard_layout();
    let flat = rows.as_slice().expect("standard layout is contiguous");
    Ok(embed_rows(model, flat.chunks_exact(interval.ncols())))
}

pub(crate) fn embed_rows<'r>(
    model: &IsolationModel,
    rows: impl Iterator<Item = &'r [f64]>,
) -> IntervalEmbedding {
    let mut emb = IntervalEmbedding::zeroed(model);
    for row in rows {
        emb.add_point(model, row);
    }
    emb
}

/// Normalized Isolation Distributional Kernel similarity, in `[0, 1]`.
pub fn idk_similarity(
    model: &IsolationModel,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
) -> Result<f64> {
    Ok(embed_interval(model, x)?.cosine(&embed_interval(model, y)?))
}

/// Point kernels usable inside the mean-embedding construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PointKernelSpec {
    /// `exp(-gamma * |x - y|^2)`
    Gaussian { gamma: f64 },
    /// `exp(-gamma * |x - y|_1)`
    Laplacian { gamma: f64 },
    /// `exp(-gamma * sum (x_i - y_i)^2 / (x_i + y_i))`, nonnegative inputs only.
    Chi2 { gamma: f64 },
    /// `(gamma * <x, y> + coef0)^degree`
    Polynomial { gamma: f64, coef0: f64, degree: u32 },
    /// `tanh(gamma * <x, y> + coef0)`; not positive definite.
    Sigmoid { gamma: f64, coef0: f64 },
}

impl PointKernelSpec {
    pub fn family(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::Laplacian { .. } => "laplacian",
            Self::Chi2 { .. } => "chi2",
            Self::Polynomial { .. } => "polynomial",
            Self::Sigmoid { .. } => "sigmoid",
        }
    }

    fn gamma(&self) -> f64 {
        match *self {
            Self::Gaussian { gamma }
            | Self::Laplacian { gamma }
            | Self::Chi2 { gamma }
            | Self::Polynomial { gamma, .. }
            | Self::Sigmoid { gamma, .. } => gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let gamma = self.gamma();
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(IcidError::invalid(format!(
                "{} kernel gamma must be finite and > 0; got {gamma}",
                self.family()
            )));
        }
        match *self {
            Self::Polynomial { degree, coef0, .. } => {
                if degree < 1 {
                    return Err(IcidError::invalid("polynomial degree must be >= 1; got 0"));
                }
                if !coef0.is_finite() {
                    return Err(IcidError::invalid("polynomial coef0 must be finite"));
                }
            }
            Self::Sigmoid { coef0, .. } if !coef0.is_finite() => {
                return Err(IcidError::invalid("sigmoid coef0 must be finite"));
            }
            _ => {}
        }
        Ok(())
    }

    fn check_inputs(&self, interval: ArrayView2<'_, f64>) -> Result<()> {
        if matches!(self, Self::Chi2 { .. }) && interval.iter().any(|&v| v < 0.0) {
            return Err(IcidError::invalid("chi2 kernel requires nonnegative inputs"));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let dot = || x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        match *self {
            Self::Gaussian { gamma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
            Self::Laplacian { gamma } => {
                let d1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
                (-gamma * d1).exp()
            }
            Self::Chi2 { gamma } => {
                let s: f64 = x
                    .iter()
                    .zip(y)
                    .filter(|(a, b)| *a + *b > 0.0)
                    .map(|(a, b)| (a - b) * (a - b) / (a + b))
                    .sum();
                (-gamma * s).exp()
            }
            Self::Polynomial {
                gamma,
                coef0,
                degree,
            } => (gamma * dot() + coef0).powi(degree as i32),
            Self::Sigmoid { gamma, coef0 } => (gamma * dot() + coef0).tanh(),
        }
    }

    /// Gaussian kernel whose bandwidth follows the median heuristic:
    /// `gamma = 1 / (2 * median^2)` over pairwise distances of up to
    /// [`MEDIAN_HEURISTIC_SAMPLE`] rows of `data`.
    pub fn gaussian_median_heuristic(data: ArrayView2<'_, f64>, seed: u64) -> Result<Self> {
        let n = data.nrows();
        if n < 2 {
            return Err(IcidError::SeriesTooShort(
                "median heuristic needs at least 2 rows".into(),
            ));
        }
        let rows: Vec<usize> = if n > MEDIAN_HEURISTIC_SAMPLE {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, n, MEDIAN_HEURISTIC_SAMPLE).into_vec();
            idx.sort_unstable();
            idx
        } else {
            (0..n).collect()
        };
        let mut dists = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
        for (a, &i) in rows.iter().enumerate() {
            for &j in &rows[a + 1..] {
                let d2: f64 = data
                    .row(i)
                    .iter()
                    .zip(data.row(j).iter())
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum();
                if d2 > 0.0 {
                    dists.push(d2.sqrt());
                }
            }
        }
        // all rows coincide: any bandwidth gives a constant kernel
        if dists.is_empty() {
            return Ok(Self::Gaussian { gamma: 1.0 });
        }
        let mid = dists.len() / 2;
        let (_, median, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
        Ok(Self::Gaussian {
            gamma: 1.0 / (2.0 * *median * *median),
        })
    }
}

/// Mean of the point kernel over all cross pairs.
pub fn point_kernel_mean(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    spec: &PointKernelSpec,
) -> Result<f64> {
    spec.validate()?;
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(IcidError::EmptyInterval);
    }
    if x.ncols() != y.ncols() {
        return Err(IcidError::DimensionMismatch {
            expected: x.ncols(),
            got: y.ncols(),
        });
    }
    spec.check_inputs(x)?;
    spec.check_inputs(y)?;
    let xs: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let ys: Vec<Vec<f64>> = y.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut total = 0.0;
    for a in &xs {
        for b in &ys {
            total += spec.eval(a, b);
        }
    }
    Ok(total / (xs.len() * ys.len()) as f64)
}

/// Distributional kernel similarity with a point kernel, cosine-normalized.
pub fn gdk_similarity(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    spec: &PointKernelSpec,
) -> Result<f64> {
    let xy = point_kernel_mean(x, y, spec)?;
    let xx = point_kernel_mean(x, x, spec)?;
    let yy = point_kernel_mean(y, y, spec)?;
    let denom = xx * yy;
    if denom <= 0.0 {
        return Err(IcidError::invalid(format!(
            "{} kernel self-similarity is not positive on these intervals",
            spec.family()
        )));
    }
    Ok(xy / denom.sqrt())
}

/// Kernel used by [`mmd_squared`].
#[derive(Clone, Copy, Debug)]
pub enum DistributionKernel<'a> {
    Isolation(&'a IsolationModel),
    Point(&'a PointKernelSpec),
}

/// Squared maximum mean discrepancy, `K(X,X) + K(Y,Y) - 2 K(X,Y)`.
pub fn mmd_squared(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    kernel: DistributionKernel<'_>,
) -> Result<f64> {
    match kernel {
        DistributionKernel::Isolation(model) => {
            let ex = embed_interval(model, x)?;
            let ey = embed_interval(model, y)?;
            Ok(isolation_mmd(&ex, &ey))
        }
        DistributionKernel::Point(spec) => {
            let raw = point_kernel_mean(x, x, spec)? + point_kernel_mean(y, y, spec)?
                - 2.0 * point_kernel_mean(x, y, spec)?;
            Ok(finish_mmd(raw, spec))
        }
    }
}

pub(crate) fn isolation_mmd(ex: &IntervalEmbedding, ey: &IntervalEmbedding) -> f64 {
    (ex.kernel(ex) + ey.kernel(ey) - 2.0 * ex.kernel(ey)).max(0.0)
}

pub(crate) fn finish_mmd(raw: f64, spec: &PointKernelSpec) -> f64 {
    if raw >= 0.0 {
        return raw;
    }
    if matches!(spec, PointKernelSpec::Sigmoid { .. }) {
        log::warn!("sigmoid kernel produced negative MMD^2 = {raw}; reported unclamped");
        return raw;
    }
    if raw < -MMD_TOLERANCE {
        log::warn!("{} kernel MMD^2 = {raw} below tolerance; clamped to 0", spec.family());
    }
    0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, s, Array2};
    use rand::Rng;

    fn random(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.random::<f64>())
    }

    /// Unnormalized IDK as the pairwise mean of indicator co-occurrence.
    fn pairwise_idk(m: &IsolationModel, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
        let mut total = 0.0;
        for a in x.rows() {
            for b in y.rows() {
                let a = a.to_vec();
                let b = b.to_vec();
                let same = m
                    .partitionings()
                    .iter()
                    .filter(|p| p.assign_cell(&a).unwrap() == p.assign_cell(&b).unwrap())
                    .count();
                total += same as f64 / m.t() as f64;
            }
        }
        total / (x.nrows() * y.nrows()) as f64
    }

    #[test]
    fn single_point_embedding_is_its_feature() {
        let data = random(30, 2, 1);
        let m = IsolationModel::build(data.view(), 4, 6, 2).unwrap();
        let e = embed_interval(&m, data.slice(s![3..4, ..])).unwrap();
        let f = m.feature_map(&data.row(3).to_vec()).unwrap();
        assert_eq!(e.mean_feature(), f.to_dense());
        assert_eq!(e.count(), 1);
    }

    #[test]
    fn two_point_embedding_by_hand() {
        let p0 = crate::kernel::Partitioning::from_centers(&[vec![0.0], vec![1.0]], 0).unwrap();
        let p1 = crate::kernel::Partitioning::from_centers(&[vec![0.0], vec![0.2]], 1).unwrap();
        let m = IsolationModel::from_partitionings(vec![p0, p1], 0).unwrap();
        // 0.3 and 0.45 share cell 0 in p0; in p1 both are nearest 0.2 -> cell 1
        let same = embed_interval(&m, array![[0.3], [0.45]].view()).unwrap();
        assert_eq!(same.mean_feature(), vec![1.0, 0.0, 0.0, 1.0]);
        // 0.05 -> p0 cell 0, p1 cell 0; 0.3 -> p0 cell 0, p1 cell 1
        let split = embed_interval(&m, array![[0.05], [0.3]].view()).unwrap();
        assert_eq!(split.mean_feature(), vec![1.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn empty_interval_is_rejected() {
        let data = random(10, 1, 0);
        let m = IsolationModel::build(data.view(), 2, 3, 0).unwrap();
        assert!(matches!(
            embed_interval(&m, data.slice(s![0..0, ..])),
            Err(IcidError::EmptyInterval)
        ));
    }

    #[test]
    fn idk_matches_pairwise_form() {
        let data = random(60, 2, 3);
        let m = IsolationModel::build(data.view(), 4, 25, 8).unwrap();
        let x = data.slice(s![0..3, ..]).to_owned();
        let y = data.slice(s![10..13, ..]).to_owned();
        let want = pairwise_idk(&m, &x, &y)
            / (pairwise_idk(&m, &x, &x) * pairwise_idk(&m, &y, &y)).sqrt();
        let got = idk_similarity(&m, x.view(), y.view()).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        let ex = embed_interval(&m, x.view()).unwrap();
        let ey = embed_interval(&m, y.view()).unwrap();
        assert!((ex.kernel(&ey) - pairwise_idk(&m, &x, &y)).abs() < 1e-12);
        assert_eq!(idk_similarity(&m, x.view(), x.view()).unwrap(), 1.0);
    }

    #[test]
    fn psi_one_makes_everything_identical() {
        let data = random(20, 2, 4);
        let m = IsolationModel::build(data.view(), 1, 10, 0).unwrap();
        let sim = idk_similarity(&m, data.slice(s![0..5, ..]), data.slice(s![5..20, ..])).unwrap();
        assert_eq!(sim, 1.0);
    }

    #[test]
    fn gdk_examples() {
        let spec = PointKernelSpec::Gaussian { gamma: 1.0 };
        let x = array![[0.0], [1.0]];
        let y = array![[0.5], [2.0]];
        assert!((gdk_similarity(x.view(), x.view(), &spec).unwrap() - 1.0).abs() < 1e-15);

        let k = |a: f64, b: f64| (-(a - b) * (a - b)).exp();
        let kxy = (k(0.0, 0.5) + k(0.0, 2.0) + k(1.0, 0.5) + k(1.0, 2.0)) / 4.0;
        let kxx = (1.0 + 2.0 * k(0.0, 1.0) + 1.0) / 4.0;
        let kyy = (1.0 + 2.0 * k(0.5, 2.0) + 1.0) / 4.0;
        let got = gdk_similarity(x.view(), y.view(), &spec).unwrap();
        assert!((got - kxy / (kxx * kyy).sqrt()).abs() < 1e-12);

        let mmd = mmd_squared(x.view(), y.view(), DistributionKernel::Point(&spec)).unwrap();
        assert!((mmd - (kxx + kyy - 2.0 * kxy)).abs() < 1e-12);

        let wide = PointKernelSpec::Gaussian { gamma: 1e-12 };
        assert!((gdk_similarity(x.view(), y.view(), &wide).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_kernel_parameters() {
        let x = array![[0.1], [0.2]];
        for spec in [
            PointKernelSpec::Gaussian { gamma: 0.0 },
            PointKernelSpec::Laplacian { gamma: -1.0 },
            PointKernelSpec::Polynomial {
                gamma: 1.0,
                coef0: 1.0,
                degree: 0,
            },
            PointKernelSpec::Sigmoid {
                gamma: f64::NAN,
                coef0: 0.0,
            },
        ] {
            assert!(gdk_similarity(x.view(), x.view(), &spec).is_err(), "{spec:?}");
        }
        let neg = array![[-0.1], [0.2]];
        assert!(gdk_similarity(neg.view(), x.view(), &PointKernelSpec::Chi2 { gamma: 1.0 }).is_err());
    }

    #[test]
    fn every_family_is_self_similar() {
        let x = random(8, 2, 5);
        let y = random(8, 2, 6);
        for spec in [
            PointKernelSpec::Gaussian { gamma: 2.0 },
            PointKernelSpec::Laplacian { gamma: 2.0 },
            PointKernelSpec::Chi2 { gamma: 1.0 },
            PointKernelSpec::Polynomial {
                gamma: 1.0,
                coef0: 1.0,
                degree: 3,
            },
            PointKernelSpec::Sigmoid {
                gamma: 0.5,
                coef0: 0.1,
            },
        ] {
            let s = gdk_similarity(x.view(), x.view(), &spec).unwrap();
            assert!((s - 1.0).abs() < 1e-12, "{}", spec.family());
            let xy = gdk_similarity(x.view(), y.view(), &spec).unwrap();
            let yx = gdk_similarity(y.view(), x.view(), &spec).unwrap();
            assert!((xy - yx).abs() < 1e-12);
        }
    }

    #[test]
    fn isolation_mmd_extremes() {
        let p = crate::kernel::Partitioning::from_centers(&[vec![0.0], vec![1.0]], 0).unwrap();
        let m = IsolationModel::from_partitionings(vec![p.clone(), p.clone(), p], 0).unwrap();
        let x = array![[0.0]];
        let y = array![[1.0]];
        let k = DistributionKernel::Isolation(&m);
        assert_eq!(mmd_squared(x.view(), y.view(), k).unwrap(), 2.0);
        assert_eq!(mmd_squared(x.view(), x.view(), k).unwrap(), 0.0);
    }

    #[test]
    fn median_heuristic_bandwidth() {
        // pairwise distances 1, 2, 3 -> median 2
        let data = array![[0.0], [1.0], [3.0]];
        let spec = PointKernelSpec::gaussian_median_heuristic(data.view(), 0).unwrap();
        assert_eq!(spec, PointKernelSpec::Gaussian { gamma: 1.0 / 8.0 });
        let flat = array![[2.0], [2.0]];
        assert_eq!(
            PointKernelSpec::gaussian_median_heuristic(flat.view(), 0).unwrap(),
            PointKernelSpec::Gaussian { gamma: 1.0 }
        );
    }

    #[test]
    fn sigmoid_mmd_is_not_clamped() {
        let spec = PointKernelSpec::Sigmoid {
            gamma: 1.0,
            coef0: -2.0,
        };
        assert_eq!(finish_mmd(-0.5, &spec), -0.5);
        assert_eq!(finish_mmd(-0.5, &PointKernelSpec::Gaussian { gamma: 1.0 }), 0.0);
    }
}
