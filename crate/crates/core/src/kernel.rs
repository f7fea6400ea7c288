// SPDX-License-Identifier: MIT OR Apache-2.0

//! Isolation Kernel built from random Voronoi partitionings.
//!
//! Each partitioning samples `psi` rows of the fitting data as cell centers.
//! A point falls into the cell of its nearest center (Euclidean distance,
//! ties to the lowest center index). Two points are similar in proportion to
//! the number of partitionings in which they share a cell.

use crate::error::{IcidError, Result};
use ndarray::ArrayView2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Number of partitionings used when the caller does not choose one.
pub const DEFAULT_T: usize = 200;

/// One Voronoi diagram: `psi` centers stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Partitioning {
    centers: Vec<f64>,
    psi: usize,
    dim: usize,
    index: usize,
}

impl Partitioning {
    /// Builds a partitioning from explicit centers. All rows must share `dim`.
    pub fn from_centers(centers: &[Vec<f64>], index: usize) -> Result<Self> {
        let first = centers.first().ok_or_else(|| IcidError::invalid("psi must be >= 1"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(IcidError::invalid("centers must have dimension >= 1"));
        }
        let mut flat = Vec::with_capacity(centers.len() * dim);
        for c in centers {
            if c.len() != dim {
                return Err(IcidError::DimensionMismatch {
                    expected: dim,
                    got: c.len(),
                });
            }
            flat.extend_from_slice(c);
        }
        Ok(Self {
            centers: flat,
            psi: centers.len(),
            dim,
            index,
        })
    }

    pub fn psi(&self) -> usize {
        self.psi
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Ordinal of this partitioning inside its model.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn center(&self, j: usize) -> &[f64] {
        &self.centers[j * self.dim..(j + 1) * self.dim]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.centers.chunks_exact(self.dim)
    }

    /// Nearest center to `x`; the first (lowest-index) center wins ties.
    pub fn assign_cell(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(IcidError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.nearest(x))
    }

    #[inline]
    pub(crate) fn nearest(&self, x: &[f64]) -> usize {
        if self.dim == 1 {
            let v = x[0];
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, &c) in self.centers.iter().enumerate() {
                let d = (v - c) * (v - c);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            return best;
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, c) in self.centers.chunks_exact(self.dim).enumerate() {
            let d: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        best
    }
}

/// Samples `psi` distinct rows of `data` uniformly without replacement.
pub fn sample_partitioning<R: Rng + ?Sized>(
    data: ArrayView2<'_, f64>,
    psi: usize,
    rng: &mut R,
) -> Result<Partitioning> {
    sample_partitioning_indexed(data, psi, 0, rng)
}

fn sample_partitioning_indexed<R: Rng + ?Sized>(
    data: ArrayView2<'_, f64>,
    psi: usize,
    index: usize,
    rng: &mut R,
) -> Result<Partitioning> {
    let (n, dim) = data.dim();
    if psi == 0 {
        return Err(IcidError::invalid("psi must be >= 1"));
    }
    if dim == 0 {
        return Err(IcidError::invalid("data must have dimension >= 1"));
    }
    if psi > n {
        return Err(IcidError::InsufficientData { psi, available: n });
    }
    let rows = rand::seq::index::sample(rng, n, psi);
    let mut centers = Vec::with_capacity(psi * dim);
    for r in rows.iter() {
        centers.extend(data.row(r).iter().copied());
    }
    Ok(Partitioning {
        centers,
        psi,
        dim,
        index,
    })
}

/// RNG for partitioning `index` of a model seeded with `seed`.
///
/// Every partitioning reads its own ChaCha stream, so partitionings can be
/// built in any order and still reproduce.
pub fn partition_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// A fitted Isolation Kernel: `t` partitionings of `psi` cells each.
#[derive(Clone, Debug, PartialEq)]
pub struct IsolationModel {
    partitionings: Vec<Partitioning>,
    psi: usize,
    t: usize,
    dim: usize,
    seed: u64,
}

impl IsolationModel {
    /// Builds `t` independent partitionings from subsamples of `data`.
    pub fn build(data: ArrayView2<'_, f64>, psi: usize, t: usize, seed: u64) -> Result<Self> {
        if t == 0 {
            return Err(IcidError::invalid("t must be >= 1"));
        }
        let partitionings = (0..t)
            .into_par_iter()
            .map(|i| sample_partitioning_indexed(data, psi, i, &mut partition_rng(seed, i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            partitionings,
            psi,
            t,
            dim: data.ncols(),
            seed,
        })
    }

    /// Assembles a model from prebuilt partitionings.
    pub fn from_partitionings(partitionings: Vec<Partitioning>, seed: u64) -> Result<Self> {
        let first = partitionings
            .first()
            .ok_or_else(|| IcidError::invalid("t must be >= 1"))?;
        let (psi, dim) = (first.psi, first.dim);
        if let Some(bad) = partitionings.iter().find(|p| p.psi != psi || p.dim != dim) {
            return Err(IcidError::invalid(format!(
                "partitioning {} has psi = {}, dim = {}; expected psi = {psi}, dim = {dim}",
                bad.index, bad.psi, bad.dim
            )));
        }
        Ok(Self {
            t: partitionings.len(),
            partitionings,
            psi,
            dim,
            seed,
        })
    }

    pub fn psi(&self) -> usize {
        self.psi
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn partitionings(&self) -> &[Partitioning] {
        &self.partitionings
    }

    /// Length of the implied binary feature vector.
    pub fn feature_len(&self) -> usize {
        self.t * self.psi
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(IcidError::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    pub fn feature_map(&self, x: &[f64]) -> Result<PointFeature> {
        self.check_dim(x.len())?;
        Ok(PointFeature {
            cells: self
                .partitionings
                .iter()
                .map(|p| p.nearest(x) as u32)
                .collect(),
            psi: self.psi,
        })
    }

    /// Adds the feature vector of `x` into per-cell counts of length `t * psi`.
    /// Caller guarantees the dimension.
    #[inline]
    pub(crate) fn accumulate(&self, x: &[f64], counts: &mut [u32]) {
        for (i, p) in self.partitionings.iter().enumerate() {
            counts[i * self.psi + p.nearest(x)] += 1;
        }
    }

    /// Fraction of partitionings in which `x` and `y` share a cell.
    pub fn point_kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let fx = self.feature_map(x)?;
        let fy = self.feature_map(y)?;
        Ok(fx.dot(&fy) as f64 / self.t as f64)
    }
}

/// Active cell per partitioning; the sparse form of a `{0,1}^(t*psi)` vector
/// with exactly `t` ones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointFeature {
    cells: Vec<u32>,
    psi: usize,
}

impl PointFeature {
    pub fn active_cells(&self) -> &[u32] {
        &self.cells
    }

    pub fn t(&self) -> usize {
        self.cells.len()
    }

    /// Inner product of the two binary vectors.
    pub fn dot(&self, other: &PointFeature) -> usize {
        self.cells
            .iter()
            .zip(&other.cells)
            .filter(|(a, b)| a == b)
            .count()
    }

    /// Dense binary vector of length `t * psi`.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.cells.len() * self.psi];
        for (i, &c) in self.cells.iter().enumerate() {
            v[i * self.psi + c as usize] = 1.0;
        }
        v
    }
}
