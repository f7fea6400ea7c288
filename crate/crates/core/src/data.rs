// SPDX-License-Identifier: MIT OR Apache-2.0

//! Stream ingestion, min-max normalization, labels and synthetic streams.

use crate::error::{IcidError, Result};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

/// An `n x d` stream in time order.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub values: Array2<f64>,
    pub names: Option<Vec<String>>,
}

impl TimeSeries {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(IcidError::invalid("time series must have n >= 1 and d >= 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(IcidError::invalid("time series contains non-finite values"));
        }
        Ok(Self {
            values,
            names: None,
        })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    /// Keeps only column `j`.
    pub fn column(&self, j: usize) -> Result<TimeSeries> {
        if j >= self.dim() {
            return Err(IcidError::DimensionMismatch {
                expected: self.dim(),
                got: j + 1,
            });
        }
        let values = self.values.column(j).to_owned().insert_axis(ndarray::Axis(1));
        Ok(TimeSeries {
            values,
            names: self.names.as_ref().map(|n| vec![n[j].clone()]),
        })
    }

    /// Writes the series as CSV, with a header row if names are set.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        if let Some(names) = &self.names {
            out.push_str(&names.join(","));
            out.push('\n');
        }
        for row in self.values.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| IcidError::io(path, e))
    }
}

/// Reads a numeric CSV. A first row with no numeric cells is taken as a header.
/// Lines starting with `#` are ignored.
pub fn load_csv(path: &Path) -> Result<TimeSeries> {
    let text = fs::read_to_string(path).map_err(|e| IcidError::io(path, e))?;
    parse_csv(&text, path)
}

pub(crate) fn parse_csv(text: &str, path: &Path) -> Result<TimeSeries> {
    let parse_err = |line: usize, message: String| IcidError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut names = None;
    let mut width = None;
    let mut flat = Vec::new();
    let mut rows = 0;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if k == 0 && record.iter().all(|c| c.parse::<f64>().is_err()) {
            names = Some(record.iter().map(str::to_string).collect::<Vec<_>>());
            width = Some(record.len());
            continue;
        }
        match width {
            Some(w) if w != record.len() => {
                return Err(parse_err(
                    line,
                    format!("expected {w} columns, found {}", record.len()),
                ));
            }
            None => width = Some(record.len()),
            _ => {}
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(line, format!("column {}: non-numeric value {cell:?}", col + 1))
            })?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {}: non-finite value {cell:?}", col + 1)));
            }
            flat.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(parse_err(0, "no numeric rows".into()));
    }
    let d = width.unwrap_or(0);
    let values = Array2::from_shape_vec((rows, d), flat).expect("rows have uniform width");
    Ok(TimeSeries { values, names })
}

/// Per-dimension range captured from fitting data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormParams {
    pub fn fit(values: ArrayView2<'_, f64>) -> Self {
        let d = values.ncols();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in values.rows() {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Self { min, max }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    #[inline]
    fn map(&self, j: usize, v: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range <= 0.0 {
            return 0.0;
        }
        ((v - self.min[j]) / range).clamp(0.0, 1.0)
    }
}

/// Maps every dimension onto `[0, 1]`; constant dimensions map to 0.
pub fn minmax_normalize(series: &TimeSeries) -> (TimeSeries, NormParams) {
    let params = NormParams::fit(series.view());
    let values = apply_norm(&params, series.view()).expect("params fitted on this series");
    (
        TimeSeries {
            values,
            names: series.names.clone(),
        },
        params,
    )
}

/// Applies a fitted map to new points, clamping into `[0, 1]`.
pub fn apply_norm(params: &NormParams, points: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if points.ncols() != params.dim() {
        return Err(IcidError::DimensionMismatch {
            expected: params.dim(),
            got: points.ncols(),
        });
    }
    let mut out = points.to_owned();
    for mut row in out.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = params.map(j, *v);
        }
    }
    Ok(out)
}

/// Ground-truth events of a stream.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub change_points: Vec<usize>,
    pub outliers: Vec<usize>,
}

impl Labels {
    pub fn new(mut change_points: Vec<usize>, mut outliers: Vec<usize>) -> Result<Self> {
        change_points.sort_unstable();
        change_points.dedup();
        outliers.sort_unstable();
        outliers.dedup();
        if let Some(both) = change_points.iter().find(|c| outliers.binary_search(c).is_ok()) {
            return Err(IcidError::invalid(format!(
                "index {both} is labeled both change-point and outlier"
            )));
        }
        Ok(Self {
            change_points,
            outliers,
        })
    }

    /// Checks every index against a stream of length `n`.
    pub fn check_len(&self, n: usize) -> Result<()> {
        match self.change_points.iter().chain(&self.outliers).find(|&&i| i >= n) {
            Some(i) => Err(IcidError::invalid(format!(
                "label index {i} outside stream of length {n}"
            ))),
            None => Ok(()),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| IcidError::io(path, e))?;
        let mut out = String::new();
        for c in &self.change_points {
            out.push_str(&format!("{c}\n"));
        }
        for o in &self.outliers {
            out.push_str(&format!("{o} o\n"));
        }
        f.write_all(out.as_bytes()).map_err(|e| IcidError::io(path, e))
    }
}

/// One index per line; a trailing `o` marks an outlier.
pub fn load_labels(path: &Path) -> Result<Labels> {
    let text = fs::read_to_string(path).map_err(|e| IcidError::io(path, e))?;
    parse_labels(&text, path)
}

pub(crate) fn parse_labels(text: &str, path: &Path) -> Result<Labels> {
    let mut change_points = Vec::new();
    let mut outliers = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let bad = |message: String| IcidError::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            message,
        };
        let idx: usize = parts
            .next()
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| bad(format!("expected a nonnegative index, found {line:?}")))?;
        match (parts.next(), parts.next()) {
            (None, _) => change_points.push(idx),
            (Some("o"), None) => outliers.push(idx),
            _ => return Err(bad(format!("unexpected suffix in {line:?}"))),
        }
    }
    Labels::new(change_points, outliers)
}

pub const S1_BLOCK_LEN: usize = 300;
pub const S1_SCALES: [f64; 5] = [1.0, 2.2, 4.3, 48.3, 28.3];
pub const S1_OUTLIERS: [usize; 5] = [89, 117, 139, 523, 537];
/// Outlier distance from the block mean, in block standard deviations.
pub const S1_OUTLIER_SIGMAS: f64 = 6.0;

pub const S2_BLOCK_LEN: usize = 1000;
pub const S2_COVARIANCES: [[[f64; 2]; 2]; 3] = [
    [[0.9, 0.4], [0.4, 0.2]],
    [[0.5, 0.5], [0.5, 0.5]],
    [[0.9, 0.1], [0.1, 0.9]],
];

/// Five zero-mean Gaussian blocks of 300 points with growing scale, plus five outliers.
pub fn gen_s1(seed: u64) -> (TimeSeries, Labels) {
    gen_s1_blocks(S1_BLOCK_LEN, seed)
}

/// S1 with `block_len` points per block. Outlier positions scale with the block.
pub fn gen_s1_blocks(block_len: usize, seed: u64) -> (TimeSeries, Labels) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = block_len * S1_SCALES.len();
    let mut values = Array2::zeros((n, 1));
    for (b, &sigma) in S1_SCALES.iter().enumerate() {
        for i in 0..block_len {
            let z: f64 = rng.sample(StandardNormal);
            values[[b * block_len + i, 0]] = sigma * z;
        }
    }
    let outliers: Vec<usize> = S1_OUTLIERS
        .iter()
        .map(|&o| o * block_len / S1_BLOCK_LEN)
        .collect();
    for &o in &outliers {
        let sigma = S1_SCALES[o / block_len];
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        values[[o, 0]] = sign * S1_OUTLIER_SIGMAS * sigma;
    }
    let change_points = (1..S1_SCALES.len()).map(|b| b * block_len).collect();
    let series = TimeSeries {
        values,
        names: Some(vec!["value".into()]),
    };
    (series, Labels::new(change_points, outliers).expect("disjoint"))
}

/// Three zero-mean bivariate Gaussian blocks of 1000 points with different covariances.
pub fn gen_s2(seed: u64) -> (TimeSeries, Labels) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = S2_BLOCK_LEN * S2_COVARIANCES.len();
    let mut values = Array2::zeros((n, 2));
    for (b, cov) in S2_COVARIANCES.iter().enumerate() {
        let l = cholesky2(cov);
        for i in 0..S2_BLOCK_LEN {
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = rng.sample(StandardNormal);
            let r = b * S2_BLOCK_LEN + i;
            values[[r, 0]] = l[0][0] * z0;
            values[[r, 1]] = l[1][0] * z0 + l[1][1] * z1;
        }
    }
    let series = TimeSeries {
        values,
        names: Some(vec!["x1".into(), "x2".into()]),
    };
    let labels = Labels::new(vec![S2_BLOCK_LEN, 2 * S2_BLOCK_LEN], vec![]).expect("disjoint");
    (series, labels)
}

/// Lower Cholesky factor of a 2x2 PSD matrix; a zero pivot is allowed.
fn cholesky2(c: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let l00 = c[0][0].sqrt();
    let l10 = if l00 > 0.0 { c[1][0] / l00 } else { 0.0 };
    let l11 = (c[1][1] - l10 * l10).max(0.0).sqrt();
    [[l00, 0.0], [l10, l11]]
}
