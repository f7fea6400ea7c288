// SPDX-License-Identifier: MIT OR Apache-2.0

//! Evaluation against ground truth and score export.

use crate::data::Labels;
use crate::detector::{threshold, DetectionResult, PointScores};
use crate::error::{IcidError, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

/// For each change-point, whether some flagged interval `[j*w, (j+1)*w)` contains it.
pub fn interval_hits(flagged: &[usize], w: usize, labels: &Labels) -> Vec<bool> {
    labels
        .change_points
        .iter()
        .map(|&c| flagged.iter().any(|&j| j * w <= c && c < (j + 1) * w))
        .collect()
}

/// Time stamp reported for a flagged interval.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    #[default]
    Start,
    Mid,
    End,
}

impl Anchor {
    pub fn time(&self, interval: usize, w: usize) -> usize {
        match self {
            Self::Start => interval * w,
            Self::Mid => interval * w + w / 2,
            Self::End => (interval + 1) * w - 1,
        }
    }
}

impl FromStr for Anchor {
    type Err = IcidError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "start" => Ok(Self::Start),
            "mid" => Ok(Self::Mid),
            "end" => Ok(Self::End),
            other => Err(IcidError::invalid(format!(
                "unknown anchor {other:?} (expected start, mid or end)"
            ))),
        }
    }
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Start => "start",
            Self::Mid => "mid",
            Self::End => "end",
        })
    }
}

pub fn interval_detections(flagged: &[usize], w: usize, anchor: Anchor) -> Vec<usize> {
    flagged.iter().map(|&j| anchor.time(j, w)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub margin: usize,
    /// `(detection, label)` time indices of every true positive.
    pub matched_pairs: Vec<(usize, usize)>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Greedy one-to-one matching by increasing distance; matches within `margin` are hits.
pub fn f1_with_margin(detections: &[usize], labels: &[usize], margin: usize) -> EvalReport {
    let mut pairs: Vec<(usize, usize, usize, usize, usize)> = Vec::new();
    for (di, &d) in detections.iter().enumerate() {
        for (li, &l) in labels.iter().enumerate() {
            let dist = d.abs_diff(l);
            if dist <= margin {
                pairs.push((dist, d.min(l), d.max(l), di, li));
            }
        }
    }
    pairs.sort_unstable();
    let mut det_used = vec![false; detections.len()];
    let mut lab_used = vec![false; labels.len()];
    let mut matched_pairs = Vec::new();
    for (_, _, _, di, li) in pairs {
        if !det_used[di] && !lab_used[li] {
            det_used[di] = true;
            lab_used[li] = true;
            matched_pairs.push((detections[di], labels[li]));
        }
    }
    let tp = matched_pairs.len();
    let fp = detections.len() - tp;
    let fn_ = labels.len() - tp;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    matched_pairs.sort_unstable();
    EvalReport {
        tp,
        fp,
        fn_,
        precision,
        recall,
        f1,
        margin,
        matched_pairs,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Interval,
    Point,
}

/// Run metadata carried in every score file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreMetadata {
    pub kind: ScoreKind,
    pub threshold: f64,
    pub psi_star: Option<usize>,
    pub window: usize,
    pub alpha: f64,
    pub scoring: String,
    /// Full configuration echo of the run that produced the file.
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub index: usize,
    pub score: f64,
    pub flagged: bool,
}

/// Scores with metadata, in the shape written to csv and json.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreDocument {
    pub metadata: ScoreMetadata,
    pub rows: Vec<ScoreRow>,
}

impl ScoreDocument {
    pub fn from_detection(result: &DetectionResult, config: serde_json::Value) -> Self {
        let rows = result
            .series
            .scores
            .iter()
            .enumerate()
            .map(|(index, &score)| ScoreRow {
                index,
                score,
                flagged: result.flagged.binary_search(&index).is_ok(),
            })
            .collect();
        Self {
            metadata: ScoreMetadata {
                kind: ScoreKind::Interval,
                threshold: result.threshold,
                psi_star: result.psi_star,
                window: result.series.window,
                alpha: result.alpha,
                scoring: result.series.scoring.name().to_string(),
                config,
            },
            rows,
        }
    }

    /// Thresholds the scored span `[w, n - w)` of point scores at `mean + alpha * sigma`.
    pub fn from_points(points: &PointScores, alpha: f64, config: serde_json::Value) -> Result<Self> {
        let w = points.window;
        let n = points.scores.len();
        let inner = &points.scores[w..n - w];
        let tau = threshold(inner, alpha)?;
        let rows = points
            .scores
            .iter()
            .enumerate()
            .map(|(index, &score)| ScoreRow {
                index,
                score,
                flagged: (w..n - w).contains(&index) && score > tau,
            })
            .collect();
        Ok(Self {
            metadata: ScoreMetadata {
                kind: ScoreKind::Point,
                threshold: tau,
                psi_star: Some(points.psi),
                window: w,
                alpha,
                scoring: "icid".into(),
                config,
            },
            rows,
        })
    }

    pub fn flagged(&self) -> Vec<usize> {
        self.rows.iter().filter(|r| r.flagged).map(|r| r.index).collect()
    }

    /// Detection time stamps: anchored interval starts, or for point scores the
    /// peak of each run of consecutive flagged points.
    pub fn detections(&self, anchor: Anchor) -> Vec<usize> {
        match self.metadata.kind {
            ScoreKind::Interval => interval_detections(&self.flagged(), self.metadata.window, anchor),
            ScoreKind::Point => {
                let mut out = Vec::new();
                let mut run: Option<ScoreRow> = None;
                let mut last = None;
                for r in self.rows.iter().filter(|r| r.flagged) {
                    let contiguous = last.is_some_and(|l: usize| l + 1 == r.index);
                    match run {
                        Some(best) if contiguous => {
                            if r.score > best.score {
                                run = Some(*r);
                            }
                        }
                        Some(best) => {
                            out.push(best.index);
                            run = Some(*r);
                        }
                        None => run = Some(*r),
                    }
                    last = Some(r.index);
                }
                out.extend(run.map(|r| r.index));
                out
            }
        }
    }

    pub fn to_csv(&self) -> String {
        let m = &self.metadata;
        let kind = match m.kind {
            ScoreKind::Interval => "interval",
            ScoreKind::Point => "point",
        };
        let psi = m.psi_star.map_or("none".to_string(), |p| p.to_string());
        let mut out = format!(
            "# kind={kind},threshold={},psi_star={psi},window={},alpha={},scoring={}\n",
            m.threshold, m.window, m.alpha, m.scoring
        );
        out.push_str(&format!("# config={}\n", m.config));
        out.push_str("index,score,flagged\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.index, r.score, r.flagged as u8));
        }
        out
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let bad = |line: usize, message: String| IcidError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut meta: Option<ScoreMetadata> = None;
        let mut config = serde_json::Value::Null;
        let mut rows = Vec::new();
        let mut seen_header = false;
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# config=") {
                config = serde_json::from_str(rest).map_err(|e| bad(line_no, e.to_string()))?;
                continue;
            }
            if let Some(rest) = line.strip_prefix("# ") {
                meta = Some(parse_meta(rest).map_err(|m| bad(line_no, m))?);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            if !seen_header {
                if line != "index,score,flagged" {
                    return Err(bad(line_no, format!("expected header index,score,flagged, found {line:?}")));
                }
                seen_header = true;
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 3 {
                return Err(bad(line_no, format!("expected 3 fields, found {}", cells.len())));
            }
            let index = cells[0].parse().map_err(|_| bad(line_no, format!("bad index {:?}", cells[0])))?;
            let score = cells[1].parse().map_err(|_| bad(line_no, format!("bad score {:?}", cells[1])))?;
            let flagged = match cells[2] {
                "0" => false,
                "1" => true,
                other => return Err(bad(line_no, format!("bad flag {other:?}"))),
            };
            rows.push(ScoreRow {
                index,
                score,
                flagged,
            });
        }
        let mut metadata = meta.ok_or_else(|| bad(0, "missing metadata line".into()))?;
        metadata.config = config;
        Ok(Self { metadata, rows })
    }

    pub fn write(&self, path: &Path, format: ExportFormat) -> Result<()> {
        let text = match format {
            ExportFormat::Csv => self.to_csv(),
            ExportFormat::Json => {
                let mut s = serde_json::to_string_pretty(self)?;
                s.push('\n');
                s
            }
        };
        fs::write(path, text).map_err(|e| IcidError::io(path, e))
    }

    /// Reads a document written by [`ScoreDocument::write`], choosing the format by content.
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| IcidError::io(path, e))?;
        if text.trim_start().starts_with('{') {
            Ok(serde_json::from_str(&text)?)
        } else {
            Self::from_csv(&text, path)
        }
    }
}

fn parse_meta(text: &str) -> std::result::Result<ScoreMetadata, String> {
    let mut kind = None;
    let mut threshold = None;
    let mut psi_star = None;
    let mut window = None;
    let mut alpha = None;
    let mut scoring = None;
    for field in text.split(',') {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| format!("malformed metadata field {field:?}"))?;
        let num = |v: &str| v.parse::<f64>().map_err(|_| format!("bad number for {k}: {v:?}"));
        match k {
            "kind" => {
                kind = Some(match v {
                    "interval" => ScoreKind::Interval,
                    "point" => ScoreKind::Point,
                    _ => return Err(format!("unknown kind {v:?}")),
                })
            }
            "threshold" => threshold = Some(num(v)?),
            "psi_star" => {
                psi_star = Some(if v == "none" {
                    None
                } else {
                    Some(v.parse().map_err(|_| format!("bad psi_star {v:?}"))?)
                })
            }
            "window" => window = Some(v.parse().map_err(|_| format!("bad window {v:?}"))?),
            "alpha" => alpha = Some(num(v)?),
            "scoring" => scoring = Some(v.to_string()),
            _ => {}
        }
    }
    let missing = |name: &str| format!("metadata lacks {name}");
    Ok(ScoreMetadata {
        kind: kind.ok_or_else(|| missing("kind"))?,
        threshold: threshold.ok_or_else(|| missing("threshold"))?,
        psi_star: psi_star.ok_or_else(|| missing("psi_star"))?,
        window: window.ok_or_else(|| missing("window"))?,
        alpha: alpha.ok_or_else(|| missing("alpha"))?,
        scoring: scoring.ok_or_else(|| missing("scoring"))?,
        config: serde_json::Value::Null,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExportFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for ExportFormat {
    type Err = IcidError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(IcidError::invalid(format!("unknown format {other:?} (expected csv or json)"))),
        }
    }
}

/// Writes detection scores to `path`.
pub fn export_scores(
    result: &DetectionResult,
    path: &Path,
    format: ExportFormat,
    config: serde_json::Value,
) -> Result<()> {
    ScoreDocument::from_detection(result, config).write(path, format)
}
