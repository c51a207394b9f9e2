//! OTB-style sequence loading and one-pass evaluation metrics.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::BoundingBox;

/// Center-error thresholds: 0..=50 pixels.
pub const PRECISION_MAX: usize = 50;
/// Overlap thresholds: `i / SUCCESS_STEPS` for `i = 0..=SUCCESS_STEPS`.
pub const SUCCESS_STEPS: usize = 20;
/// Threshold at which distance precision is reported.
pub const DP_THRESHOLD: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub name: String,
    pub frame_paths: Vec<PathBuf>,
    pub groundtruth: Vec<BoundingBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCurve {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
}

impl MetricCurve {
    pub fn new(thresholds: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if thresholds.len() != values.len() {
            return Err(Error::invalid("curve thresholds and values differ in length"));
        }
        if thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("curve thresholds must ascend"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("curve values must lie in [0, 1]"));
        }
        Ok(MetricCurve { thresholds, values })
    }

    /// Value at an exact threshold, if present.
    pub fn at(&self, threshold: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|&t| t == threshold)
            .map(|i| self.values[i])
    }
}

/// Parse one ground-truth line. OTB boxes are 1-indexed.
fn parse_gt_line(line: &str, lineno: usize) -> Result<BoundingBox> {
    let fields: Vec<&str> = line
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect();
    let bad = || Error::Format(format!("groundtruth line {lineno}: expected x,y,w,h, got '{line}'"));
    if fields.len() != 4 {
        return Err(bad());
    }
    let mut v = [0.0; 4];
    for (slot, f) in v.iter_mut().zip(&fields) {
        *slot = f.parse().map_err(|_| bad())?;
    }
    BoundingBox::new(v[0] - 1.0, v[1] - 1.0, v[2], v[3])
        .map_err(|e| Error::Format(format!("groundtruth line {lineno}: {e}")))
}

pub fn parse_groundtruth(text: &str) -> Result<Vec<BoundingBox>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_gt_line(l.trim(), i + 1))
        .collect()
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

/// Load `dir/img/*` (numeric file stems, in order) and
/// `dir/groundtruth_rect.txt`.
pub fn load_sequence(dir: impl AsRef<Path>) -> Result<Sequence> {
    let dir = dir.as_ref();
    let img_dir = dir.join("img");
    let entries = std::fs::read_dir(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    let mut frames: Vec<(u64, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&img_dir, e))?.path();
        if !is_image(&path) {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        let n = stem
            .parse()
            .map_err(|_| Error::Format(format!("frame name {} is not numbered", path.display())))?;
        frames.push((n, path));
    }
    frames.sort();
    let gt_path = dir.join("groundtruth_rect.txt");
    let text = std::fs::read_to_string(&gt_path).map_err(|e| Error::io(&gt_path, e))?;
    let groundtruth = parse_groundtruth(&text)?;
    if frames.len() != groundtruth.len() {
        return Err(Error::Format(format!(
            "frame/annotation count mismatch: frames={} annotations={}",
            frames.len(),
            groundtruth.len()
        )));
    }
    if frames.len() < 2 {
        return Err(Error::Format(format!("sequence needs at least 2 frames, found {}", frames.len())));
    }
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".to_string());
    Ok(Sequence {
        name,
        frame_paths: frames.into_iter().map(|(_, p)| p).collect(),
        groundtruth,
    })
}

pub fn center_error(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    (inter / (a.area() + b.area() - inter)).clamp(0.0, 1.0)
}

fn check_lengths(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::invalid(format!(
            "prediction count {} differs from ground truth count {}",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("no frames to evaluate"));
    }
    Ok(())
}

pub fn precision_thresholds() -> Vec<f64> {
    (0..=PRECISION_MAX).map(|t| t as f64).collect()
}

pub fn success_thresholds() -> Vec<f64> {
    (0..=SUCCESS_STEPS).map(|i| i as f64 / SUCCESS_STEPS as f64).collect()
}

/// Fraction of frames with center error at most each threshold.
pub fn precision_curve(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<MetricCurve> {
    check_lengths(pred, gt)?;
    let errors: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| center_error(p, g)).collect();
    precision_from_errors(&errors)
}

pub fn precision_from_errors(errors: &[f64]) -> Result<MetricCurve> {
    if errors.is_empty() {
        return Err(Error::invalid("no frames to evaluate"));
    }
    let n = errors.len() as f64;
    let thresholds = precision_thresholds();
    let values = thresholds
        .iter()
        .map(|&t| errors.iter().filter(|&&e| e <= t).count() as f64 / n)
        .collect();
    MetricCurve::new(thresholds, values)
}

/// Fraction of frames whose overlap strictly exceeds each threshold.
pub fn success_curve(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<MetricCurve> {
    check_lengths(pred, gt)?;
    let overlaps: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| iou(p, g)).collect();
    success_from_overlaps(&overlaps)
}

pub fn success_from_overlaps(overlaps: &[f64]) -> Result<MetricCurve> {
    if overlaps.is_empty() {
        return Err(Error::invalid("no frames to evaluate"));
    }
    let n = overlaps.len() as f64;
    let thresholds = success_thresholds();
    let values = thresholds
        .iter()
        .map(|&t| overlaps.iter().filter(|&&o| o > t).count() as f64 / n)
        .collect();
    MetricCurve::new(thresholds, values)
}

/// Mean of the curve's points.
pub fn auc(curve: &MetricCurve) -> f64 {
    if curve.values.is_empty() {
        return 0.0;
    }
    curve.values.iter().sum::<f64>() / curve.values.len() as f64
}

/// Per-sequence summary in the emitted JSON shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMetrics {
    pub sequence: String,
    pub dp20: f64,
    pub auc: f64,
    pub precision: Vec<f64>,
    pub success: Vec<f64>,
}

impl SequenceMetrics {
    pub fn compute(name: &str, pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<Self> {
        let p = precision_curve(pred, gt)?;
        let s = success_curve(pred, gt)?;
        Ok(SequenceMetrics {
            sequence: name.to_string(),
            dp20: p.at(DP_THRESHOLD).unwrap_or(0.0),
            auc: auc(&s),
            precision: p.values,
            success: s.values,
        })
    }

    pub fn precision_curve(&self) -> Result<MetricCurve> {
        MetricCurve::new(precision_thresholds(), self.precision.clone())
    }

    pub fn success_curve(&self) -> Result<MetricCurve> {
        MetricCurve::new(success_thresholds(), self.success.clone())
    }
}

/// Uniform average over sequences, each sequence weighing the same
/// regardless of its length.
pub fn aggregate(name: &str, metrics: &[SequenceMetrics]) -> Result<SequenceMetrics> {
    let first = metrics.first().ok_or_else(|| Error::invalid("nothing to aggregate"))?;
    let n = metrics.len() as f64;
    let mean_vec = |get: fn(&SequenceMetrics) -> &Vec<f64>, len: usize| -> Result<Vec<f64>> {
        let mut acc = vec![0.0; len];
        for m in metrics {
            let v = get(m);
            if v.len() != len {
                return Err(Error::invalid("curves of different lengths cannot be averaged"));
            }
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x / n;
            }
        }
        Ok(acc)
    };
    Ok(SequenceMetrics {
        sequence: name.to_string(),
        dp20: metrics.iter().map(|m| m.dp20).sum::<f64>() / n,
        auc: metrics.iter().map(|m| m.auc).sum::<f64>() / n,
        precision: mean_vec(|m| &m.precision, first.precision.len())?,
        success: mean_vec(|m| &m.success, first.success.len())?,
    })
}

/// Two-column `threshold,value` CSV.
pub fn curve_csv(curve: &MetricCurve, value_name: &str) -> String {
    let mut out = format!("threshold,{value_name}\n");
    for (t, v) in curve.thresholds.iter().zip(&curve.values) {
        out.push_str(&format!("{t},{v}\n"));
    }
    out
}
