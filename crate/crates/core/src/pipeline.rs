//! Tracker state and the per-frame loop: filter learning, primal detection,
//! re-detection, scale estimation and adaptive update.

use ndarray::Array2;
use rayon::prelude::*;

use crate::adaptive::{learning_rate, ScoreHistory};
use crate::cfcore::{
    detect, gaussian_label, interpolate_model, label_sigma, learn_filter, GaussianLabel, LayerFilter, ResponseMap,
};
use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::features::{apply_window, FeatureExtractor};
use crate::fusion::{fuse, normalize_response, NormalizedResponse};
use crate::imaging::{cosine_window, crop_patch, resample_centered, resize, Frame, Patch};
use crate::redetection::{masked_argmax, redetect, select_candidates, Peak, ProbeResult};
use crate::scale::{best_factor, scale_bounds, ScaleConfig};

/// Axis-aligned box, top-left origin, 0-indexed pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = BoundingBox { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn from_center(center: (f64, f64), w: f64, h: f64) -> Result<Self> {
        BoundingBox::new(center.0 - w / 2.0, center.1 - h / 2.0, w, h)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite());
        if !finite || !(self.w > 0.0 && self.h > 0.0) {
            return Err(Error::invalid(format!(
                "box needs finite coordinates and positive size, got ({}, {}, {}, {})",
                self.x, self.y, self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    fn overlaps_frame(&self, frame: &Frame) -> bool {
        self.x < frame.width() as f64 && self.y < frame.height() as f64 && self.x + self.w > 0.0 && self.y + self.h > 0.0
    }
}

/// Per-frame record of what each stage decided.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub frame_index: usize,
    /// Raw fused score at the primal peak.
    pub primal_score: f64,
    /// `S^t`, the fused score at the accepted location.
    pub score: f64,
    pub n_candidates: usize,
    /// Candidates that were re-detected around.
    pub probes: usize,
    /// True when a candidate other than the strongest one won.
    pub redetected: bool,
    /// Accepted displacement in response-grid cells, `(rows, cols)`.
    pub displacement: (f64, f64),
    pub scale_factor: f64,
    pub scale_score: f64,
    pub confidence: f64,
    pub eta: f64,
    pub updated: bool,
}

/// One feature level: its extractor, window, label and current filter.
struct Layer {
    extractor: Box<dyn FeatureExtractor>,
    window: Array2<f64>,
    label: GaussianLabel,
    filter: LayerFilter,
}

/// Fused detection over a single search region.
struct Detection {
    fused: ResponseMap,
    /// Mean of the per-layer responses on the common grid.
    raw: Array2<f64>,
    /// Frame pixels per response cell, `(x, y)`.
    pixel_step: (f64, f64),
}

pub struct Tracker {
    config: TrackerConfig,
    layers: Vec<Layer>,
    history: ScoreHistory,
    scale: ScaleConfig,
    base_size: (f64, f64),
    bbox: BoundingBox,
    frame_index: usize,
}

impl std::fmt::Debug for Tracker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tracker")
            .field("bbox", &self.bbox)
            .field("scale", &self.scale.current_scale)
            .field("frame_index", &self.frame_index)
            .field("layers", &self.layers.len())
            .finish()
    }
}

fn search_patch(frame: &Frame, center: (f64, f64), region: (f64, f64), patch_size: usize) -> Result<Patch> {
    let w = region.0.round().max(1.0) as usize;
    let h = region.1.round().max(1.0) as usize;
    let crop = crop_patch(frame, center, (w, h))?;
    resize(&crop, patch_size, patch_size)
}

/// Fold a grid offset into `(-n/2, n/2]`.
fn fold(d: f64, n: usize) -> f64 {
    let n = n as f64;
    if d <= -n / 2.0 {
        d + n
    } else if d > n / 2.0 {
        d - n
    } else {
        d
    }
}

impl Tracker {
    /// Learn the initial filters from the search region around `bbox`.
    pub fn init(frame: &Frame, bbox: BoundingBox, config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        bbox.validate()?;
        if !bbox.overlaps_frame(frame) {
            return Err(Error::invalid("initial box does not overlap the frame"));
        }
        let extractors = config
            .extractors
            .iter()
            .map(|s| s.build())
            .collect::<Result<Vec<_>>>()?;
        let region = (bbox.w * config.search_factor, bbox.h * config.search_factor);
        let patch = search_patch(frame, bbox.center(), region, config.patch_size)?;
        let layers = extractors
            .into_par_iter()
            .map(|extractor| {
                let fm = extractor.extract(&patch)?;
                let (v, h, _) = fm.dim();
                let window = cosine_window(v, h)?;
                let label = gaussian_label(v, h, label_sigma(v, h, config.search_factor))?;
                let filter = learn_filter(&apply_window(&fm, &window)?, &label, config.lambda)?;
                Ok(Layer {
                    extractor,
                    window,
                    label,
                    filter,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Tracker {
            history: config.history()?,
            scale: config.scale(),
            base_size: (bbox.w, bbox.h),
            bbox,
            frame_index: 0,
            layers,
            config,
        })
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn current_scale(&self) -> f64 {
        self.scale.current_scale
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn history(&self) -> &ScoreHistory {
        &self.history
    }

    pub fn filters(&self) -> Vec<&LayerFilter> {
        self.layers.iter().map(|l| &l.filter).collect()
    }

    fn search_region(&self, factor: f64) -> (f64, f64) {
        let s = self.scale.current_scale * factor * self.config.search_factor;
        (self.base_size.0 * s, self.base_size.1 * s)
    }

    fn grid_center(&self) -> (usize, usize) {
        let p = self.config.patch_size;
        (p / 2, p / 2)
    }

    /// Detect with every layer on the region centered at `center` and fuse.
    fn detect_fused(&self, frame: &Frame, center: (f64, f64), region: (f64, f64)) -> Result<Detection> {
        let p = self.config.patch_size;
        let patch = search_patch(frame, center, region, p)?;
        let responses = self
            .layers
            .par_iter()
            .map(|layer| {
                let fm = layer.extractor.extract(&patch)?;
                if fm.dim() != layer.filter.dim() {
                    return Err(Error::invalid(format!(
                        "feature dims {:?} changed from the learned {:?}",
                        fm.dim(),
                        layer.filter.dim()
                    )));
                }
                let r = detect(&layer.filter, &apply_window(&fm, &layer.window)?)?;
                resample_centered(&r.data, p, p)
            })
            .collect::<Result<Vec<_>>>()?;
        let normalized: Vec<NormalizedResponse> = responses
            .iter()
            .map(|r| normalize_response(&ResponseMap { data: r.clone() }))
            .collect();
        let fused = fuse(&normalized)?.into_response();
        let mut raw = Array2::zeros((p, p));
        for r in &responses {
            raw += r;
        }
        raw /= responses.len() as f64;
        let crop = (region.0.round().max(1.0), region.1.round().max(1.0));
        Ok(Detection {
            fused,
            raw,
            pixel_step: (crop.0 / p as f64, crop.1 / p as f64),
        })
    }

    /// Masked peak of a fused detection and its raw score.
    fn masked_peak(&self, det: &Detection) -> (Peak, f64) {
        let peak = masked_argmax(&det.fused, self.config.xi);
        (peak, det.raw[[peak.row, peak.col]])
    }

    /// Learn fresh filters at `center` and blend them in with `rate`.
    fn update_filters(&mut self, frame: &Frame, center: (f64, f64), rate: f64) -> Result<()> {
        let region = self.search_region(1.0);
        let patch = search_patch(frame, center, region, self.config.patch_size)?;
        let lambda = self.config.lambda;
        let updated = self
            .layers
            .par_iter()
            .map(|layer| {
                let fm = apply_window(&layer.extractor.extract(&patch)?, &layer.window)?;
                let fresh = learn_filter(&fm, &layer.label, lambda)?;
                interpolate_model(&layer.filter, &fresh, rate)
            })
            .collect::<Result<Vec<_>>>()?;
        for (layer, filter) in self.layers.iter_mut().zip(updated) {
            layer.filter = filter;
        }
        Ok(())
    }

    /// Locate the target in `frame` and update the model.
    pub fn track(&mut self, frame: &Frame) -> Result<(BoundingBox, Diagnostics)> {
        let (lo, hi) = scale_bounds(self.base_size, (frame.width(), frame.height()))?;
        if self.bbox.w > frame.width() as f64 || self.bbox.h > frame.height() as f64 {
            return Err(Error::TrackingDegenerate(format!(
                "{}x{} frame is smaller than the {:.1}x{:.1} target",
                frame.width(),
                frame.height(),
                self.bbox.w,
                self.bbox.h
            )));
        }
        let center = self.bbox.center();
        let region = self.search_region(1.0);
        let primal = self.detect_fused(frame, center, region)?;
        let gc = self.grid_center();
        let p = self.config.patch_size;

        let rcfg = self.config.redetect();
        let (row, col, score, primal_score, n_candidates, probes, redetected) = if rcfg.enabled {
            let peaks = select_candidates(&primal.fused, &rcfg);
            let best = peaks.peaks[0];
            let primal_score = primal.raw[[best.row, best.col]];
            let outcome = redetect(&peaks, gc, |peak: &Peak| {
                let shift = (
                    (peak.col as f64 - gc.1 as f64) * primal.pixel_step.0,
                    (peak.row as f64 - gc.0 as f64) * primal.pixel_step.1,
                );
                let det = self.detect_fused(frame, (center.0 + shift.0, center.1 + shift.1), region)?;
                let (p, s) = self.masked_peak(&det);
                Ok(ProbeResult {
                    row: p.row,
                    col: p.col,
                    score: s,
                })
            })?;
            let score = outcome.score.unwrap_or(primal_score);
            (
                outcome.row,
                outcome.col,
                score,
                primal_score,
                peaks.len(),
                outcome.probes,
                outcome.winner != 0,
            )
        } else {
            let (peak, s) = self.masked_peak(&primal);
            (peak.row as f64, peak.col as f64, s, s, 1, 0, false)
        };

        let dr = fold(row - gc.0 as f64, p);
        let dc = fold(col - gc.1 as f64, p);
        let new_center = (center.0 + dc * primal.pixel_step.0, center.1 + dr * primal.pixel_step.1);

        let (factor, scale_score) = if self.scale.s > 1 {
            best_factor(&self.scale, |f| {
                let det = self.detect_fused(frame, new_center, self.search_region(f))?;
                Ok(self.masked_peak(&det).0.value)
            })?
        } else {
            (1.0, score)
        };
        self.scale.current_scale = (self.scale.current_scale * factor).clamp(lo, hi);
        let size = (
            self.base_size.0 * self.scale.current_scale,
            self.base_size.1 * self.scale.current_scale,
        );
        let bbox = BoundingBox::from_center(new_center, size.0, size.1)?;

        let (confidence, eta) = if self.config.adaptive_update_enabled {
            let c = self.history.confidence(score);
            (c, learning_rate(c, self.config.tau, self.config.eta_base))
        } else {
            (0.0, self.config.eta_base)
        };
        self.bbox = bbox;
        let updated = eta > 0.0;
        if updated {
            self.update_filters(frame, new_center, eta)?;
        }
        if self.layers.iter().any(|l| !l.filter.is_finite()) {
            return Err(Error::NumericConsistency("filter spectra became non-finite".into()));
        }
        self.history.push(score)?;
        self.frame_index += 1;

        Ok((
            bbox,
            Diagnostics {
                frame_index: self.frame_index,
                primal_score,
                score,
                n_candidates,
                probes,
                redetected,
                displacement: (dr, dc),
                scale_factor: factor,
                scale_score,
                confidence,
                eta,
                updated,
            },
        ))
    }

    /// Fused response of the current model on the region around `center`,
    /// sized by the current scale.
    pub fn response_at(&self, frame: &Frame, center: (f64, f64)) -> Result<ResponseMap> {
        Ok(self.detect_fused(frame, center, self.search_region(1.0))?.fused)
    }
}

/// Track a whole sequence from `init_box` on `frames[0]`. The first returned
/// box is `init_box`.
pub fn track_sequence(
    frames: &[Frame],
    init_box: BoundingBox,
    config: TrackerConfig,
) -> Result<(Vec<BoundingBox>, Vec<Diagnostics>)> {
    let first = frames.first().ok_or_else(|| Error::invalid("sequence has no frames"))?;
    let mut tracker = Tracker::init(first, init_box, config)?;
    let mut boxes = vec![init_box];
    let mut diags = Vec::with_capacity(frames.len().saturating_sub(1));
    for frame in &frames[1..] {
        let (b, d) = tracker.track(frame)?;
        boxes.push(b);
        diags.push(d);
    }
    Ok((boxes, diags))
}
