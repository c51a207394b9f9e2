//! Oriented re-detection: pick qualified peaks in the central part of the
//! fused response and arbitrate among fresh detections centered on them.

use ndarray::Array2;
use rayon::prelude::*;

use crate::cfcore::ResponseMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedetectConfig {
    /// Side proportion of the central mask.
    pub xi: f64,
    /// Minimum ratio to the strongest masked peak.
    pub theta: f64,
    /// Maximum number of candidates kept.
    pub n_max: usize,
    pub enabled: bool,
}

impl Default for RedetectConfig {
    fn default() -> Self {
        RedetectConfig {
            xi: 0.4,
            theta: 0.7,
            n_max: 3,
            enabled: true,
        }
    }
}

impl RedetectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return Err(Error::invalid(format!("xi must lie in (0, 1], got {}", self.xi)));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::invalid(format!("theta must lie in (0, 1], got {}", self.theta)));
        }
        if self.n_max == 0 {
            return Err(Error::invalid("n_max must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub row: usize,
    pub col: usize,
    pub value: f64,
    pub ratio: f64,
}

/// Candidate peaks sorted by descending ratio; never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn best(&self) -> Option<&Peak> {
        self.peaks.first()
    }
}

/// Cells strictly greater than every existing 8-neighbor. Edges do not wrap.
pub fn local_maxima(q: &ResponseMap) -> Array2<bool> {
    let (v, h) = q.dim();
    let d = &q.data;
    Array2::from_shape_fn((v, h), |(i, j)| {
        let c = d[[i, j]];
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni < 0 || nj < 0 || ni >= v as isize || nj >= h as isize {
                    continue;
                }
                if d[[ni as usize, nj as usize]] >= c {
                    return false;
                }
            }
        }
        true
    })
}

/// Row and column ranges of the central block of `ceil(xi*v) x ceil(xi*h)`
/// cells centered on `(v/2, h/2)`.
pub fn mask_bounds(v: usize, h: usize, xi: f64) -> ((usize, usize), (usize, usize)) {
    let span = |n: usize| -> (usize, usize) {
        let len = ((xi * n as f64).ceil() as usize).clamp(1, n);
        let start = (n / 2).saturating_sub(len / 2).min(n - len);
        (start, start + len)
    };
    (span(v), span(h))
}

pub fn central_mask(v: usize, h: usize, xi: f64) -> Result<Array2<bool>> {
    if v == 0 || h == 0 {
        return Err(Error::invalid("mask dims must be positive"));
    }
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::invalid(format!("xi must lie in (0, 1], got {xi}")));
    }
    let ((r0, r1), (c0, c1)) = mask_bounds(v, h, xi);
    Ok(Array2::from_shape_fn((v, h), |(i, j)| {
        (r0..r1).contains(&i) && (c0..c1).contains(&j)
    }))
}

/// Largest value inside the central mask (row-major first on ties).
pub fn masked_argmax(q: &ResponseMap, xi: f64) -> Peak {
    let (v, h) = q.dim();
    let ((r0, r1), (c0, c1)) = mask_bounds(v, h, xi);
    let mut best = Peak {
        row: r0,
        col: c0,
        value: f64::NEG_INFINITY,
        ratio: 1.0,
    };
    for i in r0..r1 {
        for j in c0..c1 {
            let val = q.data[[i, j]];
            if val > best.value {
                best.row = i;
                best.col = j;
                best.value = val;
            }
        }
    }
    best
}

/// Masked local maxima whose ratio to the strongest masked peak is at least
/// `theta`, strongest first, at most `n_max`. Falls back to the masked
/// argmax when no local maximum survives the mask.
pub fn select_candidates(q: &ResponseMap, cfg: &RedetectConfig) -> PeakSet {
    let (v, h) = q.dim();
    let maxima = local_maxima(q);
    let ((r0, r1), (c0, c1)) = mask_bounds(v, h, cfg.xi);
    let mut peaks: Vec<Peak> = Vec::new();
    for i in r0..r1 {
        for j in c0..c1 {
            if maxima[[i, j]] {
                peaks.push(Peak {
                    row: i,
                    col: j,
                    value: q.data[[i, j]],
                    ratio: 0.0,
                });
            }
        }
    }
    if peaks.is_empty() {
        return PeakSet {
            peaks: vec![masked_argmax(q, cfg.xi)],
        };
    }
    let top = peaks.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max);
    for p in &mut peaks {
        p.ratio = if top > 0.0 { p.value / top } else if p.value == top { 1.0 } else { 0.0 };
    }
    peaks.retain(|p| p.ratio >= cfg.theta);
    // stable sort keeps row-major order among equal ratios
    peaks.sort_by(|a, b| b.ratio.total_cmp(&a.ratio));
    peaks.truncate(cfg.n_max);
    PeakSet { peaks }
}

/// Outcome of probing one candidate: the best location inside the fresh
/// search region centered on it (in that region's grid) and its score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    pub row: usize,
    pub col: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Redetection {
    /// Final location in the primary grid; may fall outside it when a
    /// candidate near the border re-detects further out.
    pub row: f64,
    pub col: f64,
    /// Score of the winning probe, `None` when no probe ran.
    pub score: Option<f64>,
    /// Rank of the winning candidate in the peak set.
    pub winner: usize,
    pub probes: usize,
}

/// Arbitrate among candidates. A single candidate is accepted directly.
/// Otherwise each candidate is probed (in parallel) and the highest score
/// wins, ties going to the earlier rank. `grid_center` is the cell the
/// probe's region is centered on, used to map probe locations back.
pub fn redetect<F>(peaks: &PeakSet, grid_center: (usize, usize), probe: F) -> Result<Redetection>
where
    F: Fn(&Peak) -> Result<ProbeResult> + Sync,
{
    let first = peaks
        .best()
        .ok_or_else(|| Error::invalid("re-detection needs at least one candidate"))?;
    if peaks.len() == 1 {
        return Ok(Redetection {
            row: first.row as f64,
            col: first.col as f64,
            score: None,
            winner: 0,
            probes: 0,
        });
    }
    let results: Vec<ProbeResult> = peaks.peaks.par_iter().map(&probe).collect::<Result<_>>()?;
    let mut winner = 0;
    for (i, r) in results.iter().enumerate().skip(1) {
        if r.score > results[winner].score {
            winner = i;
        }
    }
    let p = &peaks.peaks[winner];
    let r = &results[winner];
    Ok(Redetection {
        row: p.row as f64 + r.row as f64 - grid_center.0 as f64,
        col: p.col as f64 + r.col as f64 - grid_center.1 as f64,
        score: Some(r.score),
        winner,
        probes: results.len(),
    })
}
