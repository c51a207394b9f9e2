use ndarray::{Array2, Array3};

use super::{FeatureExtractor, FeatureMap, GRAD_HIST_EPS};
use crate::error::{Error, Result};
use crate::imaging::Patch;

fn check_divisible(patch: &Patch, cell: usize) -> Result<(usize, usize)> {
    if !patch.width.is_multiple_of(cell) || !patch.height.is_multiple_of(cell) {
        return Err(Error::invalid(format!(
            "patch {}x{} is not divisible by cell size {cell}",
            patch.width, patch.height
        )));
    }
    Ok((patch.height / cell, patch.width / cell))
}

/// Mean luma per cell minus the mean luma of the whole patch. One channel.
#[derive(Debug, Clone)]
pub struct GrayCells {
    cell: usize,
}

impl GrayCells {
    pub fn new(cell: usize) -> Self {
        GrayCells { cell: cell.max(1) }
    }
}

impl FeatureExtractor for GrayCells {
    fn extract(&self, patch: &Patch) -> Result<FeatureMap> {
        let (v, h) = check_divisible(patch, self.cell)?;
        let gray = patch.gray();
        let mean = gray.mean().unwrap_or(0.0);
        let area = (self.cell * self.cell) as f64;
        let mut data = Array3::zeros((v, h, 1));
        for ((y, x), &g) in gray.indexed_iter() {
            data[[y / self.cell, x / self.cell, 0]] += g;
        }
        data.mapv_inplace(|s| s / area - mean);
        FeatureMap::new(data, self.cell as f64)
    }
}

/// Orientation histogram of gradient magnitude per cell, unsigned
/// orientations in `[0, pi)`, bin `b` centered at `b * pi / bins`, linear
/// vote between the two nearest bins, then L2-normalized per cell.
#[derive(Debug, Clone)]
pub struct GradHist {
    cell: usize,
    bins: usize,
}

impl GradHist {
    pub fn new(cell: usize, bins: usize) -> Self {
        GradHist {
            cell: cell.max(1),
            bins: bins.max(2),
        }
    }
}

fn gradients(gray: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (hgt, wid) = gray.dim();
    let at = |y: isize, x: isize| {
        let y = y.clamp(0, hgt as isize - 1) as usize;
        let x = x.clamp(0, wid as isize - 1) as usize;
        gray[[y, x]]
    };
    let gx = Array2::from_shape_fn((hgt, wid), |(y, x)| {
        let (y, x) = (y as isize, x as isize);
        0.5 * (at(y, x + 1) - at(y, x - 1))
    });
    let gy = Array2::from_shape_fn((hgt, wid), |(y, x)| {
        let (y, x) = (y as isize, x as isize);
        0.5 * (at(y + 1, x) - at(y - 1, x))
    });
    (gx, gy)
}

impl FeatureExtractor for GradHist {
    fn extract(&self, patch: &Patch) -> Result<FeatureMap> {
        let (v, h) = check_divisible(patch, self.cell)?;
        let (gx, gy) = gradients(&patch.gray());
        let bin_width = std::f64::consts::PI / self.bins as f64;
        let mut data = Array3::zeros((v, h, self.bins));
        for ((y, x), &dx) in gx.indexed_iter() {
            let dy = gy[[y, x]];
            let mag = dx.hypot(dy);
            if mag == 0.0 {
                continue;
            }
            let theta = dy.atan2(dx).rem_euclid(std::f64::consts::PI);
            let pos = theta / bin_width;
            let lo = pos.floor();
            let frac = pos - lo;
            let lo = lo as usize % self.bins;
            let hi = (lo + 1) % self.bins;
            let (cy, cx) = (y / self.cell, x / self.cell);
            data[[cy, cx, lo]] += mag * (1.0 - frac);
            data[[cy, cx, hi]] += mag * frac;
        }
        for mut cell in data.lanes_mut(ndarray::Axis(2)) {
            let norm = cell.iter().map(|v| v * v).sum::<f64>().sqrt();
            cell.mapv_inplace(|v| v / (norm + GRAD_HIST_EPS));
        }
        FeatureMap::new(data, self.cell as f64)
    }
}
