//! Response normalization and KL-divergence fusion.
//!
//! Each layer's response is turned into a probability map by shifting its
//! minimum to zero and adding a small epsilon. The map `Q` minimizing
//! `sum_k KL(R_k || Q)` over the probability simplex is the elementwise mean
//! of the `R_k` (stationarity of the Lagrangian gives `q = sum_k r_k / K`).

use ndarray::Array2;

use crate::cfcore::ResponseMap;
use crate::error::{Error, Result};

/// Added to every shifted response entry before normalization.
pub const NORMALIZE_EPS: f64 = 1e-12;

/// Non-negative map summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedResponse {
    data: Array2<f64>,
}

impl NormalizedResponse {
    /// Wrap an existing distribution, checking non-negativity and unit sum.
    pub fn from_distribution(data: Array2<f64>) -> Result<Self> {
        if data.is_empty() || data.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("distribution entries must be finite and non-negative"));
        }
        let s = data.sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("distribution sums to {s}, not 1")));
        }
        Ok(NormalizedResponse { data })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn into_response(self) -> ResponseMap {
        ResponseMap { data: self.data }
    }
}

/// `(r - min(r) + eps) / sum(r - min(r) + eps)`.
pub fn normalize_response(r: &ResponseMap) -> NormalizedResponse {
    let min = r.data.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted = r.data.mapv(|v| v - min + NORMALIZE_EPS);
    let total = shifted.sum();
    NormalizedResponse {
        data: shifted / total,
    }
}

/// Elementwise mean of the inputs.
pub fn fuse(maps: &[NormalizedResponse]) -> Result<NormalizedResponse> {
    let first = maps.first().ok_or_else(|| Error::invalid("cannot fuse an empty list"))?;
    if maps.iter().any(|m| m.dim() != first.dim()) {
        return Err(Error::invalid("fused maps differ in shape"));
    }
    if maps.iter().all(|m| m.data == first.data) {
        return Ok(first.clone());
    }
    let mut acc = Array2::zeros(first.dim());
    for m in maps {
        acc += &m.data;
    }
    acc /= maps.len() as f64;
    Ok(NormalizedResponse { data: acc })
}

/// `sum r * ln(r / q)`, with `0 * ln(0 / q) = 0`.
pub fn kl_divergence(r: &NormalizedResponse, q: &NormalizedResponse) -> Result<f64> {
    if r.dim() != q.dim() {
        return Err(Error::invalid("kl divergence of maps with different shapes"));
    }
    let mut total = 0.0;
    for (&rv, &qv) in r.data.iter().zip(q.data.iter()) {
        if rv == 0.0 {
            continue;
        }
        if qv == 0.0 {
            return Err(Error::DivergenceUndefined);
        }
        total += rv * (rv / qv).ln();
    }
    Ok(total.max(0.0))
}
