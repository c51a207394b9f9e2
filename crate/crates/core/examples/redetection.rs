//! Candidate selection on a response with two peaks inside the central mask
//! and one strong peak outside it, then arbitration by probing.

use mlcf::cfcore::ResponseMap;
use mlcf::redetection::{central_mask, redetect, select_candidates, ProbeResult, RedetectConfig};
use ndarray::Array2;

fn bump(v: usize, h: usize, peaks: &[(f64, f64, f64)]) -> Array2<f64> {
    Array2::from_shape_fn((v, h), |(i, j)| {
        peaks
            .iter()
            .map(|&(r, c, a)| a * (-((i as f64 - r).powi(2) + (j as f64 - c).powi(2)) / 8.0).exp())
            .sum()
    })
}

fn main() -> mlcf::Result<()> {
    let n = 50;
    let q = ResponseMap::new(bump(n, n, &[(25.0, 25.0, 1.0), (30.0, 20.0, 0.8), (3.0, 45.0, 2.0)]))?;
    let cfg = RedetectConfig::default();
    let mask = central_mask(n, n, cfg.xi)?;
    println!("mask covers {} of {} cells", mask.iter().filter(|&&m| m).count(), n * n);
    let peaks = select_candidates(&q, &cfg);
    for p in &peaks.peaks {
        println!("candidate ({}, {}) value {:.3} ratio {:.3}", p.row, p.col, p.value, p.ratio);
    }
    // Pretend the second candidate is the real target: its probe scores higher.
    let outcome = redetect(&peaks, (n / 2, n / 2), |p| {
        let score = if p.row == 30 { 0.95 } else { 0.6 };
        Ok(ProbeResult { row: n / 2 + 1, col: n / 2, score })
    })?;
    println!(
        "winner rank {} after {} probes, final location ({:.0}, {:.0}), score {:?}",
        outcome.winner, outcome.probes, outcome.row, outcome.col, outcome.score
    );
    Ok(())
}
