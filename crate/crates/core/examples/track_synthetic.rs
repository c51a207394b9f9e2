//! Track generated sequences and compare the full tracker against the
//! configuration without re-detection.
//!
//! cargo run --release --example track_synthetic -- [seeds] [frames]

use std::time::Instant;

use mlcf::evaluation::iou;
use mlcf::pipeline::track_sequence;
use mlcf::synth::{decoy_sequence, zoom_sequence, DecoyParams};
use mlcf::TrackerConfig;

fn mean_iou(boxes: &[mlcf::BoundingBox], gt: &[mlcf::BoundingBox]) -> f64 {
    boxes.iter().zip(gt).map(|(b, g)| iou(b, g)).sum::<f64>() / gt.len() as f64
}

fn main() -> mlcf::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    let frames: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);

    let params = DecoyParams::default();
    let mut totals = (0.0, 0.0);
    for seed in 0..seeds {
        let seq = decoy_sequence(seed, frames, &params)?;
        let started = Instant::now();
        let (on, _) = track_sequence(&seq.frames, seq.groundtruth[0], TrackerConfig::default())?;
        let elapsed = started.elapsed().as_secs_f64();
        let nrd = TrackerConfig {
            redetect_enabled: false,
            ..TrackerConfig::default()
        };
        let (off, _) = track_sequence(&seq.frames, seq.groundtruth[0], nrd)?;
        let (a, b) = (mean_iou(&on, &seq.groundtruth), mean_iou(&off, &seq.groundtruth));
        totals.0 += a;
        totals.1 += b;
        println!(
            "decoy seed {seed}: iou with re-detection {a:.3}, without {b:.3} ({:.1} fps)",
            frames as f64 / elapsed
        );
    }
    println!(
        "mean iou over {seeds} sequences: {:.3} vs {:.3}",
        totals.0 / seeds as f64,
        totals.1 / seeds as f64
    );

    let zoom = zoom_sequence(1, 30, 1.02)?;
    let (boxes, diags) = track_sequence(&zoom.frames, zoom.groundtruth[0], TrackerConfig::default())?;
    let est = boxes.last().unwrap().w / boxes[0].w;
    let picks: Vec<String> = diags.iter().map(|d| format!("{:.2}", d.scale_factor)).collect();
    println!("zoom: estimated scale {est:.3}, true {:.3}", 1.02f64.powi(29));
    println!("per-frame factors: {}", picks.join(" "));
    Ok(())
}
