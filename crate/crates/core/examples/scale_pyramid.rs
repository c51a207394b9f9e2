//! Track a target that grows 2% per frame and compare the estimated scale
//! with the truth.

use mlcf::pipeline::track_sequence;
use mlcf::scale::{pyramid_factors, ScaleConfig};
use mlcf::synth::zoom_sequence;
use mlcf::TrackerConfig;

fn main() -> mlcf::Result<()> {
    let factors = pyramid_factors(&ScaleConfig::default())?;
    println!("pyramid: {factors:.4?}");
    let seq = zoom_sequence(3, 31, 1.02)?;
    let (boxes, diags) = track_sequence(&seq.frames, seq.groundtruth[0], TrackerConfig::default())?;
    for (t, d) in diags.iter().enumerate().step_by(5) {
        let est = boxes[t + 1].w / boxes[0].w;
        let truth = seq.groundtruth[t + 1].w / seq.groundtruth[0].w;
        println!("frame {:2}: factor {:.4}, cumulative {est:.3} (true {truth:.3})", t + 1, d.scale_factor);
    }
    let est = boxes[30].w / boxes[0].w;
    println!("after 30 frames: {est:.3} vs {:.3}", 1.02f64.powi(30));
    Ok(())
}
