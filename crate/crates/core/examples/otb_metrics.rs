//! Write a synthetic sequence in OTB layout, track it, and compute the
//! precision and success curves.

use mlcf::evaluation::{curve_csv, load_sequence, SequenceMetrics};
use mlcf::pipeline::Tracker;
use mlcf::synth::wander_sequence;
use mlcf::{Frame, TrackerConfig};

fn main() -> mlcf::Result<()> {
    let dir = std::env::temp_dir().join("mlcf-otb-example");
    wander_sequence(21, 60)?.write_otb(dir.join("Wander"))?;
    let seq = load_sequence(dir.join("Wander"))?;

    let first = Frame::load(&seq.frame_paths[0])?;
    let mut tracker = Tracker::init(&first, seq.groundtruth[0], TrackerConfig::default())?;
    let mut boxes = vec![seq.groundtruth[0]];
    for path in &seq.frame_paths[1..] {
        boxes.push(tracker.track(&Frame::load(path)?)?.0);
    }
    let m = SequenceMetrics::compute(&seq.name, &boxes, &seq.groundtruth)?;
    println!("{}: DP@20 {:.3}, AUC {:.3}", m.sequence, m.dp20, m.auc);
    print!("{}", curve_csv(&m.success_curve()?, "success"));
    Ok(())
}
