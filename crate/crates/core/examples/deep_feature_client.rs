//! Request features for one patch from a running feature service.
//!
//! cargo run --example deep_feature_client -- 127.0.0.1:7070

use mlcf::imaging::{crop_patch, resize};
use mlcf::synth::wander_sequence;
use mlcf::ExtractorSpec;

fn main() {
    let addr = std::env::args().nth(1).unwrap_or_else(|| "127.0.0.1:7070".to_string());
    let seq = wander_sequence(1, 1).expect("synthetic frame");
    let patch = resize(
        &crop_patch(&seq.frames[0], seq.groundtruth[0].center(), (72, 72)).expect("crop"),
        224,
        224,
    )
    .expect("resize");
    for layer in 0..3 {
        let client = ExtractorSpec::deep_client(&addr, layer).build().expect("valid spec");
        match client.extract(&patch) {
            Ok(fm) => println!("layer {layer}: {:?}, cell size {}", fm.dim(), fm.cell_size),
            Err(e) => {
                eprintln!("layer {layer}: {e}");
                std::process::exit(3);
            }
        }
    }
}
