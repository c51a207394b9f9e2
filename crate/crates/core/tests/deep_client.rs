//! The deep-client extractor against an in-process mock of the feature
//! service, speaking the wire protocol directly.

use std::io::Write;
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use mlcf::features::wire::{encode_error, FeatureRequest, FeatureResponse, LayerPayload, ERR_INFERENCE};
use mlcf::features::ExtractorSpec;
use mlcf::imaging::{crop_patch, resize};
use mlcf::pipeline::track_sequence;
use mlcf::synth::wander_sequence;
use mlcf::{Error, Frame, TrackerConfig};

#[derive(Clone, Copy)]
enum Mode {
    Features,
    Fail,
}

/// Two layers of block means: 28x28 over RGB and 14x14 over luma.
fn features(req: &FeatureRequest) -> FeatureResponse {
    let (w, h) = (req.width as usize, req.height as usize);
    let px = |x: usize, y: usize, c: usize| req.pixels[(y * w + x) * 3 + c] as f32 / 255.0;
    let pool = |cells: usize, chans: &dyn Fn(usize, usize) -> Vec<f32>, d: usize| {
        let (bw, bh) = (w / cells, h / cells);
        let mut values = Vec::with_capacity(cells * cells * d);
        for i in 0..cells {
            for j in 0..cells {
                let mut acc = vec![0f32; d];
                for y in i * bh..(i + 1) * bh {
                    for x in j * bw..(j + 1) * bw {
                        for (a, v) in acc.iter_mut().zip(chans(x, y)) {
                            *a += v;
                        }
                    }
                }
                values.extend(acc.iter().map(|a| a / (bw * bh) as f32 - 0.5));
            }
        }
        LayerPayload { v: cells as u32, h: cells as u32, d: d as u32, values }
    };
    let rgb = |x, y| vec![px(x, y, 0), px(x, y, 1), px(x, y, 2)];
    let luma = |x, y| vec![0.299 * px(x, y, 0) + 0.587 * px(x, y, 1) + 0.114 * px(x, y, 2)];
    FeatureResponse {
        layers: vec![pool(28, &rgb, 3), pool(14, &luma, 1)],
    }
}

struct Mock {
    addr: String,
    first_request: Arc<Mutex<Option<Vec<u8>>>>,
    requests: Arc<Mutex<usize>>,
}

fn serve(mode: Mode) -> Mock {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let first_request = Arc::new(Mutex::new(None));
    let requests = Arc::new(Mutex::new(0));
    let (first, count) = (first_request.clone(), requests.clone());
    thread::spawn(move || {
        for conn in listener.incoming() {
            let Ok(mut stream) = conn else { break };
            let (first, count) = (first.clone(), count.clone());
            thread::spawn(move || handle(&mut stream, mode, &first, &count));
        }
    });
    Mock {
        addr,
        first_request,
        requests,
    }
}

fn handle(stream: &mut TcpStream, mode: Mode, first: &Mutex<Option<Vec<u8>>>, count: &Mutex<usize>) {
    while let Ok(req) = FeatureRequest::read_from(stream) {
        first.lock().unwrap().get_or_insert_with(|| req.encode());
        *count.lock().unwrap() += 1;
        let reply = match mode {
            Mode::Features => features(&req).encode(),
            Mode::Fail => encode_error(ERR_INFERENCE),
        };
        if stream.write_all(&reply).is_err() {
            return;
        }
    }
}

fn patch() -> mlcf::imaging::Patch {
    let seq = wander_sequence(1, 1).unwrap();
    let f: &Frame = &seq.frames[0];
    resize(&crop_patch(f, seq.groundtruth[0].center(), (72, 72)).unwrap(), 224, 224).unwrap()
}

#[test]
fn request_bytes_and_layer_shapes() {
    let mock = serve(Mode::Features);
    let p = patch();
    let l0 = ExtractorSpec::deep_client(&mock.addr, 0).build().unwrap();
    let l1 = ExtractorSpec::deep_client(&mock.addr, 1).build().unwrap();
    let a = l0.extract(&p).unwrap();
    assert_eq!(a.dim(), (28, 28, 3));
    assert_eq!(a.cell_size, 8.0);
    assert_eq!(l1.extract(&p).unwrap().dim(), (14, 14, 1));
    // reused connection, bitwise-stable values
    assert_eq!(l0.extract(&p).unwrap(), a);

    let req = mock.first_request.lock().unwrap().clone().unwrap();
    let mut golden = b"MLFQ".to_vec();
    for v in [224u32, 224, 3] {
        golden.extend_from_slice(&v.to_le_bytes());
    }
    golden.extend_from_slice(&p.pixels);
    assert_eq!(req, golden);
    assert_eq!(*mock.requests.lock().unwrap(), 3);
}

#[test]
fn error_frame_is_a_feature_source_error() {
    let mock = serve(Mode::Fail);
    let l0 = ExtractorSpec::deep_client(&mock.addr, 0).build().unwrap();
    match l0.extract(&patch()) {
        Err(Error::FeatureSource { message, .. }) => assert!(message.contains("code 3"), "{message}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_layer_is_reported() {
    let mock = serve(Mode::Features);
    let l5 = ExtractorSpec::deep_client(&mock.addr, 5).build().unwrap();
    assert!(matches!(l5.extract(&patch()), Err(Error::FeatureSource { .. })));
}

#[test]
fn unreachable_service() {
    let l0 = ExtractorSpec::deep_client("127.0.0.1:1", 0).build().unwrap();
    assert!(matches!(l0.extract(&patch()), Err(Error::FeatureSource { .. })));
}

#[test]
fn tracks_five_frames_through_the_service() {
    let mock = serve(Mode::Features);
    let seq = wander_sequence(2, 5).unwrap();
    let cfg = TrackerConfig {
        extractors: vec![
            ExtractorSpec::deep_client(&mock.addr, 0),
            ExtractorSpec::deep_client(&mock.addr, 1),
            ExtractorSpec::grad_hist(4, 9),
        ],
        ..TrackerConfig::default()
    };
    let (boxes, diags) = track_sequence(&seq.frames, seq.groundtruth[0], cfg).unwrap();
    assert_eq!(boxes.len(), 5);
    assert!(diags.iter().all(|d| d.score.is_finite()));
    assert!(*mock.requests.lock().unwrap() >= 2 * 4);
}
