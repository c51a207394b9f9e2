//! Learn a correlation filter per feature level on one patch and detect the
//! target after it has moved.

use mlcf::cfcore::{detect, gaussian_label, label_sigma, learn_filter};
use mlcf::features::apply_window;
use mlcf::imaging::{cosine_window, crop_patch, resize};
use mlcf::synth::{render, Sprite, Texture};
use mlcf::{BoundingBox, ExtractorSpec};
use rand::SeedableRng;

fn main() -> mlcf::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let tex = Texture::random(6, &mut rng);
    let target = BoundingBox::new(80.0, 60.0, 40.0, 40.0)?;
    let moved = BoundingBox::new(88.0, 54.0, 40.0, 40.0)?;
    let before = render(240, 200, &tex, &[Sprite { rect: target, contrast: 1.0 }])?;
    let after = render(240, 200, &tex, &[Sprite { rect: moved, contrast: 1.0 }])?;
    let search = (80, 80);

    for spec in [ExtractorSpec::gray_cells(4), ExtractorSpec::grad_hist(4, 9)] {
        let extractor = spec.build()?;
        let features = |frame| -> mlcf::Result<_> {
            let patch = resize(&crop_patch(frame, target.center(), search)?, 224, 224)?;
            extractor.extract(&patch)
        };
        let x = features(&before)?;
        let (v, h, d) = x.dim();
        let window = cosine_window(v, h)?;
        let label = gaussian_label(v, h, label_sigma(v, h, 2.0))?;
        let filter = learn_filter(&apply_window(&x, &window)?, &label, 1e-4)?;

        let (r0, c0, p0) = detect(&filter, &apply_window(&x, &window)?)?.argmax();
        let z = features(&after)?;
        let (r, c, p) = detect(&filter, &apply_window(&z, &window)?)?.argmax();
        let px = search.0 as f64 / h as f64;
        println!("{spec}: {v}x{h}x{d}");
        println!("  training patch: peak {p0:.3} at ({r0}, {c0})");
        println!(
            "  moved target:   peak {p:.3} at ({r}, {c}), displacement ({:+.1}, {:+.1}) px, true (+8, -6)",
            (c as f64 - (h / 2) as f64) * px,
            (r as f64 - (v / 2) as f64) * px
        );
    }
    Ok(())
}
