//! Seeded synthetic sequences with known ground truth.
//!
//! Targets are random block textures drawn on a flat background. Every
//! generator is deterministic in its seed.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::Frame;
use crate::pipeline::BoundingBox;

pub const BACKGROUND: [u8; 3] = [118, 124, 112];

/// Grid of random colors sampled in normalized target coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    blocks: usize,
    colors: Vec<[f64; 3]>,
}

impl Texture {
    pub fn random(blocks: usize, rng: &mut impl Rng) -> Self {
        let colors = (0..blocks * blocks)
            .map(|_| {
                let l = rng.gen_range(0.0..255.0);
                [l, rng.gen_range(0.0..255.0), 255.0 - l]
            })
            .collect();
        Texture { blocks, colors }
    }

    /// Color at `(u, v)` in `[0, 1)`, blended toward the background by
    /// `1 - contrast`.
    pub fn sample(&self, u: f64, v: f64, contrast: f64) -> [u8; 3] {
        let n = self.blocks;
        let i = ((v * n as f64) as usize).min(n - 1);
        let j = ((u * n as f64) as usize).min(n - 1);
        let c = self.colors[i * n + j];
        let mut out = [0u8; 3];
        for k in 0..3 {
            let bg = BACKGROUND[k] as f64;
            out[k] = (bg + contrast * (c[k] - bg)).round().clamp(0.0, 255.0) as u8;
        }
        out
    }
}

/// A textured square (or rectangle) placed in a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sprite {
    pub rect: BoundingBox,
    pub contrast: f64,
}

/// Draw sprites in order onto a flat background. Pixel `(x, y)` covers
/// `[x, x+1)`; a sprite paints every pixel whose center lies inside it.
pub fn render(width: usize, height: usize, texture: &Texture, sprites: &[Sprite]) -> Result<Frame> {
    let mut pixels = Vec::with_capacity(width * height * 3);
    for _ in 0..width * height {
        pixels.extend_from_slice(&BACKGROUND);
    }
    for s in sprites {
        let r = s.rect;
        let x0 = (r.x - 0.5).ceil().max(0.0) as usize;
        let y0 = (r.y - 0.5).ceil().max(0.0) as usize;
        let x1 = ((r.x + r.w - 0.5).ceil().max(0.0) as usize).min(width);
        let y1 = ((r.y + r.h - 0.5).ceil().max(0.0) as usize).min(height);
        for y in y0..y1 {
            let v = (y as f64 + 0.5 - r.y) / r.h;
            for x in x0..x1 {
                let u = (x as f64 + 0.5 - r.x) / r.w;
                let i = (y * width + x) * 3;
                pixels[i..i + 3].copy_from_slice(&texture.sample(u, v, s.contrast));
            }
        }
    }
    Frame::new(width, height, pixels)
}

#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub frames: Vec<Frame>,
    pub groundtruth: Vec<BoundingBox>,
}

impl SyntheticSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Write as an OTB directory: `img/0001.png...` and a 1-indexed
    /// `groundtruth_rect.txt`.
    pub fn write_otb(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let img = dir.join("img");
        std::fs::create_dir_all(&img).map_err(|e| Error::io(&img, e))?;
        for (i, f) in self.frames.iter().enumerate() {
            f.save_png(img.join(format!("{:04}.png", i + 1)))?;
        }
        let mut gt = String::new();
        for b in &self.groundtruth {
            gt.push_str(&format!("{},{},{},{}\n", b.x + 1.0, b.y + 1.0, b.w, b.h));
        }
        let path = dir.join("groundtruth_rect.txt");
        std::fs::write(&path, gt).map_err(|e| Error::io(&path, e))
    }
}

fn square(center: (f64, f64), side: f64) -> BoundingBox {
    BoundingBox {
        x: center.0 - side / 2.0,
        y: center.1 - side / 2.0,
        w: side,
        h: side,
    }
}

/// Motionless target. The box is the textured square itself.
pub fn static_sequence(seed: u64, frames: usize) -> Result<SyntheticSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tex = Texture::random(6, &mut rng);
    let rect = BoundingBox::new(rng.gen_range(60..100) as f64, rng.gen_range(50..80) as f64, 32.0, 32.0)?;
    let frame = render(200, 180, &tex, &[Sprite { rect, contrast: 1.0 }])?;
    Ok(SyntheticSequence {
        frames: vec![frame; frames],
        groundtruth: vec![rect; frames],
    })
}

/// Target growing by `rate` per frame about a fixed center.
pub fn zoom_sequence(seed: u64, frames: usize, rate: f64) -> Result<SyntheticSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tex = Texture::random(10, &mut rng);
    let base = 40.0;
    let last = base * rate.powi(frames.saturating_sub(1) as i32);
    let side = (2.0 * last + 40.0).ceil().max(160.0) as usize;
    let center = (side as f64 / 2.0, side as f64 / 2.0);
    let mut seq = SyntheticSequence {
        frames: Vec::with_capacity(frames),
        groundtruth: Vec::with_capacity(frames),
    };
    for t in 0..frames {
        let rect = square(center, base * rate.powi(t as i32));
        seq.frames.push(render(side, side, &tex, &[Sprite { rect, contrast: 1.0 }])?);
        seq.groundtruth.push(rect);
    }
    Ok(seq)
}

/// Decoy sequence parameters. The object is a small textured square in the
/// middle of a larger box; it moves `step` pixels per frame along each axis,
/// bouncing off the frame edges, and from frame 1 on a faint copy sits where
/// the object was one frame earlier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyParams {
    pub width: usize,
    pub height: usize,
    pub box_side: f64,
    pub object_side: f64,
    pub step: f64,
    pub decoy_contrast: f64,
}

impl Default for DecoyParams {
    fn default() -> Self {
        DecoyParams {
            width: 320,
            height: 240,
            box_side: 40.0,
            object_side: 10.0,
            step: 10.0,
            decoy_contrast: 0.75,
        }
    }
}

/// Step `pos` by `vel`, reversing `vel` first if the step would leave `[lo, hi]`.
fn bounce(pos: &mut f64, vel: &mut f64, lo: f64, hi: f64) {
    if *pos + *vel > hi || *pos + *vel < lo {
        *vel = -*vel;
    }
    *pos += *vel;
}

pub fn decoy_sequence(seed: u64, frames: usize, p: &DecoyParams) -> Result<SyntheticSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tex = Texture::random(4, &mut rng);
    let margin = p.box_side;
    let (lo_x, hi_x) = (margin, p.width as f64 - margin);
    let (lo_y, hi_y) = (margin, p.height as f64 - margin);
    let mut pos = (rng.gen_range(lo_x..hi_x).round(), rng.gen_range(lo_y..hi_y).round());
    let mut vel = (
        if rng.gen_bool(0.5) { p.step } else { -p.step },
        if rng.gen_bool(0.5) { p.step } else { -p.step },
    );
    let mut seq = SyntheticSequence {
        frames: Vec::with_capacity(frames),
        groundtruth: Vec::with_capacity(frames),
    };
    let mut prev: Option<(f64, f64)> = None;
    for _ in 0..frames {
        let mut sprites = Vec::with_capacity(2);
        if let Some(d) = prev {
            sprites.push(Sprite {
                rect: square(d, p.object_side),
                contrast: p.decoy_contrast,
            });
        }
        sprites.push(Sprite {
            rect: square(pos, p.object_side),
            contrast: 1.0,
        });
        seq.frames.push(render(p.width, p.height, &tex, &sprites)?);
        seq.groundtruth.push(square(pos, p.box_side));
        prev = Some(pos);
        bounce(&mut pos.0, &mut vel.0, lo_x, hi_x);
        bounce(&mut pos.1, &mut vel.1, lo_y, hi_y);
    }
    Ok(seq)
}

/// Target drifting along a smooth closed path; used for long runs.
pub fn wander_sequence(seed: u64, frames: usize) -> Result<SyntheticSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tex = Texture::random(6, &mut rng);
    let (w, h) = (240usize, 200usize);
    let side = 36.0;
    let (fx, fy) = (rng.gen_range(0.005..0.01), rng.gen_range(0.005..0.01));
    let mut seq = SyntheticSequence {
        frames: Vec::with_capacity(frames),
        groundtruth: Vec::with_capacity(frames),
    };
    for t in 0..frames {
        let a = t as f64 * std::f64::consts::TAU;
        let c = (
            w as f64 / 2.0 + 60.0 * (a * fx).sin(),
            h as f64 / 2.0 + 45.0 * (a * fy).sin(),
        );
        let rect = square(c, side);
        seq.frames.push(render(w, h, &tex, &[Sprite { rect, contrast: 1.0 }])?);
        seq.groundtruth.push(rect);
    }
    Ok(seq)
}
