//! Frames, patch cropping, resizing and windowing.
//!
//! Coordinates are continuous with pixel `k` covering `[k, k + 1)`, so the
//! center of pixel `k` sits at `k + 0.5`. A crop of width `w` centered at
//! `cx` samples frame column `floor(cx - w/2 + j + 0.5)` for output column
//! `j`, clamped to the frame (replicate-edge padding).

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// An 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::invalid(format!(
                "pixel buffer has {} bytes, expected {}",
                pixels.len(),
                width * height * 3
            )));
        }
        Ok(Frame {
            width,
            height,
            pixels,
        })
    }

    /// A frame filled with a single color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Frame::new(width, height, pixels)
    }

    /// Load a PNG or JPEG file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = image::ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .with_guessed_format()
            .map_err(|e| Error::io(path, e))?;
        match reader.format() {
            Some(image::ImageFormat::Png) | Some(image::ImageFormat::Jpeg) => {}
            _ => {
                return Err(Error::UnsupportedFormat {
                    path: path.to_path_buf(),
                })
            }
        }
        let img = reader.decode().map_err(|e| match e {
            image::ImageError::Unsupported(_) => Error::UnsupportedFormat {
                path: path.to_path_buf(),
            },
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::CorruptFile {
                path: path.to_path_buf(),
                reason: other.to_string(),
            },
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        Frame::new(w as usize, h as usize, rgb.into_raw())
    }

    /// Write the frame as a PNG file.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        image::save_buffer_with_format(
            path,
            &self.pixels,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::CorruptFile {
                path: path.to_path_buf(),
                reason: other.to_string(),
            },
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn rgb(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// A crop of a frame, possibly resized, remembering where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    /// Center of the cropped region in frame coordinates.
    pub source_center: (f64, f64),
    /// Size of the cropped region in frame pixels, before any resize.
    pub source_size: (f64, f64),
}

impl Patch {
    #[inline]
    pub fn rgb(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Luma in `[0, 1]`, row-major `height x width`.
    pub fn gray(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.height, self.width), |(y, x)| {
            let [r, g, b] = self.rgb(x, y);
            (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0
        })
    }
}

/// Crop a `size.0 x size.1` region centered at `center`, padding with the
/// nearest edge pixel wherever the region leaves the frame.
pub fn crop_patch(frame: &Frame, center: (f64, f64), size: (usize, usize)) -> Result<Patch> {
    let (w, h) = size;
    if w == 0 || h == 0 {
        return Err(Error::invalid(format!("crop size must be positive, got {w}x{h}")));
    }
    if !center.0.is_finite() || !center.1.is_finite() {
        return Err(Error::invalid("crop center must be finite"));
    }
    let x0 = center.0 - w as f64 / 2.0 + 0.5;
    let y0 = center.1 - h as f64 / 2.0 + 0.5;
    let max_x = frame.width as i64 - 1;
    let max_y = frame.height as i64 - 1;
    let cols: Vec<usize> = (0..w)
        .map(|j| ((x0 + j as f64).floor() as i64).clamp(0, max_x) as usize)
        .collect();
    let mut pixels = Vec::with_capacity(w * h * 3);
    for i in 0..h {
        let sy = ((y0 + i as f64).floor() as i64).clamp(0, max_y) as usize;
        let row = &frame.pixels[sy * frame.width * 3..(sy + 1) * frame.width * 3];
        for &sx in &cols {
            pixels.extend_from_slice(&row[sx * 3..sx * 3 + 3]);
        }
    }
    Ok(Patch {
        width: w,
        height: h,
        pixels,
        source_center: center,
        source_size: (w as f64, h as f64),
    })
}

/// Half-pixel-aligned source coordinate and blend weight for output index `dst`.
#[inline]
fn bilinear_tap(dst: usize, scale: f64, len: usize) -> (usize, usize, f64) {
    let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
    let lo = src.floor() as usize;
    let hi = (lo + 1).min(len - 1);
    (lo, hi, src - lo as f64)
}

/// Bilinear resize to absolute output dimensions (aspect ratio not kept).
pub fn resize(patch: &Patch, out_w: usize, out_h: usize) -> Result<Patch> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid(format!(
            "resize target must be positive, got {out_w}x{out_h}"
        )));
    }
    let sx = patch.width as f64 / out_w as f64;
    let sy = patch.height as f64 / out_h as f64;
    let xtaps: Vec<_> = (0..out_w).map(|x| bilinear_tap(x, sx, patch.width)).collect();
    let mut pixels = Vec::with_capacity(out_w * out_h * 3);
    for y in 0..out_h {
        let (y0, y1, fy) = bilinear_tap(y, sy, patch.height);
        for &(x0, x1, fx) in &xtaps {
            let p00 = patch.rgb(x0, y0);
            let p01 = patch.rgb(x1, y0);
            let p10 = patch.rgb(x0, y1);
            let p11 = patch.rgb(x1, y1);
            for c in 0..3 {
                let top = p00[c] as f64 * (1.0 - fx) + p01[c] as f64 * fx;
                let bottom = p10[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                pixels.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(Patch {
        width: out_w,
        height: out_h,
        pixels,
        source_center: patch.source_center,
        source_size: patch.source_size,
    })
}

/// Separable Hann window with zero endpoints. A length-1 axis is `[1.0]`.
pub fn cosine_window(v: usize, h: usize) -> Result<Array2<f64>> {
    if v == 0 || h == 0 {
        return Err(Error::invalid(format!("window dims must be positive, got {v}x{h}")));
    }
    let hann = |n: usize| -> Vec<f64> {
        if n == 1 {
            return vec![1.0];
        }
        (0..n)
            .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
            .collect()
    };
    let rows = hann(v);
    let cols = hann(h);
    Ok(Array2::from_shape_fn((v, h), |(i, j)| rows[i] * cols[j]))
}

/// Bilinear resampling of a real grid that keeps the cell `(v/2, h/2)` of the
/// input aligned with cell `(out_v/2, out_h/2)` of the output (integer
/// division), scaling offsets about that anchor. Samples outside the input
/// clamp to the border.
///
/// Correlation responses peak at the label center, so anchoring there keeps
/// a displacement of one input cell equal to `out/in` output cells for every
/// layer regardless of its resolution.
pub fn resample_centered(src: &Array2<f64>, out_v: usize, out_h: usize) -> Result<Array2<f64>> {
    let (v, h) = src.dim();
    if v == 0 || h == 0 || out_v == 0 || out_h == 0 {
        return Err(Error::invalid("resample dims must be positive"));
    }
    let tap = |dst: usize, len: usize, out: usize| -> (usize, usize, f64) {
        let s = (len / 2) as f64 + (dst as f64 - (out / 2) as f64) * len as f64 / out as f64;
        let s = s.clamp(0.0, (len - 1) as f64);
        let lo = s.floor() as usize;
        (lo, (lo + 1).min(len - 1), s - lo as f64)
    };
    let rtaps: Vec<_> = (0..out_v).map(|r| tap(r, v, out_v)).collect();
    let ctaps: Vec<_> = (0..out_h).map(|c| tap(c, h, out_h)).collect();
    Ok(Array2::from_shape_fn((out_v, out_h), |(r, c)| {
        let (r0, r1, fr) = rtaps[r];
        let (c0, c1, fc) = ctaps[c];
        let top = src[[r0, c0]] * (1.0 - fc) + src[[r0, c1]] * fc;
        let bottom = src[[r1, c0]] * (1.0 - fc) + src[[r1, c1]] * fc;
        top * (1.0 - fr) + bottom * fr
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(w: usize, h: usize, seed: u64) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let px = (0..w * h * 3).map(|_| rng.gen()).collect();
        Frame::new(w, h, px).unwrap()
    }

    #[test]
    fn frame_rejects_bad_buffers() {
        assert!(Frame::new(0, 3, vec![]).is_err());
        assert!(Frame::new(2, 2, vec![0; 11]).is_err());
    }

    #[test]
    fn crop_of_uniform_frame_is_uniform() {
        let f = Frame::filled(10, 10, [128, 128, 128]).unwrap();
        let p = crop_patch(&f, (5.0, 5.0), (4, 4)).unwrap();
        assert_eq!((p.width, p.height), (4, 4));
        assert!(p.pixels.iter().all(|&v| v == 128));
    }

    #[test]
    fn crop_at_corner_replicates_edge() {
        let f = random_frame(4, 4, 1);
        let p = crop_patch(&f, (0.0, 0.0), (4, 4)).unwrap();
        let corner = f.rgb(0, 0);
        for y in 0..2 {
            for x in 0..2 {
                assert_eq!(p.rgb(x, y), corner);
            }
        }
        assert_eq!(p.rgb(3, 3), f.rgb(1, 1));
    }

    #[test]
    fn in_bounds_crop_is_direct_subarray() {
        let f = random_frame(16, 16, 2);
        let p = crop_patch(&f, (8.0, 8.0), (8, 8)).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(p.rgb(x, y), f.rgb(x + 4, y + 4));
            }
        }
        assert_eq!(p.source_center, (8.0, 8.0));
        assert_eq!(p.source_size, (8.0, 8.0));
    }

    #[test]
    fn crop_rejects_zero_size() {
        let f = Frame::filled(4, 4, [0, 0, 0]).unwrap();
        assert!(matches!(
            crop_patch(&f, (1.0, 1.0), (0, 3)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn resize_constant_stays_constant() {
        let f = Frame::filled(7, 5, [10, 200, 30]).unwrap();
        let p = crop_patch(&f, (3.5, 2.5), (7, 5)).unwrap();
        let r = resize(&p, 224, 224).unwrap();
        assert_eq!(r.pixels.len(), 224 * 224 * 3);
        assert!(r.pixels.chunks(3).all(|c| c == [10, 200, 30]));
        assert_eq!(r.source_size, p.source_size);
    }

    #[test]
    fn resize_is_monotone_on_a_ramp() {
        let p = Patch {
            width: 2,
            height: 1,
            pixels: vec![0, 0, 0, 255, 255, 255],
            source_center: (1.0, 0.5),
            source_size: (2.0, 1.0),
        };
        let r = resize(&p, 4, 1).unwrap();
        let vals: Vec<u8> = (0..4).map(|x| r.rgb(x, 0)[0]).collect();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]), "{vals:?}");
        assert_eq!(vals[0], 0);
        assert_eq!(vals[3], 255);
    }

    #[test]
    fn resize_matches_scalar_bilinear_oracle() {
        let f = random_frame(8, 8, 3);
        let p = crop_patch(&f, (4.0, 4.0), (8, 8)).unwrap();
        let r = resize(&p, 16, 16).unwrap();
        // independent scalar formula: src = (dst + 0.5) * in / out - 0.5
        let sample = |x: f64, y: f64, c: usize| -> f64 {
            let x = x.clamp(0.0, 7.0);
            let y = y.clamp(0.0, 7.0);
            let (xi, yi) = (x.floor(), y.floor());
            let (ax, ay) = (x - xi, y - yi);
            let get = |xx: f64, yy: f64| {
                p.rgb(xx.min(7.0) as usize, yy.min(7.0) as usize)[c] as f64
            };
            get(xi, yi) * (1.0 - ax) * (1.0 - ay)
                + get(xi + 1.0, yi) * ax * (1.0 - ay)
                + get(xi, yi + 1.0) * (1.0 - ax) * ay
                + get(xi + 1.0, yi + 1.0) * ax * ay
        };
        for y in 0..16 {
            for x in 0..16 {
                for c in 0..3 {
                    let expect = sample((x as f64 + 0.5) / 2.0 - 0.5, (y as f64 + 0.5) / 2.0 - 0.5, c);
                    let got = r.rgb(x, y)[c] as f64;
                    assert!((got - expect).abs() <= 1.0, "({x},{y},{c}) {got} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn resize_rejects_zero_dims() {
        let f = Frame::filled(2, 2, [0, 0, 0]).unwrap();
        let p = crop_patch(&f, (1.0, 1.0), (2, 2)).unwrap();
        assert!(resize(&p, 0, 4).is_err());
    }

    #[test]
    fn hann_degenerate_and_endpoints() {
        assert_eq!(cosine_window(1, 1).unwrap()[[0, 0]], 1.0);
        let w = cosine_window(3, 1).unwrap();
        assert!(w[[0, 0]].abs() < 1e-15);
        assert!((w[[1, 0]] - 1.0).abs() < 1e-15);
        assert!(w[[2, 0]].abs() < 1e-15);
        assert!(cosine_window(0, 3).is_err());
    }

    #[test]
    fn hann_is_flip_symmetric() {
        let w = cosine_window(8, 8).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert!((w[[i, j]] - w[[7 - i, j]]).abs() < 1e-15);
                assert!((w[[i, j]] - w[[i, 7 - j]]).abs() < 1e-15);
                assert!((0.0..=1.0).contains(&w[[i, j]]));
            }
        }
    }

    #[test]
    fn centered_resample_keeps_anchor() {
        let mut src = Array2::zeros((56, 56));
        src[[28, 28]] = 1.0;
        let out = resample_centered(&src, 224, 224).unwrap();
        assert_eq!(out[[112, 112]], 1.0);
        assert!(out[[111, 112]] < 1.0 && out[[113, 112]] < 1.0);
        // one input cell maps to four output cells
        let mut src = Array2::zeros((56, 56));
        src[[30, 25]] = 1.0;
        let out = resample_centered(&src, 224, 224).unwrap();
        assert_eq!(out[[120, 100]], 1.0);
    }

    proptest! {
        #[test]
        fn crop_never_invents_values(seed in 0u64..1000, cx in -10.0f64..26.0, cy in -10.0f64..26.0,
                                     w in 1usize..20, h in 1usize..20) {
            let f = random_frame(6, 5, seed);
            let p = crop_patch(&f, (cx, cy), (w, h)).unwrap();
            let source: std::collections::HashSet<[u8; 3]> =
                (0..5).flat_map(|y| (0..6).map(move |x| (x, y))).map(|(x, y)| f.rgb(x, y)).collect();
            for y in 0..h {
                for x in 0..w {
                    prop_assert!(source.contains(&p.rgb(x, y)));
                }
            }
        }

        #[test]
        fn in_bounds_crop_is_idempotent(seed in 0u64..1000, cx in 6.0f64..10.0, cy in 6.0f64..10.0) {
            let f = random_frame(16, 16, seed);
            let p = crop_patch(&f, (cx, cy), (8, 8)).unwrap();
            let as_frame = Frame::new(8, 8, p.pixels.clone()).unwrap();
            let again = crop_patch(&as_frame, (4.0, 4.0), (8, 8)).unwrap();
            prop_assert_eq!(again.pixels, p.pixels);
        }
    }
}
