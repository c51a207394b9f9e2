//! Fourier-domain correlation filter: labels, closed-form learning,
//! detection and linear model interpolation.
//!
//! Convention: the learned spectrum is `w_d = x_d * conj(y) / (sum_d |x_d|^2 + lambda)`
//! and detection evaluates `idft2(sum_d z_d * conj(w_d))`, so detecting on the
//! training features reproduces the label (peak at the grid center) and a
//! circular shift of the input shifts the response by the same amount.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::features::FeatureMap;

/// Largest tolerated imaginary residue after an inverse transform, relative
/// to `max(1, max |real part|)`.
pub const IMAG_RESIDUE_TOL: f64 = 1e-6;

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let (planner, cache) = &mut *cell.borrow_mut();
        cache
            .entry((len, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

/// Unnormalized 2-D transform in place, rows then columns.
fn fft2_in_place(data: &mut Array2<Complex64>, inverse: bool) {
    let (v, h) = data.dim();
    let row_fft = plan(h, inverse);
    let mut buf = vec![Complex64::new(0.0, 0.0); v.max(h)];
    for mut row in data.axis_iter_mut(Axis(0)) {
        for (b, x) in buf.iter_mut().zip(row.iter()) {
            *b = *x;
        }
        row_fft.process(&mut buf[..h]);
        for (x, b) in row.iter_mut().zip(buf.iter()) {
            *x = *b;
        }
    }
    let col_fft = plan(v, inverse);
    for mut col in data.axis_iter_mut(Axis(1)) {
        for (b, x) in buf.iter_mut().zip(col.iter()) {
            *b = *x;
        }
        col_fft.process(&mut buf[..v]);
        for (x, b) in col.iter_mut().zip(buf.iter()) {
            *x = *b;
        }
    }
}

/// Unnormalized forward DFT of a real matrix.
pub fn dft2(x: ArrayView2<f64>) -> Array2<Complex64> {
    let mut out = x.mapv(|v| Complex64::new(v, 0.0));
    if !out.is_empty() {
        fft2_in_place(&mut out, false);
    }
    out
}

/// Inverse DFT carrying the `1/(V*H)` factor. Fails if the result is not
/// real up to [`IMAG_RESIDUE_TOL`].
pub fn idft2(spectrum: &Array2<Complex64>) -> Result<Array2<f64>> {
    let (v, h) = spectrum.dim();
    if v == 0 || h == 0 {
        return Err(Error::invalid("idft2 of an empty matrix"));
    }
    let mut buf = spectrum.clone();
    fft2_in_place(&mut buf, true);
    let scale = 1.0 / (v * h) as f64;
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    for c in buf.iter() {
        max_re = max_re.max((c.re * scale).abs());
        max_im = max_im.max((c.im * scale).abs());
    }
    if !(max_im <= IMAG_RESIDUE_TOL * max_re.max(1.0)) {
        return Err(Error::NumericConsistency(format!(
            "inverse transform left imaginary residue {max_im:e}"
        )));
    }
    Ok(buf.mapv(|c| c.re * scale))
}

/// Gaussian regression target peaking at `(v/2, h/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLabel {
    pub sigma: f64,
    pub data: Array2<f64>,
}

impl GaussianLabel {
    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn center(&self) -> (usize, usize) {
        let (v, h) = self.dim();
        (v / 2, h / 2)
    }
}

/// Label with wrap-around distances to the center cell.
pub fn gaussian_label(v: usize, h: usize, sigma: f64) -> Result<GaussianLabel> {
    if v == 0 || h == 0 {
        return Err(Error::invalid("label dims must be positive"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("label sigma must be positive, got {sigma}")));
    }
    let wrap = |i: usize, c: usize, n: usize| -> f64 {
        let d = i.abs_diff(c);
        d.min(n - d) as f64
    };
    let (cv, ch) = (v / 2, h / 2);
    let denom = 2.0 * sigma * sigma;
    let data = Array2::from_shape_fn((v, h), |(i, j)| {
        let di = wrap(i, cv, v);
        let dj = wrap(j, ch, h);
        (-(di * di + dj * dj) / denom).exp().max(f64::MIN_POSITIVE)
    });
    Ok(GaussianLabel { sigma, data })
}

/// Label bandwidth for a grid whose target footprint is `1/search_factor`
/// of each side: `0.1 * sqrt(target_cells_v * target_cells_h)`.
pub fn label_sigma(v: usize, h: usize, search_factor: f64) -> f64 {
    let tv = v as f64 / search_factor;
    let th = h as f64 / search_factor;
    (0.1 * (tv * th).sqrt()).max(f64::MIN_POSITIVE)
}

/// Learned filter for one feature level: one spectrum per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerFilter {
    pub spectra: Vec<Array2<Complex64>>,
    pub lambda: f64,
    /// Set when some frequency had a zero denominator and was zeroed out.
    pub degenerate: bool,
}

impl LayerFilter {
    pub fn dim(&self) -> (usize, usize, usize) {
        let (v, h) = self.spectra.first().map(|s| s.dim()).unwrap_or((0, 0));
        (v, h, self.spectra.len())
    }

    /// Sum of squared spectrum magnitudes over all channels.
    pub fn energy(&self) -> f64 {
        self.spectra.iter().flat_map(|s| s.iter()).map(|c| c.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.spectra
            .iter()
            .flat_map(|s| s.iter())
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Real-valued correlation response over the search grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    pub data: Array2<f64>,
}

impl ResponseMap {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericConsistency("response contains non-finite values".into()));
        }
        Ok(ResponseMap { data })
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    /// Row-major first occurrence of the maximum value.
    pub fn argmax(&self) -> (usize, usize, f64) {
        argmax(self.data.view())
    }
}

pub(crate) fn argmax(data: ArrayView2<f64>) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::NEG_INFINITY);
    for ((i, j), &v) in data.indexed_iter() {
        if v > best.2 {
            best = (i, j, v);
        }
    }
    best
}

/// Closed-form ridge solution shared across channels.
pub fn learn_filter(fm: &FeatureMap, label: &GaussianLabel, lambda: f64) -> Result<LayerFilter> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be non-negative, got {lambda}")));
    }
    let (v, h, d) = fm.dim();
    if label.dim() != (v, h) {
        return Err(Error::invalid(format!(
            "label is {:?} but feature map is {v}x{h}",
            label.dim()
        )));
    }
    let y_hat = dft2(label.data.view());
    let x_hats: Vec<Array2<Complex64>> = (0..d).map(|c| dft2(fm.channel(c))).collect();

    let mut denom = Array2::from_elem((v, h), lambda);
    for xh in &x_hats {
        denom.zip_mut_with(xh, |acc, x| *acc += x.norm_sqr());
    }

    let mut degenerate = false;
    let spectra = x_hats
        .into_iter()
        .map(|xh| {
            let mut w = xh;
            ndarray::Zip::from(&mut w)
                .and(&y_hat)
                .and(&denom)
                .for_each(|w, y, &den| {
                    if den > 0.0 {
                        *w = *w * y.conj() / den;
                    } else {
                        degenerate = true;
                        *w = Complex64::new(0.0, 0.0);
                    }
                });
            w
        })
        .collect();
    Ok(LayerFilter {
        spectra,
        lambda,
        degenerate,
    })
}

/// Correlate a feature map with a learned filter.
pub fn detect(filter: &LayerFilter, fm: &FeatureMap) -> Result<ResponseMap> {
    let (v, h, d) = fm.dim();
    if filter.dim() != (v, h, d) {
        return Err(Error::invalid(format!(
            "filter is {:?} but feature map is {:?}",
            filter.dim(),
            fm.dim()
        )));
    }
    let mut acc = Array2::from_elem((v, h), Complex64::new(0.0, 0.0));
    for (c, w) in filter.spectra.iter().enumerate() {
        let z = dft2(fm.channel(c));
        ndarray::Zip::from(&mut acc)
            .and(&z)
            .and(w)
            .for_each(|a, z, w| *a += z * w.conj());
    }
    ResponseMap::new(idft2(&acc)?)
}

/// `(1 - rate) * old + rate * new`, spectrum by spectrum. The endpoints
/// return exact copies of the corresponding input.
pub fn interpolate_model(old: &LayerFilter, new: &LayerFilter, rate: f64) -> Result<LayerFilter> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::invalid(format!("interpolation rate {rate} outside [0, 1]")));
    }
    if old.dim() != new.dim() {
        return Err(Error::invalid("interpolated filters differ in shape"));
    }
    if old.lambda != new.lambda {
        return Err(Error::invalid("interpolated filters differ in lambda"));
    }
    if rate == 0.0 {
        return Ok(old.clone());
    }
    if rate == 1.0 {
        return Ok(new.clone());
    }
    let spectra = old
        .spectra
        .iter()
        .zip(&new.spectra)
        .map(|(a, b)| {
            let mut out = a.clone();
            out.zip_mut_with(b, |o, n| *o = *o * (1.0 - rate) + *n * rate);
            out
        })
        .collect();
    Ok(LayerFilter {
        spectra,
        lambda: old.lambda,
        degenerate: old.degenerate && new.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(v: usize, h: usize, d: usize, seed: u64) -> FeatureMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureMap::new(Array3::from_shape_fn((v, h, d), |_| rng.gen_range(-1.0..1.0)), 1.0).unwrap()
    }

    /// Direct O(N^2) DFT, independent of rustfft.
    fn naive_dft(x: &Array2<f64>) -> Array2<Complex64> {
        let (v, h) = x.dim();
        Array2::from_shape_fn((v, h), |(k, l)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for ((i, j), &val) in x.indexed_iter() {
                let ang = -2.0
                    * std::f64::consts::PI
                    * (k as f64 * i as f64 / v as f64 + l as f64 * j as f64 / h as f64);
                acc += Complex64::from_polar(val, ang);
            }
            acc
        })
    }

    #[test]
    fn dft_of_impulse_and_constant() {
        let mut x = Array2::zeros((4, 5));
        x[[0, 0]] = 1.0;
        for c in dft2(x.view()).iter() {
            assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let x = Array2::from_elem((4, 5), 2.5);
        let s = dft2(x.view());
        assert!((s[[0, 0]] - Complex64::new(50.0, 0.0)).norm() < 1e-12);
        assert!(s.iter().skip(1).all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn dft_matches_naive_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Array2::from_shape_fn((4, 4), |_| rng.gen_range(-1.0..1.0));
        let fast = dft2(x.view());
        let slow = naive_dft(&x);
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).norm() < 1e-9);
        }
        let energy: f64 = x.iter().map(|v| v * v).sum();
        let spec: f64 = slow.iter().map(|c| c.norm_sqr()).sum::<f64>() / 16.0;
        assert!((energy - spec).abs() < 1e-9);
        let back = idft2(&fast).unwrap();
        for (a, b) in back.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn idft_rejects_non_hermitian_spectrum() {
        let mut s = Array2::from_elem((4, 4), Complex64::new(0.0, 0.0));
        s[[0, 1]] = Complex64::new(1.0, 0.0);
        assert!(matches!(idft2(&s), Err(Error::NumericConsistency(_))));
    }

    #[test]
    fn label_values() {
        let l = gaussian_label(5, 5, 1.0).unwrap();
        assert_eq!(l.data[[2, 2]], 1.0);
        assert!((l.data[[2, 3]] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((l.data[[2, 3]] - 0.6065).abs() < 1e-4);
        assert!(gaussian_label(5, 5, 0.0).is_err());
        assert!(gaussian_label(5, 5, -1.0).is_err());
    }

    #[test]
    fn label_is_wrap_symmetric() {
        let l = gaussian_label(8, 8, 1.5).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let mi = (8 + 8 - i) % 8; // mirror about center 4
                let mj = (8 + 8 - j) % 8;
                assert_eq!(l.data[[i, j]], l.data[[mi, mj]]);
                assert!(l.data[[i, j]] > 0.0 && l.data[[i, j]] <= 1.0);
            }
        }
    }

    #[test]
    fn scalar_filters() {
        let fm = FeatureMap::new(Array3::from_elem((1, 1, 1), 2.0), 1.0).unwrap();
        let y = GaussianLabel {
            sigma: 1.0,
            data: Array2::from_elem((1, 1), 1.0),
        };
        let w = learn_filter(&fm, &y, 0.0).unwrap();
        assert!((w.spectra[0][[0, 0]] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        let w = learn_filter(&fm, &y, 1.0).unwrap();
        assert!((w.spectra[0][[0, 0]] - Complex64::new(0.4, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_map_without_regularization_is_flagged() {
        let fm = FeatureMap::new(Array3::zeros((4, 4, 2)), 1.0).unwrap();
        let y = gaussian_label(4, 4, 1.0).unwrap();
        let w = learn_filter(&fm, &y, 0.0).unwrap();
        assert!(w.degenerate);
        assert_eq!(w.energy(), 0.0);
        assert!(learn_filter(&fm, &y, -1.0).is_err());
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let fm = random_map(4, 4, 1, 1);
        assert!(learn_filter(&fm, &gaussian_label(4, 5, 1.0).unwrap(), 1e-4).is_err());
        let w = learn_filter(&fm, &gaussian_label(4, 4, 1.0).unwrap(), 1e-4).unwrap();
        assert!(detect(&w, &random_map(4, 4, 2, 2)).is_err());
    }

    #[test]
    fn zero_features_give_zero_response() {
        let fm = random_map(6, 6, 2, 3);
        let w = learn_filter(&fm, &gaussian_label(6, 6, 1.0).unwrap(), 1e-4).unwrap();
        let r = detect(&w, &FeatureMap::new(Array3::zeros((6, 6, 2)), 1.0).unwrap()).unwrap();
        assert!(r.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn self_detection_reproduces_label() {
        let fm = random_map(8, 8, 2, 4);
        let y = gaussian_label(8, 8, 1.0).unwrap();
        let w = learn_filter(&fm, &y, 1e-6).unwrap();
        let r = detect(&w, &fm).unwrap();
        let (i, j, _) = r.argmax();
        assert_eq!((i, j), (4, 4));
        let err = r.data.iter().zip(y.data.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn shifted_input_shifts_response() {
        let fm = random_map(8, 8, 2, 5);
        let y = gaussian_label(8, 8, 1.0).unwrap();
        let w = learn_filter(&fm, &y, 1e-4).unwrap();
        let base = detect(&w, &random_map(8, 8, 2, 6)).unwrap();
        let z = random_map(8, 8, 2, 6);
        let (p, q) = (3usize, 6usize);
        let shifted = Array3::from_shape_fn((8, 8, 2), |(i, j, c)| z.data[[(i + 8 - p) % 8, (j + 8 - q) % 8, c]]);
        let moved = detect(&w, &FeatureMap::new(shifted, 1.0).unwrap()).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let a = moved.data[[(i + p) % 8, (j + q) % 8]];
                assert!((a - base.data[[i, j]]).abs() < 1e-9);
            }
        }
        // brute-force circular cross-correlation of the spatial filter with z
        let spatial: Vec<Array2<f64>> = w
            .spectra
            .iter()
            .map(|s| idft2(s).unwrap())
            .collect();
        for s in 0..8 {
            for t in 0..8 {
                let mut acc = 0.0;
                for c in 0..2 {
                    for i in 0..8 {
                        for j in 0..8 {
                            acc += spatial[c][[i, j]] * z.data[[(i + s) % 8, (j + t) % 8, c]];
                        }
                    }
                }
                assert!((acc - base.data[[s, t]]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let one = LayerFilter {
            spectra: vec![Array2::from_elem((3, 3), Complex64::new(1.0, 0.0))],
            lambda: 1e-4,
            degenerate: false,
        };
        let zero = LayerFilter {
            spectra: vec![Array2::from_elem((3, 3), Complex64::new(0.0, 0.0))],
            lambda: 1e-4,
            degenerate: false,
        };
        assert_eq!(interpolate_model(&one, &zero, 0.0).unwrap(), one);
        assert_eq!(interpolate_model(&one, &zero, 1.0).unwrap(), zero);
        let mid = interpolate_model(&one, &zero, 0.01).unwrap();
        assert!(mid.spectra[0].iter().all(|c| (c - Complex64::new(0.99, 0.0)).norm() < 1e-15));
        assert!(interpolate_model(&one, &zero, 1.5).is_err());
        assert!(interpolate_model(&one, &zero, -0.1).is_err());
    }

    /// Ridge objective with the conjugate-filter convention used by `detect`.
    fn objective(w: &LayerFilter, fm: &FeatureMap, y: &GaussianLabel) -> f64 {
        let y_hat = dft2(y.data.view());
        let xs: Vec<_> = (0..fm.dim().2).map(|c| dft2(fm.channel(c))).collect();
        let mut total = 0.0;
        for ((k, l), yv) in y_hat.indexed_iter() {
            let mut pred = Complex64::new(0.0, 0.0);
            for (c, x) in xs.iter().enumerate() {
                pred += w.spectra[c][[k, l]].conj() * x[[k, l]];
                total += w.lambda * w.spectra[c][[k, l]].norm_sqr();
            }
            total += (pred - yv).norm_sqr();
        }
        total
    }

    #[test]
    fn learned_filter_beats_random_perturbations() {
        let fm = random_map(6, 6, 2, 8);
        let y = gaussian_label(6, 6, 1.0).unwrap();
        let w = learn_filter(&fm, &y, 0.1).unwrap();
        let best = objective(&w, &fm, &y);
        let norm = w.energy().sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let mut p = w.clone();
            let mut noise: Vec<Array2<Complex64>> = p
                .spectra
                .iter()
                .map(|s| s.mapv(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
                .collect();
            let nn: f64 = noise.iter().flat_map(|s| s.iter()).map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            for (s, n) in p.spectra.iter_mut().zip(noise.iter_mut()) {
                s.zip_mut_with(n, |a, b| *a += *b * (0.01 * norm / nn));
            }
            assert!(objective(&p, &fm, &y) >= best - 1e-9);
        }
    }

    proptest! {
        #[test]
        fn energy_non_increasing_in_lambda(seed in 0u64..500, l1 in 0.0f64..10.0, dl in 0.0f64..10.0) {
            let fm = random_map(5, 5, 2, seed);
            let y = gaussian_label(5, 5, 1.0).unwrap();
            let a = learn_filter(&fm, &y, l1).unwrap().energy();
            let b = learn_filter(&fm, &y, l1 + dl).unwrap().energy();
            prop_assert!(b <= a * (1.0 + 1e-12));
        }

        #[test]
        fn detect_is_linear(seed in 0u64..500, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let fm = random_map(6, 6, 2, seed);
            let w = learn_filter(&fm, &gaussian_label(6, 6, 1.0).unwrap(), 1e-4).unwrap();
            let z1 = random_map(6, 6, 2, seed + 1000);
            let z2 = random_map(6, 6, 2, seed + 2000);
            let mix = FeatureMap::new(&z1.data * alpha + &z2.data * beta, 1.0).unwrap();
            let r = detect(&w, &mix).unwrap();
            let r1 = detect(&w, &z1).unwrap();
            let r2 = detect(&w, &z2).unwrap();
            for ((a, b), c) in r.data.iter().zip(r1.data.iter()).zip(r2.data.iter()) {
                prop_assert!((a - (alpha * b + beta * c)).abs() < 1e-9);
            }
        }

        #[test]
        fn label_argmax_is_center(v in 1usize..20, h in 1usize..20, sigma in 0.1f64..10.0) {
            let l = gaussian_label(v, h, sigma).unwrap();
            let (i, j, _) = argmax(l.data.view());
            prop_assert_eq!((i, j), (v / 2, h / 2));
        }
    }
}
