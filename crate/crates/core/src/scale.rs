//! Patch-pyramid scale search.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Smallest target side, in pixels, the scale clamp allows.
pub const MIN_TARGET_SIDE: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleConfig {
    /// Step between neighboring pyramid levels, `> 1`.
    pub a: f64,
    /// Number of levels, odd.
    pub s: usize,
    /// Target size relative to the initial box.
    pub current_scale: f64,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        ScaleConfig {
            a: 1.02,
            s: 5,
            current_scale: 1.0,
        }
    }
}

impl ScaleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 1.0) || !self.a.is_finite() {
            return Err(Error::invalid(format!("scale step must exceed 1, got {}", self.a)));
        }
        if self.s == 0 || self.s.is_multiple_of(2) {
            return Err(Error::invalid(format!("pyramid size must be odd, got {}", self.s)));
        }
        if !(self.current_scale > 0.0) {
            return Err(Error::invalid("current scale must be positive"));
        }
        Ok(())
    }

    /// Integer exponents `-(s-1)/2 ..= (s-1)/2`.
    pub fn exponents(&self) -> impl Iterator<Item = i32> {
        let half = (self.s / 2) as i32;
        -half..=half
    }
}

/// `a^n` for each exponent, ascending, with `a^0 = 1` exactly.
pub fn pyramid_factors(cfg: &ScaleConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    Ok(cfg.exponents().map(|n| cfg.a.powi(n)).collect())
}

/// Evaluate `score` at every pyramid factor (in parallel) and return the
/// best `(factor, score)`. Ties prefer the factor closest to 1, then the
/// smaller factor.
pub fn best_factor<F>(cfg: &ScaleConfig, score: F) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let factors = pyramid_factors(cfg)?;
    let scores: Vec<f64> = factors.par_iter().map(|&f| score(f)).collect::<Result<_>>()?;
    let mut best = factors.len() / 2;
    for (i, (&f, &s)) in factors.iter().zip(&scores).enumerate() {
        let b = scores[best];
        let closer = (f - 1.0).abs() < (factors[best] - 1.0).abs();
        let equal_dist = (f - 1.0).abs() == (factors[best] - 1.0).abs();
        if s > b || (s == b && (closer || (equal_dist && f < factors[best]))) {
            best = i;
        }
    }
    Ok((factors[best], scores[best]))
}

/// Allowed range of the scale multiplier for a base target of `base` pixels
/// inside a `frame` of pixels: the target stays at least
/// [`MIN_TARGET_SIDE`] on each side and never exceeds the frame.
pub fn scale_bounds(base: (f64, f64), frame: (usize, usize)) -> Result<(f64, f64)> {
    let lo = (MIN_TARGET_SIDE / base.0).max(MIN_TARGET_SIDE / base.1);
    let hi = (frame.0 as f64 / base.0).min(frame.1 as f64 / base.1);
    if !(lo <= hi) {
        return Err(Error::TrackingDegenerate(format!(
            "a {}x{} target cannot fit a {}x{} frame",
            base.0, base.1, frame.0, frame.1
        )));
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_pyramid() {
        let f = pyramid_factors(&ScaleConfig::default()).unwrap();
        let expect = [0.9612, 0.9804, 1.0, 1.02, 1.0404];
        for (a, b) in f.iter().zip(expect) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        assert_eq!(f[2], 1.0);
        assert!((f[0] * f[4] - 1.0).abs() < 1e-15);
        assert!((f[1] * f[3] - 1.0).abs() < 1e-15);
        let exps: Vec<_> = ScaleConfig::default().exponents().collect();
        assert_eq!(exps, vec![-2, -1, 0, 1, 2]);
    }

    #[test]
    fn degenerate_and_invalid_pyramids() {
        let one = ScaleConfig { s: 1, ..ScaleConfig::default() };
        assert_eq!(pyramid_factors(&one).unwrap(), vec![1.0]);
        assert_eq!(best_factor(&one, |_| Ok(3.0)).unwrap(), (1.0, 3.0));
        assert!(pyramid_factors(&ScaleConfig { s: 4, ..ScaleConfig::default() }).is_err());
        assert!(pyramid_factors(&ScaleConfig { a: 1.0, ..ScaleConfig::default() }).is_err());
    }

    #[test]
    fn best_factor_and_ties() {
        let cfg = ScaleConfig::default();
        let (f, s) = best_factor(&cfg, |f| Ok(-(f - 1.02).abs())).unwrap();
        assert_eq!((f, s), (1.02, 0.0));
        assert_eq!(best_factor(&cfg, |_| Ok(1.0)).unwrap().0, 1.0);
        // symmetric tie away from 1 goes to the smaller factor
        let (f, _) = best_factor(&cfg, |f| Ok(if (f - 1.0).abs() > 0.01 && (f - 1.0).abs() < 0.03 { 2.0 } else { 0.0 })).unwrap();
        assert!(f < 1.0);
    }

    #[test]
    fn bounds() {
        let (lo, hi) = scale_bounds((40.0, 20.0), (320, 240)).unwrap();
        assert_eq!(lo, 0.4);
        assert_eq!(hi, 8.0);
        assert!(matches!(scale_bounds((40.0, 40.0), (6, 100)), Err(Error::TrackingDegenerate(_))));
    }

    proptest! {
        #[test]
        fn best_is_a_pyramid_member(a in 1.001f64..1.2, half in 0usize..5, seed in any::<u64>()) {
            let cfg = ScaleConfig { a, s: 2 * half + 1, current_scale: 1.0 };
            let factors = pyramid_factors(&cfg).unwrap();
            let (f, _) = best_factor(&cfg, |f| Ok(((f * 1e6) as u64 ^ seed) as f64)).unwrap();
            prop_assert!(factors.contains(&f));
        }
    }
}
