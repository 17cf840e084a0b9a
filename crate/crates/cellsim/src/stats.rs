//! Scalar-generic statistics: nearest-rank percentiles, Pearson
//! correlation, and sample summaries.
//!
//! Everything here works for any [`num_traits::Float`]; the rest of the
//! crate uses it through the `f64` aliases at the crate root.

use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Percentile levels used throughout the toolkit, in ascending order.
pub const PERCENTILE_LEVELS: [f64; 5] = [0.10, 0.25, 0.50, 0.75, 0.90];

/// Nearest-rank percentile: the value at 1-based index `ceil(p * n)` of
/// the sorted sample. `p` must be in `(0, 1]`.
pub fn nearest_rank<F: Float>(sorted: &[F], p: F) -> F {
    assert!(!sorted.is_empty(), "nearest_rank over empty sample");
    assert!(p > F::zero() && p <= F::one(), "percentile out of (0, 1]");
    let n = F::from(sorted.len()).expect("sample count representable");
    let rank = (p * n).ceil().to_usize().expect("rank representable");
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Sorts a sample in place (ascending). Samples must not contain NaN.
pub fn sort_sample<F: Float>(values: &mut [F]) {
    values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
}

/// Five-point nearest-rank percentile summary of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles<F> {
    pub p10: F,
    pub p25: F,
    pub p50: F,
    pub p75: F,
    pub p90: F,
}

impl<F: Float> Percentiles<F> {
    pub fn from_samples(values: &mut [F]) -> Self {
        sort_sample(values);
        let level = |p: f64| nearest_rank(values, F::from(p).unwrap());
        Percentiles {
            p10: level(0.10),
            p25: level(0.25),
            p50: level(0.50),
            p75: level(0.75),
            p90: level(0.90),
        }
    }

    pub fn constant(v: F) -> Self {
        Percentiles { p10: v, p25: v, p50: v, p75: v, p90: v }
    }

    pub fn as_array(&self) -> [F; 5] {
        [self.p10, self.p25, self.p50, self.p75, self.p90]
    }

    /// Value at one of the five supported levels (0.10, 0.25, ..., 0.90).
    pub fn at_level(&self, level: f64) -> F {
        if level == 0.10 {
            self.p10
        } else if level == 0.25 {
            self.p25
        } else if level == 0.50 {
            self.p50
        } else if level == 0.75 {
            self.p75
        } else if level == 0.90 {
            self.p90
        } else {
            panic!("unsupported percentile level {level}")
        }
    }

    pub fn is_monotone(&self) -> bool {
        let a = self.as_array();
        a.windows(2).all(|w| w[0] <= w[1])
    }

    /// Piecewise-linear inverse CDF through the five percentile points.
    /// `u` is clamped to [0.10, 0.90], so draws never extrapolate past
    /// the observed tails.
    pub fn interpolate(&self, u: F) -> F {
        let lo = F::from(PERCENTILE_LEVELS[0]).unwrap();
        let hi = F::from(*PERCENTILE_LEVELS.last().unwrap()).unwrap();
        let u = u.max(lo).min(hi);
        let qs = self.as_array();
        for i in 0..PERCENTILE_LEVELS.len() - 1 {
            let a = F::from(PERCENTILE_LEVELS[i]).unwrap();
            let b = F::from(PERCENTILE_LEVELS[i + 1]).unwrap();
            if u <= b {
                let t = (u - a) / (b - a);
                return qs[i] + t * (qs[i + 1] - qs[i]);
            }
        }
        qs[4]
    }
}

/// Pearson correlation coefficient. `None` when either series has zero
/// variance (the correlation is undefined).
pub fn pearson<F: Float>(x: &[F], y: &[F]) -> Option<F> {
    assert_eq!(x.len(), y.len(), "series length mismatch");
    let n = F::from(x.len()).unwrap();
    if x.is_empty() {
        return None;
    }
    let mean = |s: &[F]| s.iter().fold(F::zero(), |a, &v| a + v) / n;
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = F::zero();
    let mut sxx = F::zero();
    let mut syy = F::zero();
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx == F::zero() || syy == F::zero() {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Summary of one sample: nearest-rank median and quartiles plus
/// mean/min/max and the sample count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats<F> {
    pub count: usize,
    pub median: F,
    pub p25: F,
    pub p75: F,
    pub mean: F,
    pub min: F,
    pub max: F,
}

impl<F: Float> SummaryStats<F> {
    pub fn from_samples(values: &mut [F]) -> Self {
        assert!(!values.is_empty(), "summary over empty sample");
        sort_sample(values);
        let n = F::from(values.len()).unwrap();
        let sum = values.iter().fold(F::zero(), |a, &v| a + v);
        SummaryStats {
            count: values.len(),
            median: nearest_rank(values, F::from(0.50).unwrap()),
            p25: nearest_rank(values, F::from(0.25).unwrap()),
            p75: nearest_rank(values, F::from(0.75).unwrap()),
            mean: sum / n,
            min: values[0],
            max: *values.last().unwrap(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_matches_definition() {
        // ceil(0.5 * 10) = 5 -> fifth value of 1..=10.
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 0.5), 5.0);
        assert_eq!(nearest_rank(&v, 0.10), 1.0);
        assert_eq!(nearest_rank(&v, 0.90), 9.0);
        assert_eq!(nearest_rank(&v, 1.0), 10.0);
        assert_eq!(nearest_rank(&[7.0f64], 0.25), 7.0);
    }

    #[test]
    fn percentiles_are_monotone() {
        let mut v = vec![5.0f64, 1.0, 4.0, 2.0, 3.0, 9.0, 0.5];
        let p = Percentiles::from_samples(&mut v);
        assert!(p.is_monotone());
        assert_eq!(p.p50, 3.0);
    }

    #[test]
    fn degenerate_sample_collapses_percentiles() {
        let mut v = vec![42.0f64];
        let p = Percentiles::from_samples(&mut v);
        assert_eq!(p.as_array(), [42.0; 5]);
    }

    #[test]
    fn interpolation_passes_through_knots() {
        let p = Percentiles { p10: 1.0f64, p25: 2.0, p50: 4.0, p75: 8.0, p90: 16.0 };
        assert_eq!(p.interpolate(0.10), 1.0);
        assert_eq!(p.interpolate(0.50), 4.0);
        assert_eq!(p.interpolate(0.90), 16.0);
        assert_eq!(p.interpolate(0.375), 3.0);
        // clamped tails
        assert_eq!(p.interpolate(0.0), 1.0);
        assert_eq!(p.interpolate(1.0), 16.0);
    }

    #[test]
    fn pearson_handles_the_edge_cases() {
        let x = [1.0f64, 2.0, 3.0, 4.0];
        let y = [2.0f64, 4.0, 6.0, 8.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&x, &[1.0f64; 4]), None);
    }

    #[test]
    fn generic_over_f32_too() {
        let v = [1.0f32, 2.0, 3.0];
        assert_eq!(nearest_rank(&v, 0.5f32), 2.0);
    }
}
