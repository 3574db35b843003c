//! Gaussian and interval information granules, and the principle of
//! justifiable granularity: pick the granule maximizing coverage times
//! specificity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinate system a granule lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    /// Input coordinates mapped onto `[0, 1]`.
    Normalized,
    /// Benchmark units.
    Native,
}

/// One-dimensional Gaussian fuzzy set `exp(-(x - center)^2 / spread^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianGranule {
    pub center: f64,
    pub spread: f64,
    pub calibration_range: f64,
    #[serde(rename = "units_flag")]
    pub units: Units,
}

impl GaussianGranule {
    pub fn new(center: f64, spread: f64, calibration_range: f64, units: Units) -> Result<Self> {
        if !(spread > 0.0) || !spread.is_finite() {
            return Err(Error::Config(format!("granule spread must be positive, got {spread}")));
        }
        if !(calibration_range > 0.0) || !calibration_range.is_finite() {
            return Err(Error::Config(format!("calibration range must be positive, got {calibration_range}")));
        }
        if !center.is_finite() {
            return Err(Error::Config(format!("granule center must be finite, got {center}")));
        }
        Ok(Self { center, spread, calibration_range, units })
    }

    #[inline]
    pub fn membership(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.spread;
        (-z * z).exp()
    }

    /// Integral over `alpha in (0, 1]` of `1 - width(alpha-cut) / range`.
    ///
    /// The alpha-cut of a Gaussian has width `2 * spread * sqrt(ln(1/alpha))`,
    /// which integrates to `1 - spread * sqrt(pi) / range`; clamped at zero.
    pub fn specificity(&self) -> f64 {
        (1.0 - self.spread * std::f64::consts::PI.sqrt() / self.calibration_range).max(0.0)
    }
}

/// Membership degree of `x` in `g`.
pub fn gaussian_membership(g: &GaussianGranule, x: f64) -> f64 {
    g.membership(x)
}

pub fn gaussian_specificity(g: &GaussianGranule) -> f64 {
    g.specificity()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalGranule {
    pub a: f64,
    pub b: f64,
    pub calibration_range: f64,
}

impl IntervalGranule {
    pub fn new(a: f64, b: f64, calibration_range: f64) -> Result<Self> {
        if !(a <= b) {
            return Err(Error::Config(format!("interval bounds out of order: [{a}, {b}]")));
        }
        if !(calibration_range > 0.0) {
            return Err(Error::Config(format!("calibration range must be positive, got {calibration_range}")));
        }
        Ok(Self { a, b, calibration_range })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }
}

/// Fraction of `data` inside `[a, b]` (inclusive).
pub fn interval_coverage(data: &[f64], g: &IntervalGranule) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("coverage data"));
    }
    let inside = data.iter().filter(|&&x| g.contains(x)).count();
    Ok(inside as f64 / data.len() as f64)
}

pub fn interval_specificity(g: &IntervalGranule) -> f64 {
    (1.0 - (g.b - g.a) / g.calibration_range).max(0.0)
}

/// Sum of membership degrees, or their mean when `normalize` is set.
pub fn fuzzy_coverage(data: &[f64], g: &GaussianGranule, normalize: bool) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("coverage data"));
    }
    let total: f64 = data.iter().map(|&x| g.membership(x)).sum();
    Ok(if normalize { total / data.len() as f64 } else { total })
}

/// Result of an interval search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalFit {
    pub granule: IntervalGranule,
    pub coverage: f64,
    pub specificity: f64,
}

impl IntervalFit {
    pub fn product(&self) -> f64 {
        self.coverage * self.specificity
    }
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Interval maximizing coverage times specificity.
///
/// Candidate endpoints are the distinct data values together with the
/// median; every ordered pair `a <= b` of candidates is scored. The
/// calibration range is `max - min` of the data (1 for constant data).
pub fn optimize_interval(data: &[f64]) -> Result<IntervalFit> {
    if data.is_empty() {
        return Err(Error::Empty("interval data"));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("interval data must be finite".into()));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if lo == hi {
        return Ok(IntervalFit { granule: IntervalGranule { a: lo, b: lo, calibration_range: 1.0 }, coverage: 1.0, specificity: 1.0 });
    }
    let range = hi - lo;
    let mut candidates = sorted.clone();
    candidates.push(median_of_sorted(&sorted));
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let n = sorted.len() as f64;
    let mut best: Option<IntervalFit> = None;
    for (i, &a) in candidates.iter().enumerate() {
        let below = sorted.partition_point(|&x| x < a);
        for &b in &candidates[i..] {
            let upto = sorted.partition_point(|&x| x <= b);
            let granule = IntervalGranule { a, b, calibration_range: range };
            let fit = IntervalFit {
                granule,
                coverage: (upto - below) as f64 / n,
                specificity: interval_specificity(&granule),
            };
            // Strict improvement keeps the first (narrowest-from-left) optimum.
            if best.is_none_or(|cur| fit.product() > cur.product()) {
                best = Some(fit);
            }
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Values with non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSample {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: values.len(), got: weights.len() });
        }
        if values.is_empty() {
            return Err(Error::Empty("weighted sample"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Domain("weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { values, weights })
    }

    /// Normalizes raw non-negative weights to unit sum.
    pub fn from_raw(values: Vec<f64>, raw: &[f64]) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Domain("total weight must be positive".into()));
        }
        Self::new(values, raw.iter().map(|w| w / total).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weighted expectation of the membership of a Gaussian centered at `center` with width `sigma`.
    pub fn coverage(&self, center: f64, sigma: f64) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(x, w)| {
                let z = (x - center) / sigma;
                w * (-z * z).exp()
            })
            .sum()
    }
}

/// Number of points on the width search grid.
pub const WIDTH_GRID_POINTS: usize = 100;

/// `{0.01, 0.02, ..., 1.00}`.
pub fn width_grid() -> impl Iterator<Item = f64> {
    (1..=WIDTH_GRID_POINTS).map(|k| k as f64 / WIDTH_GRID_POINTS as f64)
}

/// Width on the search grid maximizing `coverage(sigma) * (1 - sigma)` on the unit interval.
///
/// Ties resolve to the smaller width.
pub fn optimize_width(center: f64, sample: &WeightedSample) -> f64 {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for sigma in width_grid() {
        let score = sample.coverage(center, sigma) * (1.0 - sigma);
        if score > best.0 {
            best = (score, sigma);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn g(center: f64, spread: f64, range: f64) -> GaussianGranule {
        GaussianGranule::new(center, spread, range, Units::Native).unwrap()
    }

    #[test]
    fn membership_values() {
        let b = g(2.0, 0.5, 1.0);
        assert_eq!(b.membership(2.0), 1.0);
        assert_abs_diff_eq!(b.membership(2.5), (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(b.membership(2.5), 0.367_879, epsilon = 1e-6);
        assert_eq!(b.membership(2.0 + 0.37), b.membership(2.0 - 0.37));
    }

    #[test]
    fn granule_validation() {
        assert!(GaussianGranule::new(0.0, 0.0, 1.0, Units::Native).is_err());
        assert!(GaussianGranule::new(0.0, 1.0, -1.0, Units::Native).is_err());
        assert!(IntervalGranule::new(2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn interval_coverage_counts() {
        let data = [1.0, 2.0, 3.0];
        assert_eq!(interval_coverage(&data, &IntervalGranule::new(0.0, 10.0, 1.0).unwrap()).unwrap(), 1.0);
        assert_abs_diff_eq!(
            interval_coverage(&data, &IntervalGranule::new(2.0, 2.0, 1.0).unwrap()).unwrap(),
            1.0 / 3.0
        );
        let four = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(interval_coverage(&four, &IntervalGranule::new(1.5, 3.5, 1.0).unwrap()).unwrap(), 0.5);
        assert!(matches!(interval_coverage(&[], &IntervalGranule::new(0.0, 1.0, 1.0).unwrap()), Err(Error::Empty(_))));
    }

    #[test]
    fn interval_specificity_values() {
        assert_eq!(interval_specificity(&IntervalGranule::new(0.3, 0.3, 2.0).unwrap()), 1.0);
        assert_eq!(interval_specificity(&IntervalGranule::new(0.0, 2.0, 2.0).unwrap()), 0.0);
        assert_abs_diff_eq!(interval_specificity(&IntervalGranule::new(0.2, 0.6, 1.0).unwrap()), 0.6, epsilon = 1e-15);
        assert_eq!(interval_specificity(&IntervalGranule::new(0.0, 5.0, 2.0).unwrap()), 0.0);
    }

    #[test]
    fn fuzzy_coverage_values() {
        let b = g(1.0, 0.5, 1.0);
        assert_eq!(fuzzy_coverage(&[1.0; 7], &b, false).unwrap(), 7.0);
        assert_eq!(fuzzy_coverage(&[1.0; 7], &b, true).unwrap(), 1.0);
        assert_abs_diff_eq!(fuzzy_coverage(&[1.5], &b, false).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        let h = g(0.5, 0.5, 1.0);
        assert_abs_diff_eq!(fuzzy_coverage(&[0.0, 1.0], &h, false).unwrap(), 0.735_758_882_342_884_7, epsilon = 1e-15);
        assert!(fuzzy_coverage(&[], &h, true).is_err());
    }

    /// Specificity by integrating alpha-cut specificities, with cut widths found by bisection
    /// on the membership function itself. The substitution alpha = s^2 removes the log
    /// singularity at alpha = 0 before applying the trapezoid rule.
    fn alpha_cut_specificity(spread: f64, range: f64, points: usize) -> f64 {
        let granule = g(0.0, spread, range);
        let half_width = |alpha: f64| {
            let (mut lo, mut hi) = (0.0, spread);
            while granule.membership(hi) >= alpha {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if granule.membership(mid) >= alpha {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let integrand = |s: f64| {
            if s == 0.0 {
                return 0.0;
            }
            let alpha = s * s;
            (1.0 - 2.0 * half_width(alpha) / range) * 2.0 * s
        };
        let h = 1.0 / (points - 1) as f64;
        let inner: f64 = (1..points - 1).map(|i| integrand(i as f64 * h)).sum();
        h * (inner + 0.5 * (integrand(0.0) + integrand(1.0)))
    }

    #[test]
    fn specificity_limits() {
        assert_abs_diff_eq!(g(0.0, 1e-12, 1.0).specificity(), 1.0, epsilon = 1e-11);
        let zero = g(0.0, 1.0 / std::f64::consts::PI.sqrt(), 1.0).specificity();
        assert_abs_diff_eq!(zero, 0.0, epsilon = 1e-15);
        assert_eq!(g(0.0, 5.0, 1.0).specificity(), 0.0);
    }

    #[test]
    fn specificity_matches_alpha_cut_integration() {
        let numeric = alpha_cut_specificity(0.2, 1.0, 10_000);
        assert_abs_diff_eq!(g(0.0, 0.2, 1.0).specificity(), numeric, epsilon = 1e-4);
    }

    fn brute_force_interval(data: &[f64]) -> f64 {
        let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut best: f64 = 0.0;
        for &a in data {
            for &b in data {
                if a > b {
                    continue;
                }
                let cov = data.iter().filter(|&&x| x >= a && x <= b).count() as f64 / data.len() as f64;
                let sp = (1.0 - (b - a) / (hi - lo)).max(0.0);
                best = best.max(cov * sp);
            }
        }
        best
    }

    #[test]
    fn interval_search_beats_endpoint_pairs() {
        let data = [0.0, 0.5, 1.0];
        let fit = optimize_interval(&data).unwrap();
        assert!(fit.product() >= brute_force_interval(&data) - 1e-15);

        let mut rng = crate::seeds::rng(4);
        let uniform: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let fit = optimize_interval(&uniform).unwrap();
        let oracle = brute_force_interval(&uniform);
        assert!(fit.product() >= oracle - 1e-15);
        assert!(fit.product() - oracle < 1.0 / 200.0);
    }

    #[test]
    fn constant_data_gives_point_interval() {
        let fit = optimize_interval(&[2.5; 4]).unwrap();
        assert_eq!((fit.granule.a, fit.granule.b), (2.5, 2.5));
        assert_eq!((fit.coverage, fit.specificity), (1.0, 1.0));
    }

    fn grid_oracle(center: f64, values: &[f64], weights: &[f64]) -> f64 {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in 1..=100 {
            let sigma = k as f64 / 100.0;
            let cov: f64 = values
                .iter()
                .zip(weights)
                .map(|(x, w)| w * (-((x - center) / sigma).powi(2)).exp())
                .sum();
            if cov * (1.0 - sigma) > best.0 {
                best = (cov * (1.0 - sigma), sigma);
            }
        }
        best.1
    }

    #[test]
    fn width_at_center_is_smallest() {
        let s = WeightedSample::new(vec![0.4], vec![1.0]).unwrap();
        assert_eq!(optimize_width(0.4, &s), 0.01);
    }

    #[test]
    fn width_symmetric_pair_matches_grid() {
        let s = WeightedSample::new(vec![0.2, 0.8], vec![0.5, 0.5]).unwrap();
        assert_eq!(optimize_width(0.5, &s), grid_oracle(0.5, &[0.2, 0.8], &[0.5, 0.5]));
    }

    #[test]
    fn width_grows_with_distance() {
        let near = WeightedSample::new(vec![0.05], vec![1.0]).unwrap();
        let far = WeightedSample::new(vec![0.95], vec![1.0]).unwrap();
        let w_near = optimize_width(0.05, &near);
        let w_far = optimize_width(0.05, &far);
        assert_eq!(w_far, grid_oracle(0.05, &[0.95], &[1.0]));
        assert!(w_far > w_near);
    }

    #[test]
    fn weighted_sample_validation() {
        assert!(WeightedSample::new(vec![0.1, 0.2], vec![0.5, 0.6]).is_err());
        assert!(WeightedSample::new(vec![0.1, 0.2], vec![1.5, -0.5]).is_err());
        assert!(WeightedSample::new(vec![0.1], vec![0.5, 0.5]).is_err());
        let s = WeightedSample::from_raw(vec![0.1, 0.2], &[2.0, 6.0]).unwrap();
        assert_eq!(s.weights(), &[0.25, 0.75]);
    }

    proptest! {
        #[test]
        fn membership_in_unit_interval(c in -5.0..5.0f64, s in 0.01..3.0f64, x in -10.0..10.0f64) {
            let m = g(c, s, 1.0).membership(x);
            prop_assert!((0.0..=1.0).contains(&m));
            if x != c { prop_assert!(m < 1.0 || (x - c).abs() / s < 1e-7); }
        }

        #[test]
        fn enlargement_is_monotone(
            data in proptest::collection::vec(0.0..1.0f64, 1..40),
            a in 0.0..0.5f64, w in 0.0..0.5f64, grow in 0.0..0.3f64,
        ) {
            let small = IntervalGranule::new(a, a + w, 1.0).unwrap();
            let big = IntervalGranule::new(a - grow, a + w + grow, 1.0).unwrap();
            prop_assert!(interval_coverage(&data, &big).unwrap() >= interval_coverage(&data, &small).unwrap());
            prop_assert!(interval_specificity(&big) <= interval_specificity(&small));
        }

        #[test]
        fn width_attains_grid_maximum(
            center in 0.0..1.0f64,
            pts in proptest::collection::vec((0.0..1.0f64, 0.01..1.0f64), 1..30),
        ) {
            let (values, raw): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let s = WeightedSample::from_raw(values.clone(), &raw).unwrap();
            let sigma = optimize_width(center, &s);
            prop_assert!(width_grid().any(|g| g == sigma));
            prop_assert_eq!(sigma, grid_oracle(center, &values, s.weights()));
        }
    }
}
