//! Closed-form physics benchmarks and the datasets drawn from them.
//!
//! Two responses are provided: the scaled concentration of a two-spill
//! pollutant dispersion and the cycle time of a gas-spring piston. Local
//! training data come from a small observation window at a fixed parameter
//! vector; knowledge and global validation data cover the full domain with
//! the physical parameters redrawn for every sample.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

/// Smallest time offset past the second spill at which the second source is evaluated.
pub const SECOND_SOURCE_MIN_OFFSET: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl ParameterSpec {
    pub fn new(name: impl Into<String>, min: f64, max: f64) -> Result<Self> {
        let name = name.into();
        if !(min < max) {
            return Err(Error::Config(format!("parameter `{name}`: min {min} must be < max {max}")));
        }
        Ok(Self { name, min, max })
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    /// Interval `[mid - r*width/2, mid + r*width/2]` used when sampling at width ratio `r`.
    pub fn sampling_interval(&self, r: f64) -> (f64, f64) {
        let half = 0.5 * r * self.width();
        (self.midpoint() - half, self.midpoint() + half)
    }
}

/// Draws one parameter vector with every component uniform on its interval shrunk by `r`.
pub fn sample_parameters<R: Rng + ?Sized>(specs: &[ParameterSpec], r: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Config(format!("width ratio {r} outside [0, 1]")));
    }
    Ok(specs
        .iter()
        .map(|spec| {
            let u: f64 = rng.random();
            // r = 0 collapses to the midpoint exactly.
            spec.midpoint() + r * spec.width() * (u - 0.5)
        })
        .collect())
}

/// Axis-aligned box, one `[lower, upper]` pair per input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainBox {
    pub bounds: Vec<[f64; 2]>,
}

impl DomainBox {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Config("domain box has no dimensions".into()));
        }
        for (d, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Config(format!("dimension {d}: lower {lo} must be < upper {hi}")));
            }
        }
        Ok(Self { bounds })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains_box(&self, inner: &DomainBox) -> bool {
        inner.dim() == self.dim()
            && inner
                .bounds
                .iter()
                .zip(&self.bounds)
                .all(|(i, o)| i[0] >= o[0] && i[1] <= o[1])
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.bounds).all(|(v, [lo, hi])| *v >= *lo && *v <= *hi)
    }

    /// Uniform point on the half-open box `(lower, upper]`.
    ///
    /// The open lower end keeps the dispersion time strictly positive.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|[lo, hi]| {
                let u: f64 = rng.random();
                hi - u * (hi - lo)
            })
            .collect()
    }

    /// Affine map of each coordinate onto `[0, 1]`.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.bounds).map(|(v, [lo, hi])| (v - lo) / (hi - lo)).collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.bounds).map(|(v, [lo, hi])| lo + v * (hi - lo)).collect()
    }

    /// Copy of `data` with every input mapped onto the unit box.
    pub fn normalize_dataset(&self, data: &LabeledDataset) -> LabeledDataset {
        LabeledDataset {
            inputs: data.inputs.iter().map(|x| self.normalize(x)).collect(),
            targets: data.targets.clone(),
            seed: data.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub seed: u64,
}

impl LabeledDataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>, seed: u64) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch { expected: inputs.len(), got: targets.len() });
        }
        if let Some(first) = inputs.first() {
            let n = first.len();
            if let Some(bad) = inputs.iter().find(|x| x.len() != n) {
                return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
            }
        }
        Ok(Self { inputs, targets, seed })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    /// Splits into the first `n` pairs and the remainder.
    pub fn split_at(&self, n: usize) -> (LabeledDataset, LabeledDataset) {
        let n = n.min(self.len());
        let head = LabeledDataset {
            inputs: self.inputs[..n].to_vec(),
            targets: self.targets[..n].to_vec(),
            seed: self.seed,
        };
        let tail = LabeledDataset {
            inputs: self.inputs[n..].to_vec(),
            targets: self.targets[n..].to_vec(),
            seed: self.seed,
        };
        (head, tail)
    }

    /// `max - min` of the targets.
    pub fn target_span(&self) -> f64 {
        let (lo, hi) = self
            .targets
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| (lo.min(t), hi.max(t)));
        hi - lo
    }
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Scaled concentration `sqrt(4*pi*C(s, t))` of the two-spill dispersion model.
///
/// `w = (R, Y, L, tau)`: spilled mass, diffusion rate, second spill location
/// and second spill time.
pub fn env_response(s: f64, t: f64, w: &[f64]) -> Result<f64> {
    let [mass, diffusion, location, tau] = w else {
        return Err(Error::DimensionMismatch { expected: 4, got: w.len() });
    };
    if !(t > 0.0) {
        return Err(Error::Domain(format!("dispersion time must be positive, got {t}")));
    }
    let plume = |ds: f64, dt: f64| {
        mass / (4.0 * PI * diffusion * dt).sqrt() * (-(ds * ds) / (4.0 * diffusion * dt)).exp()
    };
    let mut concentration = plume(s, t);
    if t > *tau {
        concentration += plume(s - location, (t - tau).max(SECOND_SOURCE_MIN_OFFSET));
    }
    let f = (4.0 * PI * concentration).sqrt();
    if !f.is_finite() {
        return Err(Error::Evaluation { quantity: "concentration", detail: format!("non-finite at s={s}, t={t}") });
    }
    Ok(f)
}

/// Intermediate quantities of the piston model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PistonState {
    /// Force term `A = P0*G + 19.62*xi - k*V0/G`.
    pub force: f64,
    /// Gas volume `V`.
    pub volume: f64,
    /// Cycle time in seconds.
    pub cycle_time: f64,
}

/// Full evaluation chain `A -> V -> psi` for piston weight `xi` and surface area `gamma`.
///
/// `w = (V0, k, P0, Ta, T0)`.
pub fn piston_state(xi: f64, gamma: f64, w: &[f64]) -> Result<PistonState> {
    let [v0, k, p0, ta, t0] = w else {
        return Err(Error::DimensionMismatch { expected: 5, got: w.len() });
    };
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("surface area must be positive, got {gamma}")));
    }
    if !(*k > 0.0) {
        return Err(Error::Domain(format!("spring coefficient must be positive, got {k}")));
    }
    let force = p0 * gamma + 19.62 * xi - k * v0 / gamma;
    let gas = 4.0 * k * p0 * v0 * ta / t0;
    let radicand = force * force + gas;
    if !(radicand >= 0.0) {
        return Err(Error::Evaluation { quantity: "radicand", detail: format!("{radicand} < 0") });
    }
    let root = radicand.sqrt();
    // Rationalized when A > 0 to avoid cancellation in sqrt(A^2 + g) - A.
    let volume = if force > 0.0 {
        gamma / (2.0 * k) * gas / (root + force)
    } else {
        gamma / (2.0 * k) * (root - force)
    };
    if !(volume > 0.0) {
        return Err(Error::Evaluation { quantity: "volume", detail: format!("V = {volume} is not positive") });
    }
    let stiffness = k + gamma * gamma * p0 * v0 * ta / (t0 * volume * volume);
    let ratio = xi / stiffness;
    if !(ratio >= 0.0) {
        return Err(Error::Evaluation { quantity: "cycle_time", detail: format!("negative radicand {ratio}") });
    }
    let cycle_time = 2.0 * PI * ratio.sqrt();
    if !cycle_time.is_finite() {
        return Err(Error::Evaluation { quantity: "cycle_time", detail: "non-finite".into() });
    }
    Ok(PistonState { force, volume, cycle_time })
}

pub fn piston_response(xi: f64, gamma: f64, w: &[f64]) -> Result<f64> {
    piston_state(xi, gamma, w).map(|s| s.cycle_time)
}

/// The two benchmark problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    #[default]
    Env,
    Piston,
}

impl Benchmark {
    pub fn id(self) -> &'static str {
        match self {
            Benchmark::Env => "env",
            Benchmark::Piston => "piston",
        }
    }

    pub fn input_names(self) -> [&'static str; 2] {
        match self {
            Benchmark::Env => ["s", "t"],
            Benchmark::Piston => ["xi", "gamma"],
        }
    }

    pub fn domain(self) -> DomainBox {
        match self {
            Benchmark::Env => DomainBox { bounds: vec![[0.0, 3.0], [0.0, 60.0]] },
            Benchmark::Piston => DomainBox { bounds: vec![[30.0, 60.0], [0.005, 0.020]] },
        }
    }

    pub fn parameter_specs(self) -> Vec<ParameterSpec> {
        let spec = |name: &str, min, max| ParameterSpec { name: name.into(), min, max };
        match self {
            Benchmark::Env => vec![
                spec("R", 7.0, 13.0),
                spec("Y", 0.02, 0.12),
                spec("L", 0.01, 3.0),
                spec("tau", 30.01, 30.295),
            ],
            Benchmark::Piston => vec![
                spec("V0", 0.002, 0.010),
                spec("k", 1000.0, 5000.0),
                spec("P0", 9.0e4, 1.1e5),
                spec("Ta", 290.0, 296.0),
                spec("T0", 340.0, 360.0),
            ],
        }
    }

    /// Parameter vector generating the local data.
    pub fn nominal_parameters(self) -> Vec<f64> {
        match self {
            Benchmark::Env => vec![10.0, 0.07, 1.505, 30.1525],
            Benchmark::Piston => self.parameter_specs().iter().map(ParameterSpec::midpoint).collect(),
        }
    }

    pub fn response(self, x: &[f64], w: &[f64]) -> Result<f64> {
        let [a, b] = x else {
            return Err(Error::DimensionMismatch { expected: 2, got: x.len() });
        };
        match self {
            Benchmark::Env => env_response(*a, *b, w),
            Benchmark::Piston => piston_response(*a, *b, w),
        }
    }

    pub fn window_ids() -> [&'static str; 4] {
        ["omega1", "omega2", "omega3", "omega4"]
    }

    /// Built-in observation windows `omega1..omega4`.
    pub fn window(self, id: &str) -> Option<DomainBox> {
        let bounds = match (self, id) {
            (Benchmark::Env, "omega1") => [[1.0, 1.8], [20.0, 32.0]],
            (Benchmark::Env, "omega2") => [[2.4, 3.0], [2.0, 12.0]],
            (Benchmark::Env, "omega3") => [[2.4, 3.0], [45.0, 60.0]],
            (Benchmark::Env, "omega4") => [[1.2, 1.9], [30.3, 40.0]],
            (Benchmark::Piston, "omega1") => [[40.0, 45.0], [0.010, 0.013]],
            (Benchmark::Piston, "omega2") => [[50.0, 55.0], [0.005, 0.008]],
            (Benchmark::Piston, "omega3") => [[50.0, 55.0], [0.014, 0.017]],
            (Benchmark::Piston, "omega4") => [[30.0, 35.0], [0.014, 0.017]],
            _ => return None,
        };
        Some(DomainBox { bounds: bounds.to_vec() })
    }
}

impl std::fmt::Display for Benchmark {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "env" => Ok(Benchmark::Env),
            "piston" => Ok(Benchmark::Piston),
            other => Err(Error::Config(format!("unknown benchmark `{other}` (expected env|piston)"))),
        }
    }
}

/// `n` uniform points on `window` labeled by the response at the fixed parameters `w0`.
pub fn sample_local(
    benchmark: Benchmark,
    window: &DomainBox,
    n: usize,
    w0: &[f64],
    seed: u64,
) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::Config("local sample size must be at least 1".into()));
    }
    let window = DomainBox::new(window.bounds.clone())?;
    if !benchmark.domain().contains_box(&window) {
        return Err(Error::Config(format!("window {:?} is not contained in the {benchmark} domain", window.bounds)));
    }
    let mut rng = seeds::rng(seed);
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x = window.sample_point(&mut rng);
        targets.push(benchmark.response(&x, w0)?);
        inputs.push(x);
    }
    LabeledDataset::new(inputs, targets, seed)
}

/// `n` uniform points on `domain`, each labeled under its own parameter draw at width ratio `r`.
pub fn sample_knowledge(
    benchmark: Benchmark,
    domain: &DomainBox,
    n: usize,
    specs: &[ParameterSpec],
    r: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::Config("knowledge sample size must be at least 1".into()));
    }
    if !benchmark.domain().contains_box(domain) {
        return Err(Error::Config(format!("box {:?} is not contained in the {benchmark} domain", domain.bounds)));
    }
    let mut rng = seeds::rng(seed);
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x = domain.sample_point(&mut rng);
        let w = sample_parameters(specs, r, &mut rng)?;
        targets.push(benchmark.response(&x, &w)?);
        inputs.push(x);
    }
    LabeledDataset::new(inputs, targets, seed)
}

/// Uniform unlabeled points on `domain`.
pub fn sample_points(domain: &DomainBox, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeds::rng(seed);
    (0..n).map(|_| domain.sample_point(&mut rng)).collect()
}

/// New dataset with Gaussian noise of standard deviation `alpha * std(targets)` added to the targets.
pub fn inject_noise(data: &LabeledDataset, alpha: f64, seed: u64) -> Result<LabeledDataset> {
    if !(alpha >= 0.0) {
        return Err(Error::Config(format!("noise level {alpha} must be non-negative")));
    }
    let sigma = alpha * sample_std(&data.targets);
    if sigma == 0.0 {
        return Ok(data.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = seeds::rng(seed);
    let targets = data.targets.iter().map(|t| t + normal.sample(&mut rng)).collect();
    Ok(LabeledDataset { inputs: data.inputs.clone(), targets, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn baseline_env() -> Vec<f64> {
        Benchmark::Env.nominal_parameters()
    }

    fn midpoint_piston() -> Vec<f64> {
        vec![0.006, 3000.0, 1e5, 293.0, 350.0]
    }

    // Reference values evaluated at 30 digits with mpmath before the build.
    #[test]
    fn env_matches_high_precision_reference() {
        let f = env_response(0.0, 10.0, &baseline_env()).unwrap();
        assert_abs_diff_eq!(f, 6.509_205_099_437_55, epsilon = 1e-3);
        assert_abs_diff_eq!(f, 6.509_205_099_437_55, epsilon = 1e-12);
        let g = env_response(2.0, 45.0, &baseline_env()).unwrap();
        assert_abs_diff_eq!(g, 6.879_117_098_508_64, epsilon = 1e-12);
    }

    #[test]
    fn env_second_source_inactive_at_spill_time() {
        let w = baseline_env();
        let at_tau = env_response(1.505, 30.1525, &w).unwrap();
        let single = {
            let c = 10.0 / (4.0 * PI * 0.07 * 30.1525_f64).sqrt()
                * (-(1.505_f64 * 1.505) / (4.0 * 0.07 * 30.1525)).exp();
            (4.0 * PI * c).sqrt()
        };
        assert_abs_diff_eq!(at_tau, single, epsilon = 1e-14);
        assert_abs_diff_eq!(at_tau, 4.319_568_982_771_83, epsilon = 1e-12);
    }

    #[test]
    fn env_first_source_even_in_space() {
        let w = baseline_env();
        for &(s, t) in &[(0.3, 5.0), (1.1, 12.0), (2.9, 29.0)] {
            assert_eq!(env_response(s, t, &w).unwrap(), env_response(-s, t, &w).unwrap());
        }
    }

    #[test]
    fn env_rejects_non_positive_time() {
        assert!(matches!(env_response(1.0, 0.0, &baseline_env()), Err(Error::Domain(_))));
        assert!(matches!(env_response(1.0, -1.0, &baseline_env()), Err(Error::Domain(_))));
    }

    #[test]
    fn env_just_past_activation_is_finite() {
        let w = baseline_env();
        let f = env_response(1.505, 30.1525 + 1e-12, &w).unwrap();
        assert!(f.is_finite() && f > 0.0);
    }

    #[test]
    fn piston_matches_reference() {
        let psi = piston_response(45.0, 0.0125, &midpoint_piston()).unwrap();
        assert_abs_diff_eq!(psi, 0.464_397_022_471_802, epsilon = 1e-3);
        assert_abs_diff_eq!(psi, 0.464_397_022_471_802, epsilon = 1e-12);
    }

    #[test]
    fn piston_force_term_by_substitution() {
        let w = midpoint_piston();
        let state = piston_state(45.0, 0.0125, &w).unwrap();
        let expected = 1e5 * 0.0125 + 19.62 * 45.0 - 3000.0 * 0.006 / 0.0125;
        assert_abs_diff_eq!(state.force, expected, epsilon = 1e-9);
        assert_abs_diff_eq!(state.force, 692.9, epsilon = 1e-9);
        assert_abs_diff_eq!(state.volume, 0.003_871_016_342_153_734, epsilon = 1e-15);
    }

    #[test]
    fn heavier_piston_is_slower() {
        let w = midpoint_piston();
        assert!(piston_response(60.0, 0.0125, &w).unwrap() > piston_response(30.0, 0.0125, &w).unwrap());
    }

    #[test]
    fn piston_rejects_bad_inputs() {
        let w = midpoint_piston();
        assert!(matches!(piston_response(45.0, 0.0, &w), Err(Error::Domain(_))));
        let mut neg_k = w.clone();
        neg_k[1] = -1.0;
        assert!(matches!(piston_response(45.0, 0.01, &neg_k), Err(Error::Domain(_))));
        // A negative gas term drives the radicand below zero.
        let mut bad = w.clone();
        bad[0] = -0.5;
        assert!(piston_response(45.0, 0.01, &bad).is_err());
    }

    #[test]
    fn width_ratio_intervals() {
        let v0 = ParameterSpec::new("V0", 0.002, 0.010).unwrap();
        let (lo, hi) = v0.sampling_interval(0.5);
        assert_abs_diff_eq!(lo, 0.004, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 0.008, epsilon = 1e-15);
        assert_eq!(v0.sampling_interval(1.0), (0.002, 0.010));
        assert_eq!(v0.sampling_interval(0.0), (0.006, 0.006));
    }

    #[test]
    fn zero_width_ratio_fixes_midpoints() {
        let specs = Benchmark::Piston.parameter_specs();
        let mut rng = seeds::rng(3);
        for _ in 0..10 {
            let w = sample_parameters(&specs, 0.0, &mut rng).unwrap();
            let mids: Vec<f64> = specs.iter().map(ParameterSpec::midpoint).collect();
            assert_eq!(w, mids);
        }
        assert!(sample_parameters(&specs, 1.5, &mut rng).is_err());
    }

    #[test]
    fn env_baseline_is_range_midpoint() {
        let mids: Vec<f64> = Benchmark::Env.parameter_specs().iter().map(ParameterSpec::midpoint).collect();
        for (a, b) in mids.iter().zip(baseline_env()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn local_sampling() {
        let window = Benchmark::Env.window("omega1").unwrap();
        let data = sample_local(Benchmark::Env, &window, 1000, &baseline_env(), 11).unwrap();
        assert_eq!(data.len(), 1000);
        assert!(data.targets.iter().all(|t| t.is_finite()));
        assert!(data.inputs.iter().all(|x| window.contains_point(x)));

        let one = sample_local(Benchmark::Env, &window, 1, &baseline_env(), 11).unwrap();
        assert_eq!(one.len(), 1);

        let flat = DomainBox { bounds: vec![[1.0, 1.0], [20.0, 30.0]] };
        assert!(sample_local(Benchmark::Env, &flat, 10, &baseline_env(), 1).is_err());
        let outside = DomainBox { bounds: vec![[2.0, 4.0], [20.0, 30.0]] };
        assert!(matches!(sample_local(Benchmark::Env, &outside, 10, &baseline_env(), 1), Err(Error::Config(_))));
    }

    #[test]
    fn knowledge_sampling_determinism_and_degenerate_width() {
        let b = Benchmark::Piston;
        let specs = b.parameter_specs();
        let a1 = sample_knowledge(b, &b.domain(), 200, &specs, 1.0, 5).unwrap();
        let a2 = sample_knowledge(b, &b.domain(), 200, &specs, 1.0, 5).unwrap();
        assert_eq!(a1, a2);

        let fixed = sample_knowledge(b, &b.domain(), 200, &specs, 0.0, 5).unwrap();
        let w0 = b.nominal_parameters();
        for (x, t) in fixed.inputs.iter().zip(&fixed.targets) {
            assert_abs_diff_eq!(*t, b.response(x, &w0).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_width_targets_follow_nominal_surface() {
        let b = Benchmark::Env;
        let specs = b.parameter_specs();
        let fixed = sample_knowledge(b, &b.domain(), 500, &specs, 0.0, 21).unwrap();
        let w0 = b.nominal_parameters();
        for (x, t) in fixed.inputs.iter().zip(&fixed.targets) {
            assert_abs_diff_eq!(*t, b.response(x, &w0).unwrap(), epsilon = 1e-12);
        }
        let wide = sample_knowledge(b, &b.domain(), 500, &specs, 1.0, 21).unwrap();
        assert_eq!(wide.inputs, fixed.inputs);
        assert_ne!(wide.targets, fixed.targets);
    }

    #[test]
    fn noise_levels() {
        let b = Benchmark::Piston;
        let data = sample_local(b, &b.window("omega1").unwrap(), 100, &b.nominal_parameters(), 2).unwrap();
        assert_eq!(inject_noise(&data, 0.0, 9).unwrap(), data);
        let alphas: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let noisy: Vec<_> = alphas.iter().map(|&a| inject_noise(&data, a, 9).unwrap()).collect();
        assert_eq!(noisy.len(), 9);
        assert!(inject_noise(&data, -0.1, 9).is_err());
    }

    #[test]
    fn noise_scale_matches_alpha() {
        let n = 100_000;
        let mut rng = seeds::rng(77);
        let inputs: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let targets: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 1.0).collect();
        let data = LabeledDataset::new(inputs, targets, 0).unwrap();
        let noisy = inject_noise(&data, 0.5, 13).unwrap();
        let added: Vec<f64> = noisy.targets.iter().zip(&data.targets).map(|(a, b)| a - b).collect();
        let expected = 0.5 * sample_std(&data.targets);
        let got = sample_std(&added);
        assert!((got / expected - 1.0).abs() < 0.03, "{got} vs {expected}");
    }

    proptest! {
        #[test]
        fn piston_volume_solves_quadratic(
            xi in 30.0..60.0f64, gamma in 0.005..0.020f64,
            u in proptest::collection::vec(0.0..1.0f64, 5),
        ) {
            let specs = Benchmark::Piston.parameter_specs();
            let w: Vec<f64> = specs.iter().zip(&u).map(|(s, u)| s.min + u * s.width()).collect();
            let st = piston_state(xi, gamma, &w).unwrap();
            let lhs = 2.0 * w[1] * st.volume / gamma + st.force;
            let rhs = (st.force.powi(2) + 4.0 * w[1] * w[2] * w[0] * w[3] / w[4]).sqrt();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs());
        }

        #[test]
        fn noise_preserves_inputs(alpha in 0.0..2.0f64, seed in 0u64..1000) {
            let b = Benchmark::Env;
            let data = sample_local(b, &b.window("omega2").unwrap(), 20, &b.nominal_parameters(), seed).unwrap();
            let noisy = inject_noise(&data, alpha, seed + 1).unwrap();
            prop_assert_eq!(&noisy.inputs, &data.inputs);
        }
    }
}
