//! Knowledge landmarks: Gaussian output contexts placed across the
//! operational output range, conditional fuzzy C-means in the normalized
//! input space for each context, and elevation of every prototype to a
//! product-t-norm input granule.

use rand::seq::index::sample_weighted;
use serde::{Deserialize, Serialize};

use crate::benchgen::{DomainBox, LabeledDataset};
use crate::error::{Error, Result};
use crate::granulation::{optimize_width, GaussianGranule, Units, WeightedSample};
use crate::seeds;

/// Squared distance below which a sample is treated as coincident with a prototype.
const COINCIDENT_SQ: f64 = 1e-24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputContext {
    pub index: usize,
    pub granule: GaussianGranule,
}

/// Linear-interpolation percentile (`p` in `[0, 100]`) of unsorted data.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, p)
}

fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Neighbor rank `ceil(rho * n)` used for the density-adaptive spreads.
pub fn neighbor_rank(n: usize, rho: f64) -> usize {
    // The small offset keeps e.g. 0.2 * 1000 from rounding up to 201.
    ((rho * n as f64) - 1e-9).ceil().max(1.0) as usize
}

/// `count` Gaussian contexts with centers uniformly spaced over the
/// 2.5th..97.5th percentile range and spreads equal to the distance to the
/// `ceil(rho * N)`-th nearest in-range target.
pub fn build_output_contexts(targets: &[f64], count: usize, rho: f64) -> Result<Vec<OutputContext>> {
    if count == 0 {
        return Err(Error::Config("number of contexts must be at least 1".into()));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Config(format!("neighborhood fraction {rho} outside (0, 1)")));
    }
    if targets.len() < count {
        return Err(Error::Config(format!("{} targets cannot support {count} contexts", targets.len())));
    }
    let mut sorted = targets.to_vec();
    sorted.sort_by(f64::total_cmp);
    let low = percentile_sorted(&sorted, 2.5);
    let high = percentile_sorted(&sorted, 97.5);
    let range = high - low;
    if !(range > 0.0) {
        return Err(Error::Config("operational output range is degenerate".into()));
    }
    let in_range: Vec<f64> = sorted.iter().copied().filter(|y| *y >= low && *y <= high).collect();
    let kappa = neighbor_rank(in_range.len(), rho);
    if in_range.len() < kappa {
        return Err(Error::Config(format!("{} in-range samples, need at least {kappa}", in_range.len())));
    }

    let mut distances = vec![0.0; in_range.len()];
    (0..count)
        .map(|i| {
            let center = if count == 1 { 0.5 * (low + high) } else { low + range * i as f64 / (count - 1) as f64 };
            for (d, y) in distances.iter_mut().zip(&in_range) {
                *d = (y - center).abs();
            }
            let (_, spread, _) = distances.select_nth_unstable_by(kappa - 1, f64::total_cmp);
            let spread = *spread;
            if !(spread > 0.0) {
                return Err(Error::Config(format!("context {i} has zero spread")));
            }
            Ok(OutputContext { index: i, granule: GaussianGranule::new(center, spread, range, Units::Native)? })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcmSettings {
    pub clusters: usize,
    pub fuzzifier: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for FcmSettings {
    fn default() -> Self {
        Self { clusters: 5, fuzzifier: 2.0, tolerance: 1e-6, max_iter: 300 }
    }
}

/// Output of one conditional FCM run.
#[derive(Debug, Clone)]
pub struct FcmRun {
    pub prototypes: Vec<Vec<f64>>,
    /// `memberships[j][k]`: membership of sample `k` in cluster `j`.
    pub memberships: Vec<Vec<f64>>,
    /// Objective after every half step (partition update, then prototype update).
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn objective(points: &[Vec<f64>], prototypes: &[Vec<f64>], u: &[Vec<f64>], m: f64) -> f64 {
    prototypes
        .iter()
        .zip(u)
        .map(|(v, uj)| points.iter().zip(uj).map(|(x, &w)| if w > 0.0 { w.powf(m) * sq_dist(x, v) } else { 0.0 }).sum::<f64>())
        .sum()
}

fn update_partition(points: &[Vec<f64>], context: &[f64], prototypes: &[Vec<f64>], m: f64, u: &mut [Vec<f64>]) {
    let exponent = 1.0 / (m - 1.0);
    let mut inv = vec![0.0; prototypes.len()];
    for (k, x) in points.iter().enumerate() {
        let mass = context[k];
        let coincident = prototypes.iter().position(|v| sq_dist(x, v) < COINCIDENT_SQ);
        if let Some(hit) = coincident {
            for (j, uj) in u.iter_mut().enumerate() {
                uj[k] = if j == hit { mass } else { 0.0 };
            }
            continue;
        }
        // u_jk = mass * d_jk^(-1/(m-1)) / sum_l d_lk^(-1/(m-1)) with squared distances d.
        let mut total = 0.0;
        for (slot, v) in inv.iter_mut().zip(prototypes) {
            *slot = sq_dist(x, v).powf(-exponent);
            total += *slot;
        }
        for (uj, w) in u.iter_mut().zip(&inv) {
            uj[k] = mass * w / total;
        }
    }
}

fn update_prototypes(points: &[Vec<f64>], u: &[Vec<f64>], m: f64, prototypes: &mut [Vec<f64>]) -> f64 {
    let dim = points[0].len();
    let mut shift: f64 = 0.0;
    for (v, uj) in prototypes.iter_mut().zip(u) {
        let mut num = vec![0.0; dim];
        let mut den = 0.0;
        for (x, &w) in points.iter().zip(uj) {
            if w > 0.0 {
                let wm = w.powf(m);
                den += wm;
                for (n, xi) in num.iter_mut().zip(x) {
                    *n += wm * xi;
                }
            }
        }
        if den > 0.0 {
            let next: Vec<f64> = num.iter().map(|n| n / den).collect();
            shift = shift.max(sq_dist(&next, v).sqrt());
            *v = next;
        }
    }
    shift
}

/// Fuzzy C-means whose memberships for each sample sum to its context degree.
///
/// `points` are normalized inputs and `context[k]` is the context membership
/// of sample `k`. Prototypes are seeded by drawing distinct samples with
/// probability proportional to their context membership.
pub fn conditional_fcm(points: &[Vec<f64>], context: &[f64], settings: &FcmSettings, seed: u64) -> Result<FcmRun> {
    let FcmSettings { clusters, fuzzifier: m, tolerance, max_iter } = *settings;
    if clusters == 0 {
        return Err(Error::Config("number of clusters must be at least 1".into()));
    }
    if !(m > 1.0) {
        return Err(Error::Config(format!("fuzzifier must exceed 1, got {m}")));
    }
    if points.len() != context.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), got: context.len() });
    }
    let supported = context.iter().filter(|&&b| b > 0.0).count();
    if supported < clusters || context.iter().sum::<f64>() < 1e-12 {
        return Err(Error::ContextEmpty { context: 0 });
    }

    let mut rng = seeds::rng(seed);
    let picks = sample_weighted(&mut rng, points.len(), |k| context[k], clusters)
        .map_err(|e| Error::Config(format!("prototype seeding failed: {e}")))?;
    let mut prototypes: Vec<Vec<f64>> = picks.iter().map(|k| points[k].clone()).collect();

    let mut u = vec![vec![0.0; points.len()]; clusters];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        update_partition(points, context, &prototypes, m, &mut u);
        trace.push(objective(points, &prototypes, &u, m));
        let shift = update_prototypes(points, &u, m, &mut prototypes);
        trace.push(objective(points, &prototypes, &u, m));
        if shift < tolerance {
            converged = true;
            break;
        }
    }
    // Final partition consistent with the returned prototypes.
    update_partition(points, context, &prototypes, m, &mut u);
    trace.push(objective(points, &prototypes, &u, m));
    Ok(FcmRun { prototypes, memberships: u, objective_trace: trace, iterations, converged })
}

/// Membership tensor `u[context][cluster][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTensor {
    pub contexts: usize,
    pub clusters: usize,
    pub samples: usize,
    values: Vec<f64>,
}

impl PartitionTensor {
    pub fn zeros(contexts: usize, clusters: usize, samples: usize) -> Self {
        Self { contexts, clusters, samples, values: vec![0.0; contexts * clusters * samples] }
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(i * self.clusters + j) * self.samples + k]
    }

    pub fn set_slice(&mut self, i: usize, slice: &[Vec<f64>]) {
        for (j, row) in slice.iter().enumerate() {
            let start = (i * self.clusters + j) * self.samples;
            self.values[start..start + self.samples].copy_from_slice(row);
        }
    }

    /// `max_{i,k} |sum_j u_ijk - degree[i][k]|`.
    pub fn max_constraint_violation(&self, degrees: &[Vec<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in degrees.iter().enumerate() {
            for (k, b) in row.iter().enumerate() {
                let sum: f64 = (0..self.clusters).map(|j| self.get(i, j, k)).sum();
                worst = worst.max((sum - b).abs());
            }
        }
        worst
    }
}

/// n-dimensional granule: product of per-dimension Gaussians in normalized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputGranule {
    pub dims: Vec<GaussianGranule>,
    pub prototype: Vec<f64>,
    pub context: usize,
    pub cluster: usize,
}

impl InputGranule {
    pub fn membership(&self, x: &[f64]) -> f64 {
        self.dims.iter().zip(x).map(|(g, v)| g.membership(*v)).product()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.dims.iter().map(|g| g.center).collect()
    }

    pub fn spreads(&self) -> Vec<f64> {
        self.dims.iter().map(|g| g.spread).collect()
    }
}

/// Turns a cluster prototype into an input granule, choosing every
/// per-dimension width by maximizing weighted coverage times `1 - sigma`
/// with weights `u_k^m / sum_r u_r^m`.
pub fn elevate_prototype(
    prototype: &[f64],
    memberships: &[f64],
    points: &[Vec<f64>],
    m: f64,
    provenance: (usize, usize),
) -> Result<InputGranule> {
    if memberships.len() != points.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), got: memberships.len() });
    }
    let raw: Vec<f64> = memberships.iter().map(|u| if *u > 0.0 { u.powf(m) } else { 0.0 }).collect();
    if !(raw.iter().sum::<f64>() > 0.0) {
        return Err(Error::DegenerateCluster { context: provenance.0, cluster: provenance.1 });
    }
    let dims = prototype
        .iter()
        .enumerate()
        .map(|(d, &center)| {
            let values: Vec<f64> = points.iter().map(|x| x[d]).collect();
            let sample = WeightedSample::from_raw(values, &raw)?;
            let sigma = optimize_width(center, &sample);
            GaussianGranule::new(center, sigma, 1.0, Units::Normalized)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InputGranule { dims, prototype: prototype.to_vec(), context: provenance.0, cluster: provenance.1 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeLandmark {
    pub input: InputGranule,
    pub output: GaussianGranule,
    pub output_specificity: f64,
}

/// Flattens per-context granules into `C * K` landmarks, context-major.
pub fn assemble_landmarks(contexts: &[OutputContext], granules: &[Vec<InputGranule>]) -> Result<Vec<KnowledgeLandmark>> {
    if contexts.len() != granules.len() {
        return Err(Error::Assembly(format!("{} contexts but {} granule groups", contexts.len(), granules.len())));
    }
    let per_context = granules.first().map_or(0, Vec::len);
    if per_context == 0 || granules.iter().any(|g| g.len() != per_context) {
        return Err(Error::Assembly("every context needs the same non-zero number of granules".into()));
    }
    Ok(contexts
        .iter()
        .zip(granules)
        .flat_map(|(ctx, group)| {
            group.iter().map(move |input| KnowledgeLandmark {
                input: input.clone(),
                output: ctx.granule,
                output_specificity: ctx.granule.specificity(),
            })
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSettings {
    pub contexts: usize,
    pub rho: f64,
    pub fcm: FcmSettings,
}

/// A complete landmark set with the box used to normalize inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub domain: DomainBox,
    pub contexts: Vec<OutputContext>,
    pub landmarks: Vec<KnowledgeLandmark>,
}

/// Landmark set together with the clustering diagnostics.
#[derive(Debug, Clone)]
pub struct LandmarkBuild {
    pub set: LandmarkSet,
    pub partition: PartitionTensor,
    /// Context membership `B_i(y_k)` per context and sample.
    pub context_degrees: Vec<Vec<f64>>,
    pub objective_traces: Vec<Vec<f64>>,
}

/// Builds contexts from the knowledge targets, clusters the normalized
/// knowledge inputs under each context and elevates every prototype.
pub fn build_landmarks(knowledge: &LabeledDataset, domain: &DomainBox, settings: &LandmarkSettings, seed: u64) -> Result<LandmarkBuild> {
    if knowledge.is_empty() {
        return Err(Error::Empty("knowledge dataset"));
    }
    let contexts = build_output_contexts(&knowledge.targets, settings.contexts, settings.rho)?;
    let points: Vec<Vec<f64>> = knowledge.inputs.iter().map(|x| domain.normalize(x)).collect();
    let m = settings.fcm.fuzzifier;

    let mut partition = PartitionTensor::zeros(contexts.len(), settings.fcm.clusters, points.len());
    let mut degrees = Vec::with_capacity(contexts.len());
    let mut traces = Vec::with_capacity(contexts.len());
    let mut granules = Vec::with_capacity(contexts.len());
    for ctx in &contexts {
        let degree: Vec<f64> = knowledge.targets.iter().map(|y| ctx.granule.membership(*y)).collect();
        let run = conditional_fcm(&points, &degree, &settings.fcm, seeds::derive(seed, ctx.index as u64))
            .map_err(|e| match e {
                Error::ContextEmpty { .. } => Error::ContextEmpty { context: ctx.index },
                other => other,
            })?;
        let group = run
            .prototypes
            .iter()
            .zip(&run.memberships)
            .enumerate()
            .map(|(j, (v, u))| elevate_prototype(v, u, &points, m, (ctx.index, j)))
            .collect::<Result<Vec<_>>>()?;
        partition.set_slice(ctx.index, &run.memberships);
        degrees.push(degree);
        traces.push(run.objective_trace);
        granules.push(group);
    }
    let landmarks = assemble_landmarks(&contexts, &granules)?;
    Ok(LandmarkBuild {
        set: LandmarkSet { domain: domain.clone(), contexts, landmarks },
        partition,
        context_degrees: degrees,
        objective_traces: traces,
    })
}

/// Serialized layout of a landmark set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkDocument {
    pub domain: DomainBox,
    pub contexts: Vec<OutputContext>,
    pub landmarks: Vec<LandmarkRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkRecord {
    pub input: InputRecord,
    pub output: OutputRecord,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub centers: Vec<f64>,
    pub spreads: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub center: f64,
    pub spread: f64,
    pub specificity: f64,
    pub calibration_range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub context: usize,
    pub cluster: usize,
}

impl LandmarkSet {
    pub fn to_document(&self) -> LandmarkDocument {
        LandmarkDocument {
            domain: self.domain.clone(),
            contexts: self.contexts.clone(),
            landmarks: self
                .landmarks
                .iter()
                .map(|l| LandmarkRecord {
                    input: InputRecord { centers: l.input.centers(), spreads: l.input.spreads() },
                    output: OutputRecord {
                        center: l.output.center,
                        spread: l.output.spread,
                        specificity: l.output_specificity,
                        calibration_range: l.output.calibration_range,
                    },
                    provenance: Provenance { context: l.input.context, cluster: l.input.cluster },
                })
                .collect(),
        }
    }

    pub fn from_document(doc: LandmarkDocument) -> Result<Self> {
        let landmarks = doc
            .landmarks
            .into_iter()
            .map(|r| {
                if r.input.centers.len() != r.input.spreads.len() {
                    return Err(Error::DimensionMismatch { expected: r.input.centers.len(), got: r.input.spreads.len() });
                }
                let dims = r
                    .input
                    .centers
                    .iter()
                    .zip(&r.input.spreads)
                    .map(|(c, s)| GaussianGranule::new(*c, *s, 1.0, Units::Normalized))
                    .collect::<Result<Vec<_>>>()?;
                Ok(KnowledgeLandmark {
                    input: InputGranule {
                        dims,
                        prototype: r.input.centers,
                        context: r.provenance.context,
                        cluster: r.provenance.cluster,
                    },
                    output: GaussianGranule::new(r.output.center, r.output.spread, r.output.calibration_range, Units::Native)?,
                    output_specificity: r.output.specificity,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { domain: doc.domain, contexts: doc.contexts, landmarks })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn neighbor_rank_is_ceiling() {
        assert_eq!(neighbor_rank(1000, 0.2), 200);
        assert_eq!(neighbor_rank(999, 0.2), 200);
        assert_eq!(neighbor_rank(10, 0.25), 3);
    }

    #[test]
    fn percentile_interpolates() {
        let v: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_abs_diff_eq!(percentile(&v, 2.5), 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(percentile(&v, 97.5), 97.5, epsilon = 1e-12);
    }

    #[test]
    fn contexts_on_uniform_targets() {
        let mut rng = seeds::rng(8);
        let y: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let ctx = build_output_contexts(&y, 5, 0.2).unwrap();
        let expected = [0.025, 0.2625, 0.5, 0.7375, 0.975];
        for (c, e) in ctx.iter().zip(expected) {
            assert_abs_diff_eq!(c.granule.center, e, epsilon = 0.01);
        }
        // Centers strictly increasing with uniform spacing.
        let gaps: Vec<f64> = ctx.windows(2).map(|w| w[1].granule.center - w[0].granule.center).collect();
        assert!(gaps.iter().all(|g| *g > 0.0));
        assert!(gaps.iter().all(|g| (g - gaps[0]).abs() < 1e-12));
        // kappa ~ 0.2 * N: an interior center sees ~10% on each side, a boundary one ~20% on one side.
        assert_abs_diff_eq!(ctx[2].granule.spread, 0.1, epsilon = 0.01);
        assert_abs_diff_eq!(ctx[0].granule.spread, 0.175, epsilon = 0.02);
    }

    #[test]
    fn single_context_at_midpoint() {
        let y: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let ctx = build_output_contexts(&y, 1, 0.2).unwrap();
        assert_eq!(ctx.len(), 1);
        assert_abs_diff_eq!(ctx[0].granule.center, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn context_errors() {
        assert!(build_output_contexts(&[1.0, 2.0], 3, 0.2).is_err());
        assert!(build_output_contexts(&[1.0, 2.0, 3.0], 2, 1.0).is_err());
        assert!(build_output_contexts(&[1.0; 50], 2, 0.2).is_err());
    }

    fn two_clouds(seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeds::rng(seed);
        let mut pts = Vec::new();
        for (cx, cy) in [(0.2, 0.2), (0.8, 0.7)] {
            for _ in 0..100 {
                pts.push(vec![cx + 0.05 * (rng.random::<f64>() - 0.5), cy + 0.05 * (rng.random::<f64>() - 0.5)]);
            }
        }
        pts
    }

    /// Lloyd's k-means, used as an independent reference for well-separated clouds.
    fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        for _ in 0..100 {
            let mut sums = vec![vec![0.0; 2]; centers.len()];
            let mut counts = vec![0usize; centers.len()];
            for p in points {
                let j = (0..centers.len())
                    .min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b])))
                    .unwrap();
                counts[j] += 1;
                sums[j][0] += p[0];
                sums[j][1] += p[1];
            }
            centers = sums.iter().zip(&counts).map(|(s, c)| vec![s[0] / *c as f64, s[1] / *c as f64]).collect();
        }
        centers
    }

    #[test]
    fn fcm_matches_kmeans_on_separated_clouds() {
        let pts = two_clouds(1);
        let ones = vec![1.0; pts.len()];
        let settings = FcmSettings { clusters: 2, fuzzifier: 2.0, tolerance: 1e-10, max_iter: 500 };
        let run = conditional_fcm(&pts, &ones, &settings, 3).unwrap();
        let reference = lloyd(&pts, vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        for r in &reference {
            let closest = run.prototypes.iter().map(|v| sq_dist(v, r).sqrt()).fold(f64::INFINITY, f64::min);
            assert!(closest < 1e-3, "prototype off by {closest}");
        }
    }

    #[test]
    fn fcm_single_cluster_takes_context_mass() {
        let pts = two_clouds(2);
        let mut rng = seeds::rng(5);
        let degree: Vec<f64> = (0..pts.len()).map(|_| rng.random::<f64>()).collect();
        let settings = FcmSettings { clusters: 1, ..FcmSettings::default() };
        let run = conditional_fcm(&pts, &degree, &settings, 1).unwrap();
        for (u, b) in run.memberships[0].iter().zip(&degree) {
            assert_abs_diff_eq!(u, b, epsilon = 1e-12);
        }
        let den: f64 = degree.iter().map(|u| u * u).sum();
        for d in 0..2 {
            let num: f64 = degree.iter().zip(&pts).map(|(u, x)| u * u * x[d]).sum();
            assert_abs_diff_eq!(run.prototypes[0][d], num / den, epsilon = 1e-12);
        }
    }

    #[test]
    fn fcm_objective_monotone_and_constraint_exact() {
        let mut rng = seeds::rng(12);
        let pts: Vec<Vec<f64>> = (0..400).map(|_| vec![rng.random(), rng.random()]).collect();
        let degree: Vec<f64> = pts.iter().map(|x| (-((x[0] - 0.3).powi(2)) / 0.05).exp()).collect();
        let settings = FcmSettings { clusters: 4, ..FcmSettings::default() };
        let run = conditional_fcm(&pts, &degree, &settings, 7).unwrap();
        for w in run.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "{} -> {}", w[0], w[1]);
        }
        for k in 0..pts.len() {
            let s: f64 = run.memberships.iter().map(|u| u[k]).sum();
            assert!((s - degree[k]).abs() <= 1e-9);
        }
        // Prototypes stay inside the bounding box of the supporting samples.
        for v in &run.prototypes {
            assert!(v.iter().all(|c| (0.0..=1.0).contains(c)));
        }
    }

    #[test]
    fn fcm_coincident_sample_takes_full_mass() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.5, 0.5]];
        let degree = vec![0.7, 0.9, 0.4];
        let mut u = vec![vec![0.0; 3]; 2];
        update_partition(&pts, &degree, &[vec![0.0, 0.0], vec![1.0, 0.0]], 2.0, &mut u);
        assert_eq!((u[0][0], u[1][0]), (0.7, 0.0));
        assert_abs_diff_eq!(u[0][1] + u[1][1], 0.9, epsilon = 1e-15);
    }

    #[test]
    fn fcm_rejects_empty_context() {
        let pts = two_clouds(3);
        let zeros = vec![0.0; pts.len()];
        assert!(matches!(
            conditional_fcm(&pts, &zeros, &FcmSettings::default(), 1),
            Err(Error::ContextEmpty { .. })
        ));
    }

    #[test]
    fn elevation_cases() {
        let pts = vec![vec![0.3, 0.6], vec![0.9, 0.1]];
        let g = elevate_prototype(&[0.3, 0.6], &[1.0, 0.0], &pts, 2.0, (0, 0)).unwrap();
        assert_eq!(g.spreads(), vec![0.01, 0.01]);
        assert_eq!(g.membership(&[0.3, 0.6]), 1.0);
        assert!(matches!(
            elevate_prototype(&[0.3, 0.6], &[0.0, 0.0], &pts, 2.0, (1, 2)),
            Err(Error::DegenerateCluster { context: 1, cluster: 2 })
        ));
    }

    #[test]
    fn product_tnorm_unit_displacement() {
        let dims = vec![
            GaussianGranule::new(0.4, 0.1, 1.0, Units::Normalized).unwrap(),
            GaussianGranule::new(0.5, 0.3, 1.0, Units::Normalized).unwrap(),
        ];
        let g = InputGranule { dims, prototype: vec![0.4, 0.5], context: 0, cluster: 0 };
        assert_abs_diff_eq!(g.membership(&[0.5, 0.5]), (-1.0f64).exp(), epsilon = 1e-15);
    }

    fn dummy_granule(i: usize, j: usize) -> InputGranule {
        InputGranule {
            dims: vec![GaussianGranule::new(0.5, 0.1, 1.0, Units::Normalized).unwrap()],
            prototype: vec![0.5],
            context: i,
            cluster: j,
        }
    }

    #[test]
    fn assembly_counts() {
        for (c, k) in [(5, 8), (5, 5), (1, 1)] {
            let contexts: Vec<OutputContext> = (0..c)
                .map(|i| OutputContext { index: i, granule: GaussianGranule::new(i as f64, 0.5, 10.0, Units::Native).unwrap() })
                .collect();
            let groups: Vec<Vec<InputGranule>> = (0..c).map(|i| (0..k).map(|j| dummy_granule(i, j)).collect()).collect();
            let lm = assemble_landmarks(&contexts, &groups).unwrap();
            assert_eq!(lm.len(), c * k);
            assert!(lm.iter().all(|l| (0.0..=1.0).contains(&l.output_specificity)));
        }
        let contexts = vec![OutputContext { index: 0, granule: GaussianGranule::new(0.0, 0.5, 1.0, Units::Native).unwrap() }];
        assert!(assemble_landmarks(&contexts, &[]).is_err());
        let uneven = vec![vec![dummy_granule(0, 0)], vec![]];
        assert!(assemble_landmarks(&[contexts[0].clone(), contexts[0].clone()], &uneven).is_err());
    }
}
