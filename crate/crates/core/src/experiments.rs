//! Per-cell pipeline (data, landmarks, sweep, test phase) and the three
//! studies built on it: observation windows, noise level and parameter width.

use serde::{Deserialize, Serialize};

use crate::benchgen::{inject_noise, sample_knowledge, sample_local, sample_points, DomainBox, LabeledDataset};
use crate::config::{NamedWindow, RunConfig};
use crate::error::{Error, Result};
use crate::landmarks::{build_landmarks, LandmarkBuild, LandmarkSet};
use crate::network::{InputMatrix, ModelParameters};
use crate::objective::{DataTerm, KnowledgeTerm};
use crate::seeds::{self, tag};
use crate::training::{self, delta_q, DeltaQ, SweepOutcome, SweepProblem, SweepRecord, TrainConfig};

/// Seed of repeat `repeat` in a study.
pub fn repeat_seed(seed: u64, repeat: usize) -> u64 {
    seeds::derive(seed, 0x1000 + repeat as u64)
}

/// Local samples on one window, native units.
#[derive(Debug, Clone)]
pub struct LocalData {
    pub train: LabeledDataset,
    pub validation: LabeledDataset,
    pub test: LabeledDataset,
}

/// Full-domain samples, native units.
#[derive(Debug, Clone)]
pub struct GlobalData {
    pub knowledge: LabeledDataset,
    pub anchors: Vec<Vec<f64>>,
    pub validation: LabeledDataset,
    pub test: LabeledDataset,
}

pub fn generate_local(cfg: &RunConfig, window: &DomainBox, seed: u64) -> Result<LocalData> {
    let b = cfg.benchmark;
    let w0 = b.nominal_parameters();
    let s = &cfg.samples;
    let all = sample_local(b, window, s.local + s.validation, &w0, seeds::derive(seed, tag::LOCAL))?;
    let (train, validation) = all.split_at(s.local);
    let test = sample_local(b, window, s.test_local, &w0, seeds::derive(seed, tag::TEST_LOCAL))?;
    Ok(LocalData { train, validation, test })
}

pub fn generate_global(cfg: &RunConfig, width_ratio: f64, seed: u64) -> Result<GlobalData> {
    let b = cfg.benchmark;
    let domain = b.domain();
    let specs = b.parameter_specs();
    let s = &cfg.samples;
    Ok(GlobalData {
        knowledge: sample_knowledge(b, &domain, s.knowledge, &specs, width_ratio, seeds::derive(seed, tag::KNOWLEDGE))?,
        anchors: sample_points(&domain, s.anchors, seeds::derive(seed, tag::ANCHORS)),
        validation: sample_knowledge(b, &domain, s.global, &specs, width_ratio, seeds::derive(seed, tag::GLOBAL_VALIDATION))?,
        test: sample_knowledge(b, &domain, s.test_global, &specs, width_ratio, seeds::derive(seed, tag::TEST_GLOBAL))?,
    })
}

pub fn build_landmark_set(cfg: &RunConfig, knowledge: &LabeledDataset, seed: u64) -> Result<LandmarkBuild> {
    build_landmarks(knowledge, &cfg.benchmark.domain(), &cfg.landmark_settings(), seeds::derive(seed, tag::LANDMARKS))
}

/// Optimizer settings of one cell; the shuffling stream is tied to the cell seed.
pub fn train_config(cfg: &RunConfig, seed: u64) -> TrainConfig {
    TrainConfig { seed: seeds::derive(seed, tag::TRAIN).wrapping_add(cfg.train.seed), ..cfg.train }
}

/// Everything a sweep reads, in native units.
#[derive(Debug, Clone, Copy)]
pub struct SweepInputs<'a> {
    pub train: &'a LabeledDataset,
    pub validation: &'a LabeledDataset,
    pub anchors: &'a [Vec<f64>],
    pub global_validation: &'a LabeledDataset,
    pub landmarks: &'a LandmarkSet,
}

/// Normalizes the inputs and freezes the objective pieces shared by all lambda values.
pub fn sweep_problem(cfg: &RunConfig, inputs: SweepInputs<'_>, seed: u64) -> Result<SweepProblem> {
    let domain = cfg.benchmark.domain();
    if inputs.landmarks.domain != domain {
        return Err(Error::Config("landmark set was built for a different domain".into()));
    }
    let y_span = inputs.train.target_span();
    if !(y_span > 0.0) {
        return Err(Error::Config("local targets have zero span".into()));
    }
    let anchors: Vec<Vec<f64>> = inputs.anchors.iter().map(|x| domain.normalize(x)).collect();
    let mut init = ModelParameters::init(domain.dim(), cfg.hidden, seeds::derive(seed, tag::INIT));
    if cfg.output_bias_from_data {
        init.set_output_bias(inputs.train.targets.iter().sum::<f64>() / inputs.train.len() as f64);
    }
    Ok(SweepProblem {
        data: DataTerm::new(&domain.normalize_dataset(inputs.train), y_span)?,
        knowledge: KnowledgeTerm::new(&anchors, &inputs.landmarks.landmarks)?,
        val_local: domain.normalize_dataset(inputs.validation),
        val_global: domain.normalize_dataset(inputs.global_validation),
        init,
    })
}

/// Objectives of the selected model on independently drawn test sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestPhase {
    pub q1: f64,
    pub q2: f64,
    pub q_total: f64,
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub outcome: SweepOutcome,
    pub baseline: SweepRecord,
    pub optimum: SweepRecord,
    pub delta: DeltaQ,
    pub test: TestPhase,
}

impl SweepSummary {
    pub fn lambda_opt(&self) -> f64 {
        self.outcome.lambda_opt
    }
}

/// Sweep, selection, improvement over `lambda = 1` and the test phase.
pub fn run_sweep(
    cfg: &RunConfig,
    grid_step: f64,
    problem: &SweepProblem,
    tc: &TrainConfig,
    test_local: &LabeledDataset,
    test_global: &LabeledDataset,
    jobs: usize,
) -> Result<SweepSummary> {
    let outcome = training::sweep(grid_step, problem, tc, jobs)?;
    let baseline = outcome.baseline().cloned().ok_or_else(|| Error::Config("grid lacks lambda = 1".into()))?;
    let optimum = outcome.optimum().clone();
    let delta = delta_q(&baseline, &optimum)?;
    let idx = outcome.index_of(optimum.lambda).expect("optimum on grid");
    let params = outcome.params[idx].as_ref().expect("optimum is valid");
    let domain = cfg.benchmark.domain();
    let q1 = training::q1(params, &domain.normalize_dataset(test_local))?;
    let q2 = training::q2(params, &domain.normalize_dataset(test_global))?;
    Ok(SweepSummary { outcome, baseline, optimum, delta, test: TestPhase { q1, q2, q_total: q1 + q2 } })
}

/// Data, landmarks and sweep for one window at the configured width ratio.
pub fn run_cell(cfg: &RunConfig, window: &DomainBox, grid_step: f64, seed: u64, jobs: usize) -> Result<SweepSummary> {
    let local = generate_local(cfg, window, seed)?;
    let global = generate_global(cfg, cfg.width_ratio, seed)?;
    let build = build_landmark_set(cfg, &global.knowledge, seed)?;
    run_prepared(cfg, &local, &local.train, &global, &build.set, grid_step, seed, jobs)
}

#[allow(clippy::too_many_arguments)]
fn run_prepared(
    cfg: &RunConfig,
    local: &LocalData,
    train: &LabeledDataset,
    global: &GlobalData,
    landmarks: &LandmarkSet,
    grid_step: f64,
    seed: u64,
    jobs: usize,
) -> Result<SweepSummary> {
    let inputs = SweepInputs {
        train,
        validation: &local.validation,
        anchors: &global.anchors,
        global_validation: &global.validation,
        landmarks,
    };
    let problem = sweep_problem(cfg, inputs, seed)?;
    run_sweep(cfg, grid_step, &problem, &train_config(cfg, seed), &local.test, &global.test, jobs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    Windows,
    Noise,
    Width,
}

impl StudyKind {
    pub fn id(self) -> &'static str {
        match self {
            StudyKind::Windows => "windows",
            StudyKind::Noise => "noise",
            StudyKind::Width => "width",
        }
    }
}

/// One (factor, repeat) sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub factor: String,
    /// Numeric factor value (alpha or r); the window index for the window study.
    pub value: f64,
    pub repeat: usize,
    pub seed: u64,
    pub lambda_opt: f64,
    pub baseline: SweepRecord,
    pub optimum: SweepRecord,
    pub delta: DeltaQ,
    pub test: TestPhase,
    pub records: Vec<SweepRecord>,
}

impl StudyCell {
    fn new(factor: String, value: f64, repeat: usize, seed: u64, s: SweepSummary) -> Self {
        Self {
            factor,
            value,
            repeat,
            seed,
            lambda_opt: s.lambda_opt(),
            baseline: s.baseline,
            optimum: s.optimum,
            delta: s.delta,
            test: s.test,
            records: s.outcome.records,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("summary values"));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Ok(Self { median, min: v[0], max: v[n - 1] })
    }
}

/// Per-factor aggregate over repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSummary {
    pub factor: String,
    pub value: f64,
    pub lambda_opt: Spread,
    pub dq_pct: Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub study: StudyKind,
    pub benchmark: crate::benchgen::Benchmark,
    pub repeats: usize,
    pub grid_step: f64,
    pub cells: Vec<StudyCell>,
    pub summary: Vec<FactorSummary>,
}

impl StudyResult {
    fn assemble(cfg: &RunConfig, study: StudyKind, grid_step: f64, repeats: usize, cells: Vec<StudyCell>) -> Result<Self> {
        let mut factors: Vec<(String, f64)> = Vec::new();
        for c in &cells {
            if !factors.iter().any(|(f, _)| *f == c.factor) {
                factors.push((c.factor.clone(), c.value));
            }
        }
        let summary = factors
            .into_iter()
            .map(|(factor, value)| {
                let group: Vec<&StudyCell> = cells.iter().filter(|c| c.factor == factor).collect();
                Ok(FactorSummary {
                    lambda_opt: Spread::of(&group.iter().map(|c| c.lambda_opt).collect::<Vec<_>>())?,
                    dq_pct: Spread::of(&group.iter().map(|c| c.delta.relative_pct).collect::<Vec<_>>())?,
                    factor,
                    value,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { study, benchmark: cfg.benchmark, repeats, grid_step, cells, summary })
    }

    /// Rank correlation between factor values and median `lambda_opt`.
    pub fn lambda_trend(&self) -> Option<f64> {
        let x: Vec<f64> = self.summary.iter().map(|s| s.value).collect();
        let y: Vec<f64> = self.summary.iter().map(|s| s.lambda_opt.median).collect();
        spearman(&x, &y)
    }
}

/// Called after every finished cell.
pub type Progress<'a> = &'a dyn Fn(&StudyCell);

/// Every window in `windows` for each repeat. Full-domain data and
/// landmarks are shared by all windows of a repeat.
pub fn window_study(cfg: &RunConfig, windows: &[NamedWindow], jobs: usize, progress: Progress<'_>) -> Result<StudyResult> {
    if windows.is_empty() {
        return Err(Error::Config("window study needs at least one window".into()));
    }
    let repeats = cfg.studies.repeats;
    let mut cells = Vec::new();
    for rep in 0..repeats {
        let seed = repeat_seed(cfg.seed, rep);
        let global = generate_global(cfg, cfg.width_ratio, seed)?;
        let build = build_landmark_set(cfg, &global.knowledge, seed)?;
        for (k, w) in windows.iter().enumerate() {
            let local = generate_local(cfg, &w.bounds, seed)?;
            let s = run_prepared(cfg, &local, &local.train, &global, &build.set, cfg.grid_step, seed, jobs)?;
            let cell = StudyCell::new(w.id.clone(), k as f64, rep, seed, s);
            progress(&cell);
            cells.push(cell);
        }
    }
    order_cells(&mut cells, windows.iter().map(|w| w.id.as_str()));
    StudyResult::assemble(cfg, StudyKind::Windows, cfg.grid_step, repeats, cells)
}

/// Noise levels on the selected window. Clean local data, full-domain data
/// and landmarks are fixed; each (alpha, repeat) draws its own noise and
/// runs a fresh sweep. `Q1` is measured on the clean held-out split.
pub fn noise_study(cfg: &RunConfig, jobs: usize, progress: Progress<'_>) -> Result<StudyResult> {
    let window = cfg.selected_window()?;
    let seed = cfg.seed;
    let local = generate_local(cfg, &window.bounds, seed)?;
    let global = generate_global(cfg, cfg.width_ratio, seed)?;
    let build = build_landmark_set(cfg, &global.knowledge, seed)?;
    let repeats = cfg.studies.repeats;
    let mut cells = Vec::new();
    for (a_idx, &alpha) in cfg.studies.alphas.iter().enumerate() {
        for rep in 0..repeats {
            let noise_seed = seeds::derive(seeds::derive(repeat_seed(seed, rep), tag::NOISE), a_idx as u64);
            let noisy = inject_noise(&local.train, alpha, noise_seed)?;
            let s = run_prepared(cfg, &local, &noisy, &global, &build.set, cfg.studies.noise_grid_step, seed, jobs)?;
            let cell = StudyCell::new(format_factor(alpha), alpha, rep, noise_seed, s);
            progress(&cell);
            cells.push(cell);
        }
    }
    StudyResult::assemble(cfg, StudyKind::Noise, cfg.studies.noise_grid_step, repeats, cells)
}

/// Parameter width ratios on the selected window. For each ratio the
/// full-domain samples, the landmarks and the `Q2` sets are regenerated;
/// a repeat uses the same seed for every ratio.
pub fn width_study(cfg: &RunConfig, jobs: usize, progress: Progress<'_>) -> Result<StudyResult> {
    let window = cfg.selected_window()?;
    let repeats = cfg.studies.repeats;
    let mut cells = Vec::new();
    for rep in 0..repeats {
        let seed = repeat_seed(cfg.seed, rep);
        let local = generate_local(cfg, &window.bounds, seed)?;
        for &r in &cfg.studies.ratios {
            let global = generate_global(cfg, r, seed)?;
            let build = build_landmark_set(cfg, &global.knowledge, seed)?;
            let s = run_prepared(cfg, &local, &local.train, &global, &build.set, cfg.studies.width_grid_step, seed, jobs)?;
            let cell = StudyCell::new(format_factor(r), r, rep, seed, s);
            progress(&cell);
            cells.push(cell);
        }
    }
    let labels: Vec<String> = cfg.studies.ratios.iter().map(|r| format_factor(*r)).collect();
    order_cells(&mut cells, labels.iter().map(String::as_str));
    StudyResult::assemble(cfg, StudyKind::Width, cfg.studies.width_grid_step, repeats, cells)
}

fn format_factor(v: f64) -> String {
    format!("{v:.2}")
}

/// Sorts cells by factor order, then repeat.
fn order_cells<'a>(cells: &mut [StudyCell], order: impl Iterator<Item = &'a str>) {
    let order: Vec<&str> = order.collect();
    cells.sort_by_key(|c| (order.iter().position(|f| *f == c.factor).unwrap_or(usize::MAX), c.repeat));
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties; `None` when
/// either side is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Model predictions at native inputs.
pub fn predict(params: &ModelParameters, domain: &DomainBox, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let x = InputMatrix::from_rows(&inputs.iter().map(|p| domain.normalize(p)).collect::<Vec<_>>())?;
    let mut state = crate::network::BatchState::default();
    params.forward_batch(&x, &mut state)?;
    Ok(state.outputs)
}
