//! Fitting the network under the augmented loss, validation objectives and
//! the lambda sweep.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchgen::LabeledDataset;
use crate::error::{Error, Result};
use crate::network::{BatchState, InputMatrix, ModelParameters};
use crate::objective::{AugmentedObjective, DataTerm, KnowledgeTerm, LossParts, Workspace};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchMode {
    Full,
    #[serde(untagged)]
    Size(usize),
}

/// Optimizer settings (adaptive-moment gradient descent).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub step_size: f64,
    pub batch: BatchMode,
    pub seed: u64,
    /// Stop once the best loss improved by less than this relative amount
    /// over the last `patience` epochs; zero disables early stopping.
    pub tolerance: f64,
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3000,
            step_size: 1e-3,
            batch: BatchMode::Full,
            seed: 0,
            tolerance: 0.0,
            patience: 200,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config(format!("step size must be positive, got {}", self.step_size)));
        }
        if let BatchMode::Size(0) = self.batch {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("moment decay rates must lie in [0, 1)".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::Config("tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

struct Adam {
    first: Vec<f64>,
    second: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { first: vec![0.0; n], second: vec![0.0; n], step: 0 }
    }

    fn apply(&mut self, tc: &TrainConfig, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - tc.beta1.powi(self.step);
        let c2 = 1.0 - tc.beta2.powi(self.step);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.first).zip(&mut self.second) {
            *m = tc.beta1 * *m + (1.0 - tc.beta1) * g;
            *v = tc.beta2 * *v + (1.0 - tc.beta2) * g * g;
            *p -= tc.step_size * (*m / c1) / ((*v / c2).sqrt() + tc.epsilon);
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Best iterate by full-objective loss.
    pub params: ModelParameters,
    pub best_loss: LossParts,
    /// Loss of the iterate at the start of every epoch.
    pub trace: Vec<LossParts>,
}

fn subset(x: &InputMatrix, idx: &[usize]) -> Result<InputMatrix> {
    InputMatrix::from_rows(&idx.iter().map(|&k| x.row(k).to_vec()).collect::<Vec<_>>())
}

/// Minimizes `objective` from `init`, returning the best iterate seen.
pub fn fit(init: &ModelParameters, objective: &AugmentedObjective<'_>, tc: &TrainConfig) -> Result<FitOutcome> {
    tc.validate()?;
    let mut params = init.clone();
    let mut grad = ModelParameters::zeros(init.n_inputs, init.n_hidden);
    let mut adam = Adam::new(params.values.len());
    let mut ws = Workspace::default();
    let mut trace = Vec::with_capacity(tc.epochs + 1);
    let mut best: Option<(LossParts, ModelParameters)> = None;
    let mut rng = seeds::rng(tc.seed);

    let n_data = objective.data.targets.len();
    let n_anchor = objective.knowledge.n_anchors();
    let mut data_order: Vec<usize> = (0..n_data).collect();
    let mut anchor_order: Vec<usize> = (0..n_anchor).collect();

    for epoch in 0..=tc.epochs {
        let loss = match tc.batch {
            BatchMode::Full => objective.evaluate_with_gradient(&params, &mut ws, &mut grad)?,
            BatchMode::Size(_) => objective.evaluate(&params, &mut ws)?,
        };
        if !loss.total.is_finite() {
            return Err(Error::Divergence { epoch, loss: loss.total });
        }
        trace.push(loss);
        if best.as_ref().is_none_or(|(b, _)| loss.total < b.total) {
            best = Some((loss, params.clone()));
        }
        if epoch == tc.epochs {
            break;
        }
        if tc.tolerance > 0.0 && epoch >= tc.patience {
            let then = trace[..=epoch - tc.patience].iter().map(|l| l.total).fold(f64::INFINITY, f64::min);
            let now = best.as_ref().map_or(f64::INFINITY, |(b, _)| b.total);
            if then - now <= tc.tolerance * then.abs() {
                break;
            }
        }
        match tc.batch {
            BatchMode::Full => adam.apply(tc, &mut params.values, &grad.values),
            BatchMode::Size(size) => {
                data_order.shuffle(&mut rng);
                anchor_order.shuffle(&mut rng);
                let steps = n_data.div_ceil(size).max(1);
                let anchor_chunk = n_anchor.div_ceil(steps).max(1);
                for s in 0..steps {
                    let d_idx = &data_order[(s * size).min(n_data)..((s + 1) * size).min(n_data)];
                    let a_idx = &anchor_order[(s * anchor_chunk).min(n_anchor)..((s + 1) * anchor_chunk).min(n_anchor)];
                    let data = DataTerm {
                        inputs: subset(&objective.data.inputs, d_idx)?,
                        targets: d_idx.iter().map(|&k| objective.data.targets[k]).collect(),
                        y_span: objective.data.y_span,
                    };
                    let knowledge = objective.knowledge.subset(a_idx)?;
                    let lambda = objective.lambda;
                    // Empty slices contribute nothing; the remaining term carries the step.
                    let step = AugmentedObjective { lambda, data: &data, knowledge: &knowledge };
                    step.evaluate_with_gradient(&params, &mut ws, &mut grad)?;
                    adam.apply(tc, &mut params.values, &grad.values);
                }
            }
        }
    }
    let (best_loss, params) = best.expect("at least one evaluation");
    Ok(FitOutcome { params, best_loss, trace })
}

fn mse(params: &ModelParameters, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let x = InputMatrix::from_rows(&data.inputs)?;
    let mut state = BatchState::default();
    params.forward_batch(&x, &mut state)?;
    Ok(state.outputs.iter().zip(&data.targets).map(|(m, t)| (m - t) * (m - t)).sum::<f64>() / data.len() as f64)
}

/// Mean squared error on the held-out local split (normalized inputs).
pub fn q1(params: &ModelParameters, val_local: &LabeledDataset) -> Result<f64> {
    mse(params, val_local)
}

/// Mean squared error against full-domain samples drawn under parameter variability.
pub fn q2(params: &ModelParameters, val_global: &LabeledDataset) -> Result<f64> {
    mse(params, val_global)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub lambda: f64,
    #[serde(with = "nan_as_null")]
    pub q1: f64,
    #[serde(with = "nan_as_null")]
    pub q2: f64,
    #[serde(with = "nan_as_null")]
    pub q_total: f64,
    pub valid: bool,
    pub params_ref: String,
}

impl SweepRecord {
    fn new(lambda: f64, q1: f64, q2: f64) -> Self {
        Self { lambda, q1, q2, q_total: q1 + q2, valid: true, params_ref: params_ref(lambda) }
    }

    fn invalid(lambda: f64) -> Self {
        Self { lambda, q1: f64::NAN, q2: f64::NAN, q_total: f64::NAN, valid: false, params_ref: params_ref(lambda) }
    }
}

/// Objectives of diverged fits are NaN; JSON stores them as `null`.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        (!v.is_nan()).then_some(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

fn params_ref(lambda: f64) -> String {
    format!("lambda_{lambda:.4}")
}

/// `{0, step, 2 step, ..., 1}`; the last point is always 1.
pub fn lambda_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Config(format!("grid step {step} outside (0, 1]")));
    }
    let mut grid = Vec::new();
    let mut k = 0usize;
    loop {
        let value = ((k as f64 * step) * 1e12).round() / 1e12;
        if value >= 1.0 - 1e-9 {
            break;
        }
        grid.push(value);
        k += 1;
    }
    grid.push(1.0);
    Ok(grid)
}

/// Everything shared by the fits of one sweep. Inputs are normalized.
#[derive(Debug, Clone)]
pub struct SweepProblem {
    pub data: DataTerm,
    pub knowledge: KnowledgeTerm,
    pub val_local: LabeledDataset,
    pub val_global: LabeledDataset,
    pub init: ModelParameters,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub lambda_opt: f64,
    /// Fitted parameters per grid point (`None` for diverged fits).
    pub params: Vec<Option<ModelParameters>>,
    /// Loss traces per grid point.
    pub traces: Vec<Vec<LossParts>>,
}

impl SweepOutcome {
    pub fn record_at(&self, lambda: f64) -> Option<&SweepRecord> {
        self.records.iter().find(|r| (r.lambda - lambda).abs() < 1e-12)
    }

    pub fn index_of(&self, lambda: f64) -> Option<usize> {
        self.records.iter().position(|r| (r.lambda - lambda).abs() < 1e-12)
    }

    pub fn optimum(&self) -> &SweepRecord {
        self.record_at(self.lambda_opt).expect("lambda_opt is on the grid")
    }

    pub fn baseline(&self) -> Option<&SweepRecord> {
        self.record_at(1.0)
    }
}

/// Grid value with the smallest `Q1 + Q2` among valid records; ties go to the larger lambda.
pub fn select_lambda(records: &[SweepRecord]) -> Option<f64> {
    let mut best: Option<&SweepRecord> = None;
    for r in records.iter().filter(|r| r.valid) {
        if best.is_none_or(|b| r.q_total <= b.q_total) {
            best = Some(r);
        }
    }
    best.map(|r| r.lambda)
}

/// Fits one model per grid value from the same initialization and selects `lambda_opt`.
///
/// With `jobs > 1` the fits run on a dedicated thread pool; results are
/// identical to the serial order.
pub fn sweep(grid_step: f64, problem: &SweepProblem, tc: &TrainConfig, jobs: usize) -> Result<SweepOutcome> {
    let grid = lambda_grid(grid_step)?;
    let run = |lambda: f64| -> Result<(SweepRecord, Option<ModelParameters>, Vec<LossParts>)> {
        let objective = AugmentedObjective::new(lambda, &problem.data, &problem.knowledge)?;
        match fit(&problem.init, &objective, tc) {
            Ok(outcome) => {
                let record = SweepRecord::new(lambda, q1(&outcome.params, &problem.val_local)?, q2(&outcome.params, &problem.val_global)?);
                Ok((record, Some(outcome.params), outcome.trace))
            }
            Err(Error::Divergence { epoch, loss }) => {
                eprintln!("warning: fit at lambda = {lambda} diverged at epoch {epoch} (loss {loss}); excluded");
                Ok((SweepRecord::invalid(lambda), None, Vec::new()))
            }
            Err(e) => Err(e),
        }
    };
    let results: Vec<_> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| grid.par_iter().map(|&l| run(l)).collect::<Result<Vec<_>>>())?
    } else {
        grid.iter().map(|&l| run(l)).collect::<Result<Vec<_>>>()?
    };
    let mut records = Vec::with_capacity(results.len());
    let mut params = Vec::with_capacity(results.len());
    let mut traces = Vec::with_capacity(results.len());
    for (r, p, t) in results {
        records.push(r);
        params.push(p);
        traces.push(t);
    }
    let lambda_opt = select_lambda(&records).ok_or_else(|| Error::Config("every fit in the sweep diverged".into()))?;
    Ok(SweepOutcome { records, lambda_opt, params, traces })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaQ {
    pub absolute: f64,
    pub relative_pct: f64,
}

/// Improvement of the selected model over the data-only (`lambda = 1`) model.
pub fn delta_q(base: &SweepRecord, opt: &SweepRecord) -> Result<DeltaQ> {
    if !base.valid || !opt.valid {
        return Err(Error::Config("delta Q needs two valid sweep records".into()));
    }
    if base.q_total == 0.0 {
        return Err(Error::UndefinedRelative);
    }
    let absolute = base.q_total - opt.q_total;
    Ok(DeltaQ { absolute, relative_pct: 100.0 * absolute / base.q_total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::granulation::{GaussianGranule, Units};
    use crate::landmarks::{InputGranule, KnowledgeLandmark};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn record(lambda: f64, q1: f64, q2: f64) -> SweepRecord {
        SweepRecord::new(lambda, q1, q2)
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(lambda_grid(0.02).unwrap().len(), 51);
        assert_eq!(lambda_grid(0.05).unwrap().len(), 21);
        assert_eq!(lambda_grid(1.0).unwrap(), vec![0.0, 1.0]);
        assert_eq!(lambda_grid(0.3).unwrap(), vec![0.0, 0.3, 0.6, 0.9, 1.0]);
        let g = lambda_grid(0.02).unwrap();
        assert_eq!(g[44], 0.88);
        assert!(lambda_grid(0.0).is_err());
        assert!(lambda_grid(1.5).is_err());
    }

    #[test]
    fn delta_q_values() {
        let d = delta_q(&record(1.0, 0.0, 7.819), &record(0.88, 0.0, 6.638)).unwrap();
        assert_abs_diff_eq!(d.absolute, 1.181, epsilon = 1e-9);
        assert_abs_diff_eq!(d.relative_pct, 15.10, epsilon = 0.01);
        let d = delta_q(&record(1.0, 0.0, 0.2551), &record(0.9, 0.0, 0.0977)).unwrap();
        assert_abs_diff_eq!(d.relative_pct, 61.70, epsilon = 0.01);
        let same = delta_q(&record(1.0, 0.1, 0.2), &record(1.0, 0.1, 0.2)).unwrap();
        assert_eq!((same.absolute, same.relative_pct), (0.0, 0.0));
        assert!(matches!(delta_q(&record(1.0, 0.0, 0.0), &record(0.5, 0.0, 0.0)), Err(Error::UndefinedRelative)));
    }

    #[test]
    fn selection_prefers_larger_lambda_on_ties() {
        let recs = vec![record(0.0, 1.0, 1.0), record(0.5, 0.5, 0.5), record(1.0, 0.25, 0.75)];
        assert_eq!(select_lambda(&recs), Some(1.0));
        let mut recs = recs;
        recs[1].q2 = 0.4;
        recs[1].q_total = 0.9;
        assert_eq!(select_lambda(&recs), Some(0.5));
        recs[1].valid = false;
        assert_eq!(select_lambda(&recs), Some(1.0));
    }

    #[test]
    fn validation_errors() {
        let p = ModelParameters::zeros(2, 4);
        let empty = LabeledDataset::new(vec![], vec![], 0).unwrap();
        assert!(q1(&p, &empty).is_err());
        assert!(q2(&p, &empty).is_err());
        let mut q = p.clone();
        q.set_output_bias(0.5);
        let d = LabeledDataset::new(vec![vec![0.1, 0.2], vec![0.3, 0.4]], vec![0.0, 0.0], 0).unwrap();
        assert_abs_diff_eq!(q1(&q, &d).unwrap(), 0.25, epsilon = 1e-15);
        let exact = LabeledDataset::new(vec![vec![0.1, 0.2]], vec![0.5], 0).unwrap();
        assert_eq!(q1(&q, &exact).unwrap(), 0.0);
        let bad = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
    }

    fn toy_data(n: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> LabeledDataset {
        let mut rng = seeds::rng(seed);
        let inputs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
        let targets = inputs.iter().map(|x| f(x)).collect();
        LabeledDataset::new(inputs, targets, seed).unwrap()
    }

    fn no_knowledge() -> KnowledgeTerm {
        KnowledgeTerm::new(&[], &[]).unwrap()
    }

    #[test]
    fn constant_target_is_fit_exactly() {
        let data = toy_data(50, 1, |_| 0.7);
        let dt = DataTerm::new(&data, 1.0).unwrap();
        let kt = no_knowledge();
        let obj = AugmentedObjective::new(1.0, &dt, &kt).unwrap();
        let tc = TrainConfig { epochs: 12_000, step_size: 1e-2, ..TrainConfig::default() };
        let out = fit(&ModelParameters::init(2, 8, 3), &obj, &tc).unwrap();
        assert!(out.best_loss.data <= 1e-6, "{}", out.best_loss.data);
        // The best-so-far envelope of the trace never increases and ends at the returned loss.
        let mut env = f64::INFINITY;
        for l in &out.trace {
            env = env.min(l.total);
        }
        assert_eq!(env, out.best_loss.total);
    }

    #[test]
    fn fit_is_deterministic() {
        let data = toy_data(40, 2, |x| x[0] * x[1]);
        let dt = DataTerm::new(&data, 1.0).unwrap();
        let kt = no_knowledge();
        let obj = AugmentedObjective::new(1.0, &dt, &kt).unwrap();
        let tc = TrainConfig { epochs: 100, ..TrainConfig::default() };
        let init = ModelParameters::init(2, 8, 4);
        assert_eq!(fit(&init, &obj, &tc).unwrap().params, fit(&init, &obj, &tc).unwrap().params);
        let mini = TrainConfig { batch: BatchMode::Size(16), epochs: 20, seed: 3, ..TrainConfig::default() };
        assert_eq!(fit(&init, &obj, &mini).unwrap().params, fit(&init, &obj, &mini).unwrap().params);
    }

    #[test]
    fn divergence_is_reported() {
        let data = toy_data(10, 2, |_| f64::NAN);
        let dt = DataTerm::new(&data, 1.0).unwrap();
        let kt = no_knowledge();
        let obj = AugmentedObjective::new(1.0, &dt, &kt).unwrap();
        let err = fit(&ModelParameters::init(2, 4, 1), &obj, &TrainConfig { epochs: 5, ..TrainConfig::default() });
        assert!(matches!(err, Err(Error::Divergence { epoch: 0, .. })));
    }

    #[test]
    fn single_landmark_attracts_output() {
        let output = GaussianGranule::new(2.0, 0.5, 4.0, Units::Native).unwrap();
        let lm = KnowledgeLandmark {
            input: InputGranule {
                dims: vec![
                    GaussianGranule::new(0.5, 0.2, 1.0, Units::Normalized).unwrap(),
                    GaussianGranule::new(0.5, 0.2, 1.0, Units::Normalized).unwrap(),
                ],
                prototype: vec![0.5, 0.5],
                context: 0,
                cluster: 0,
            },
            output,
            output_specificity: output.specificity(),
        };
        let mut rng = seeds::rng(5);
        let anchors: Vec<Vec<f64>> = (0..200).map(|_| vec![0.3 + 0.4 * rng.random::<f64>(), 0.3 + 0.4 * rng.random::<f64>()]).collect();
        let kt = KnowledgeTerm::new(&anchors, std::slice::from_ref(&lm)).unwrap();
        let dt = DataTerm::new(&toy_data(5, 1, |_| 0.0), 1.0).unwrap();
        let obj = AugmentedObjective::new(0.0, &dt, &kt).unwrap();
        let tc = TrainConfig { epochs: 1000, step_size: 1e-2, ..TrainConfig::default() };
        let out = fit(&ModelParameters::init(2, 8, 2), &obj, &tc).unwrap();
        let at_center = out.params.forward(&[0.5, 0.5]).unwrap();
        assert!((at_center - 2.0).abs() <= 0.5 * 0.5, "output {at_center}");
    }

    #[test]
    fn sweep_shapes_and_determinism() {
        let data = toy_data(30, 3, |x| x[0]);
        let (train, val) = data.split_at(20);
        let problem = SweepProblem {
            data: DataTerm::new(&train, 1.0).unwrap(),
            knowledge: KnowledgeTerm::new(&[], &[]).unwrap(),
            val_local: val.clone(),
            val_global: val,
            init: ModelParameters::init(2, 4, 1),
        };
        let tc = TrainConfig { epochs: 20, ..TrainConfig::default() };
        // Without landmarks only lambda = 1 is admissible.
        assert!(sweep(0.5, &problem, &tc, 1).is_err());
        let mut with_knowledge = problem.clone();
        let output = GaussianGranule::new(0.5, 0.3, 1.0, Units::Native).unwrap();
        let lm = KnowledgeLandmark {
            input: InputGranule {
                dims: vec![GaussianGranule::new(0.5, 0.5, 1.0, Units::Normalized).unwrap(); 2],
                prototype: vec![0.5, 0.5],
                context: 0,
                cluster: 0,
            },
            output,
            output_specificity: output.specificity(),
        };
        with_knowledge.knowledge = KnowledgeTerm::new(&[vec![0.2, 0.2], vec![0.8, 0.5]], &[lm]).unwrap();
        let a = sweep(1.0, &with_knowledge, &tc, 1).unwrap();
        assert_eq!(a.records.iter().map(|r| r.lambda).collect::<Vec<_>>(), vec![0.0, 1.0]);
        let b = sweep(1.0, &with_knowledge, &tc, 2).unwrap();
        assert_eq!(a.records, b.records);
        for r in &a.records {
            assert_eq!(r.q_total, r.q1 + r.q2);
        }
        let best = a.optimum().q_total;
        assert!(a.records.iter().all(|r| best <= r.q_total));
    }

    #[test]
    fn invalid_records_round_trip_through_json() {
        let rec = SweepRecord::invalid(0.3);
        let text = serde_json::to_string(&rec).unwrap();
        assert!(text.contains("\"q1\":null"), "{text}");
        let back: SweepRecord = serde_json::from_str(&text).unwrap();
        assert!(back.q1.is_nan() && back.q_total.is_nan() && !back.valid);
        let ok = SweepRecord::new(0.5, 0.1, 0.2);
        assert_eq!(serde_json::from_str::<SweepRecord>(&serde_json::to_string(&ok).unwrap()).unwrap(), ok);
    }
}
