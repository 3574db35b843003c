//! The augmented loss `L = lambda * L_data + (1 - lambda) * L_knowledge`.
//!
//! `L_data` is the squared error on the local data normalized by the target
//! span. `L_knowledge` averages, over a frozen set of anchor inputs, the
//! activation-weighted squared shortfall `A_i(x) * (1 - V_i(x))^2` where
//! `V_i = B_i(M(x)) * sp(B_i)` matches the model output against the output
//! granule of landmark `i`.

use serde::{Deserialize, Serialize};

use crate::benchgen::LabeledDataset;
use crate::error::{Error, Result};
use crate::granulation::GaussianGranule;
use crate::landmarks::KnowledgeLandmark;
use crate::network::{exp, BatchState, InputMatrix, ModelParameters};

/// Matching degree of a numeric value with a granule: membership times specificity.
pub fn match_numeric(y: f64, g: &GaussianGranule) -> f64 {
    g.membership(y) * g.specificity()
}

#[derive(Debug, Clone)]
pub struct ObjectiveConfig {
    pub lambda: f64,
    pub y_span: f64,
    /// Normalized anchor inputs.
    pub anchors: Vec<Vec<f64>>,
    pub landmarks: Vec<KnowledgeLandmark>,
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if !(self.y_span > 0.0) || !self.y_span.is_finite() {
            return Err(Error::Config(format!("target span must be positive, got {}", self.y_span)));
        }
        if self.lambda < 1.0 && (self.anchors.is_empty() || self.landmarks.is_empty()) {
            return Err(Error::Config("knowledge term needs anchors and landmarks when lambda < 1".into()));
        }
        Ok(())
    }
}

/// Loss value split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub data: f64,
    pub knowledge: f64,
}

impl LossParts {
    pub fn combine(lambda: f64, data: f64, knowledge: f64) -> Self {
        Self { total: lambda * data + (1.0 - lambda) * knowledge, data, knowledge }
    }
}

/// Local data term with inputs already normalized.
#[derive(Debug, Clone)]
pub struct DataTerm {
    pub inputs: InputMatrix,
    pub targets: Vec<f64>,
    pub y_span: f64,
}

impl DataTerm {
    pub fn new(data: &LabeledDataset, y_span: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("local dataset"));
        }
        if !(y_span > 0.0) {
            return Err(Error::Config(format!("target span must be positive, got {y_span}")));
        }
        Ok(Self { inputs: InputMatrix::from_rows(&data.inputs)?, targets: data.targets.clone(), y_span })
    }

    fn scale(&self) -> f64 {
        1.0 / (self.targets.len() as f64 * self.y_span * self.y_span)
    }

    /// Loss from model outputs; writes `dL_data/dM` per sample into `upstream` scaled by `weight`.
    fn eval(&self, outputs: &[f64], weight: f64, upstream: Option<&mut Vec<f64>>) -> f64 {
        let scale = self.scale();
        let loss = outputs.iter().zip(&self.targets).map(|(m, t)| (m - t) * (m - t)).sum::<f64>() * scale;
        if let Some(up) = upstream {
            up.clear();
            up.extend(outputs.iter().zip(&self.targets).map(|(m, t)| weight * 2.0 * (m - t) * scale));
        }
        loss
    }
}

/// Knowledge term with anchor activations `A_i(x_q)` precomputed.
#[derive(Debug, Clone)]
pub struct KnowledgeTerm {
    pub anchors: InputMatrix,
    /// Row-major `n_anchors x n_landmarks`.
    activation: Vec<f64>,
    centers: Vec<f64>,
    inv_spread_sq: Vec<f64>,
    specificity: Vec<f64>,
}

impl KnowledgeTerm {
    pub fn new(anchors: &[Vec<f64>], landmarks: &[KnowledgeLandmark]) -> Result<Self> {
        let mut activation = Vec::with_capacity(anchors.len() * landmarks.len());
        for x in anchors {
            activation.extend(landmarks.iter().map(|l| l.input.membership(x)));
        }
        Ok(Self {
            anchors: InputMatrix::from_rows(anchors)?,
            activation,
            centers: landmarks.iter().map(|l| l.output.center).collect(),
            inv_spread_sq: landmarks.iter().map(|l| 1.0 / (l.output.spread * l.output.spread)).collect(),
            specificity: landmarks.iter().map(|l| l.output_specificity).collect(),
        })
    }

    pub fn n_landmarks(&self) -> usize {
        self.centers.len()
    }

    pub fn n_anchors(&self) -> usize {
        self.anchors.rows()
    }

    /// The same landmarks restricted to the anchors at `idx`.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let c = self.n_landmarks();
        let rows: Vec<Vec<f64>> = idx.iter().map(|&q| self.anchors.row(q).to_vec()).collect();
        Ok(Self {
            anchors: InputMatrix::from_rows(&rows)?,
            activation: idx.iter().flat_map(|&q| self.activation[q * c..(q + 1) * c].iter().copied()).collect(),
            centers: self.centers.clone(),
            inv_spread_sq: self.inv_spread_sq.clone(),
            specificity: self.specificity.clone(),
        })
    }

    /// Loss from model outputs at the anchors; optionally writes `weight * dL_knowledge/dM`.
    fn eval(&self, outputs: &[f64], weight: f64, mut upstream: Option<&mut Vec<f64>>) -> f64 {
        let c = self.n_landmarks();
        if c == 0 || outputs.is_empty() {
            if let Some(up) = upstream {
                up.clear();
                up.resize(outputs.len(), 0.0);
            }
            return 0.0;
        }
        let inv_n = 1.0 / outputs.len() as f64;
        if let Some(up) = upstream.as_deref_mut() {
            up.clear();
        }
        let mut matches = vec![0.0; c];
        let mut total = 0.0;
        for (q, &m) in outputs.iter().enumerate() {
            let acts = &self.activation[q * c..(q + 1) * c];
            // Kept free of branches so the exponentials vectorize.
            for (((v, &center), &inv), &sp) in matches.iter_mut().zip(&self.centers).zip(&self.inv_spread_sq).zip(&self.specificity) {
                let diff = m - center;
                *v = sp * exp(-diff * diff * inv);
            }
            let mut loss_q = 0.0;
            let mut grad_q = 0.0;
            for i in 0..c {
                let (a, v) = (acts[i], matches[i]);
                let gap = 1.0 - v;
                loss_q += a * gap * gap;
                // d/dM of a (1 - V)^2 = -2 a (1 - V) dV/dM, dV/dM = -2 V (M - c) / sigma^2.
                grad_q += a * gap * v * (m - self.centers[i]) * self.inv_spread_sq[i];
            }
            total += loss_q;
            if let Some(up) = upstream.as_deref_mut() {
                up.push(weight * inv_n * 4.0 * grad_q);
            }
        }
        total * inv_n
    }
}

/// Scratch buffers reused across evaluations.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    data_state: BatchState,
    anchor_state: BatchState,
    upstream: Vec<f64>,
}

/// `L(a; lambda)` over a data term and a knowledge term.
#[derive(Debug, Clone, Copy)]
pub struct AugmentedObjective<'a> {
    pub lambda: f64,
    pub data: &'a DataTerm,
    pub knowledge: &'a KnowledgeTerm,
}

impl<'a> AugmentedObjective<'a> {
    pub fn new(lambda: f64, data: &'a DataTerm, knowledge: &'a KnowledgeTerm) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Config(format!("lambda {lambda} outside [0, 1]")));
        }
        if lambda < 1.0 && (knowledge.n_landmarks() == 0 || knowledge.n_anchors() == 0) {
            return Err(Error::Config("knowledge term needs anchors and landmarks when lambda < 1".into()));
        }
        Ok(Self { lambda, data, knowledge })
    }

    pub fn evaluate(&self, params: &ModelParameters, ws: &mut Workspace) -> Result<LossParts> {
        params.forward_batch(&self.data.inputs, &mut ws.data_state)?;
        let data = self.data.eval(&ws.data_state.outputs, 0.0, None);
        let knowledge = if self.knowledge.n_anchors() > 0 {
            params.forward_batch(&self.knowledge.anchors, &mut ws.anchor_state)?;
            self.knowledge.eval(&ws.anchor_state.outputs, 0.0, None)
        } else {
            0.0
        };
        Ok(LossParts::combine(self.lambda, data, knowledge))
    }

    /// Loss and its gradient with respect to the parameters. `grad` is overwritten.
    pub fn evaluate_with_gradient(&self, params: &ModelParameters, ws: &mut Workspace, grad: &mut ModelParameters) -> Result<LossParts> {
        grad.values.iter_mut().for_each(|g| *g = 0.0);
        let Workspace { data_state, anchor_state, upstream } = ws;

        params.forward_batch(&self.data.inputs, data_state)?;
        let data = self.data.eval(&data_state.outputs, self.lambda, Some(upstream));
        if self.lambda > 0.0 {
            params.accumulate_gradient(&self.data.inputs, data_state, upstream, grad);
        }

        let knowledge = if self.knowledge.n_anchors() > 0 {
            params.forward_batch(&self.knowledge.anchors, anchor_state)?;
            let value = self.knowledge.eval(&anchor_state.outputs, 1.0 - self.lambda, Some(upstream));
            if self.lambda < 1.0 {
                params.accumulate_gradient(&self.knowledge.anchors, anchor_state, upstream, grad);
            }
            value
        } else {
            0.0
        };
        Ok(LossParts::combine(self.lambda, data, knowledge))
    }
}

/// Normalized mean squared error of the model on `dataset` (normalized inputs).
pub fn data_loss(params: &ModelParameters, dataset: &LabeledDataset, y_span: f64) -> Result<f64> {
    let term = DataTerm::new(dataset, y_span)?;
    let mut state = BatchState::default();
    params.forward_batch(&term.inputs, &mut state)?;
    Ok(term.eval(&state.outputs, 0.0, None))
}

/// Knowledge term of `cfg`; zero when there are no landmarks and `lambda = 1`.
pub fn knowledge_loss(params: &ModelParameters, cfg: &ObjectiveConfig) -> Result<f64> {
    if cfg.landmarks.is_empty() || cfg.anchors.is_empty() {
        if cfg.lambda < 1.0 {
            return Err(Error::Config("knowledge term needs anchors and landmarks when lambda < 1".into()));
        }
        return Ok(0.0);
    }
    let term = KnowledgeTerm::new(&cfg.anchors, &cfg.landmarks)?;
    let mut state = BatchState::default();
    params.forward_batch(&term.anchors, &mut state)?;
    Ok(term.eval(&state.outputs, 0.0, None))
}

pub fn augmented_loss(params: &ModelParameters, dataset: &LabeledDataset, cfg: &ObjectiveConfig) -> Result<LossParts> {
    cfg.validate()?;
    let data = data_loss(params, dataset, cfg.y_span)?;
    let knowledge = knowledge_loss(params, cfg)?;
    Ok(LossParts::combine(cfg.lambda, data, knowledge))
}

/// Identifies which loss contribution a derivative refers to.
#[derive(Debug, Clone, Copy)]
pub enum LossTerm<'a> {
    /// One local sample out of `n_samples`.
    Data { target: f64, n_samples: usize, y_span: f64 },
    /// One (anchor, landmark) pair out of `n_anchors` anchors.
    Knowledge { activation: f64, landmark: &'a KnowledgeLandmark, n_anchors: usize },
}

/// Derivative of the weighted loss contribution of `term` with respect to the model output.
pub fn loss_output_derivative(y_pred: f64, lambda: f64, term: LossTerm<'_>) -> f64 {
    match term {
        LossTerm::Data { target, n_samples, y_span } => {
            2.0 * lambda * (y_pred - target) / (n_samples as f64 * y_span * y_span)
        }
        LossTerm::Knowledge { activation, landmark, n_anchors } => {
            let g = &landmark.output;
            let v = g.membership(y_pred) * landmark.output_specificity;
            let dv = v * (-2.0 * (y_pred - g.center) / (g.spread * g.spread));
            (1.0 - lambda) * (2.0 / n_anchors as f64) * activation * (1.0 - v) * (-dv)
        }
    }
}
