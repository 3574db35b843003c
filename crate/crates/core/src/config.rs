//! Run configuration: one JSON document with defaults for every field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::benchgen::{Benchmark, DomainBox};
use crate::error::{Error, Result};
use crate::landmarks::{FcmSettings, LandmarkSettings};
use crate::network::DEFAULT_HIDDEN;
use crate::training::TrainConfig;

/// An observation window with its identifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedWindow {
    pub id: String,
    pub bounds: DomainBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSizes {
    /// Local training points (`N1`).
    pub local: usize,
    /// Held-out local points for `Q1`.
    pub validation: usize,
    /// Frozen knowledge-loss anchors (`N2`).
    pub anchors: usize,
    /// Full-domain samples used to build landmarks.
    pub knowledge: usize,
    /// Full-domain samples for `Q2`.
    pub global: usize,
    pub test_local: usize,
    pub test_global: usize,
}

impl Default for SampleSizes {
    fn default() -> Self {
        Self { local: 1000, validation: 250, anchors: 2000, knowledge: 5000, global: 5000, test_local: 250, test_global: 5000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandmarkParams {
    pub contexts: usize,
    /// Clusters per context; 8 for env and 5 for piston when absent.
    pub clusters: Option<usize>,
    pub rho: f64,
    pub fuzzifier: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for LandmarkParams {
    fn default() -> Self {
        let fcm = FcmSettings::default();
        Self { contexts: 5, clusters: None, rho: 0.2, fuzzifier: fcm.fuzzifier, tolerance: fcm.tolerance, max_iter: fcm.max_iter }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyParams {
    pub repeats: usize,
    pub alphas: Vec<f64>,
    /// Lambda grid step used by the noise study.
    pub noise_grid_step: f64,
    pub ratios: Vec<f64>,
    /// Lambda grid step used by the width study.
    pub width_grid_step: f64,
}

impl Default for StudyParams {
    fn default() -> Self {
        Self {
            repeats: 3,
            alphas: (1..=9).map(|k| k as f64 / 10.0).collect(),
            noise_grid_step: 0.05,
            ratios: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            width_grid_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub benchmark: Benchmark,
    /// Window used by `gen-data`, `sweep` and the noise study.
    pub window: String,
    /// Window set; the built-in `omega1..omega4` when empty.
    pub windows: Vec<NamedWindow>,
    pub samples: SampleSizes,
    pub landmarks: LandmarkParams,
    pub hidden: usize,
    pub grid_step: f64,
    /// Parameter width ratio for knowledge and `Q2` samples outside the width study.
    pub width_ratio: f64,
    pub train: TrainConfig,
    /// Start the output bias at the mean local target instead of zero.
    pub output_bias_from_data: bool,
    pub studies: StudyParams,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            benchmark: Benchmark::Env,
            window: "omega1".into(),
            windows: Vec::new(),
            samples: SampleSizes::default(),
            landmarks: LandmarkParams::default(),
            hidden: DEFAULT_HIDDEN,
            grid_step: 0.02,
            width_ratio: 1.0,
            train: TrainConfig::default(),
            output_bias_from_data: true,
            studies: StudyParams::default(),
            seed: 2024,
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

fn field(name: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{name}: {msg}"))
}

fn check_step(name: &str, step: f64) -> Result<()> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(field(name, format!("must lie in (0, 1], got {step}")));
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn clusters(&self) -> usize {
        self.landmarks.clusters.unwrap_or(match self.benchmark {
            Benchmark::Env => 8,
            Benchmark::Piston => 5,
        })
    }

    pub fn landmark_settings(&self) -> LandmarkSettings {
        LandmarkSettings {
            contexts: self.landmarks.contexts,
            rho: self.landmarks.rho,
            fcm: FcmSettings {
                clusters: self.clusters(),
                fuzzifier: self.landmarks.fuzzifier,
                tolerance: self.landmarks.tolerance,
                max_iter: self.landmarks.max_iter,
            },
        }
    }

    /// Configured windows, or the benchmark's built-in set.
    pub fn window_set(&self) -> Vec<NamedWindow> {
        if !self.windows.is_empty() {
            return self.windows.clone();
        }
        Benchmark::window_ids()
            .iter()
            .map(|id| NamedWindow { id: (*id).into(), bounds: self.benchmark.window(id).expect("built-in window") })
            .collect()
    }

    /// The window selected by `window`.
    pub fn selected_window(&self) -> Result<NamedWindow> {
        self.window_set()
            .into_iter()
            .find(|w| w.id == self.window)
            .ok_or_else(|| field("window", format!("unknown window `{}`", self.window)))
    }

    /// Checks every field before any computation starts.
    pub fn validate(&self) -> Result<()> {
        let s = &self.samples;
        for (name, n) in [
            ("samples.local", s.local),
            ("samples.validation", s.validation),
            ("samples.anchors", s.anchors),
            ("samples.knowledge", s.knowledge),
            ("samples.global", s.global),
            ("samples.test_local", s.test_local),
            ("samples.test_global", s.test_global),
        ] {
            if n == 0 {
                return Err(field(name, "must be at least 1"));
            }
        }
        let l = &self.landmarks;
        if l.contexts == 0 {
            return Err(field("landmarks.contexts", "must be at least 1"));
        }
        if self.clusters() == 0 {
            return Err(field("landmarks.clusters", "must be at least 1"));
        }
        if s.knowledge < l.contexts {
            return Err(field("samples.knowledge", "must be at least the number of contexts"));
        }
        if !(l.rho > 0.0 && l.rho < 1.0) {
            return Err(field("landmarks.rho", format!("must lie in (0, 1), got {}", l.rho)));
        }
        if !(l.fuzzifier > 1.0) || !l.fuzzifier.is_finite() {
            return Err(field("landmarks.fuzzifier", format!("must exceed 1, got {}", l.fuzzifier)));
        }
        if !(l.tolerance > 0.0) {
            return Err(field("landmarks.tolerance", "must be positive"));
        }
        if l.max_iter == 0 {
            return Err(field("landmarks.max_iter", "must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(field("hidden", "must be at least 1"));
        }
        check_step("grid_step", self.grid_step)?;
        check_step("studies.noise_grid_step", self.studies.noise_grid_step)?;
        check_step("studies.width_grid_step", self.studies.width_grid_step)?;
        if !(0.0..=1.0).contains(&self.width_ratio) {
            return Err(field("width_ratio", format!("must lie in [0, 1], got {}", self.width_ratio)));
        }
        self.train.validate().map_err(|e| match e {
            Error::Config(msg) => field("train", msg),
            other => other,
        })?;
        let st = &self.studies;
        if st.repeats == 0 {
            return Err(field("studies.repeats", "must be at least 1"));
        }
        if st.alphas.is_empty() || st.alphas.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(field("studies.alphas", "must be a non-empty list of non-negative values"));
        }
        if st.ratios.is_empty() || st.ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(field("studies.ratios", "must be a non-empty list of values in [0, 1]"));
        }
        let domain = self.benchmark.domain();
        let windows = self.window_set();
        for (k, w) in windows.iter().enumerate() {
            DomainBox::new(w.bounds.bounds.clone()).map_err(|e| field(&format!("windows[{k}]"), e))?;
            if !domain.contains_box(&w.bounds) {
                return Err(field(
                    &format!("windows[{k}]"),
                    format!("window `{}` {:?} is not contained in the {} domain {:?}", w.id, w.bounds.bounds, self.benchmark, domain.bounds),
                ));
            }
            if windows[..k].iter().any(|o| o.id == w.id) {
                return Err(field(&format!("windows[{k}]"), format!("duplicate window id `{}`", w.id)));
            }
        }
        self.selected_window()?;
        Ok(())
    }
}
