//! Command-line front end. Each subcommand runs one pipeline stage and
//! writes its artifacts below the run directory:
//!
//! ```text
//! data/        gen-data         local and full-domain samples
//! landmarks/   build-landmarks  landmark set and clustering diagnostics
//! sweeps/      sweep            lambda sweep of the selected window
//! studies/     study-*          window, noise and width studies
//! reports/     report           improvement table
//! manifest.json                 every file with its SHA-256 digest
//! ```

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, num, read_json, write_csv, write_json, Manifest, RunDir};
use crate::benchgen::{Benchmark, LabeledDataset, ParameterSpec};
use crate::config::{NamedWindow, RunConfig};
use crate::error::{Error, Result};
use crate::experiments::{
    build_landmark_set, generate_global, generate_local, noise_study, run_sweep, sweep_problem, train_config,
    width_study, window_study, StudyCell, StudyKind, StudyResult, SweepInputs, TestPhase,
};
use crate::landmarks::{LandmarkDocument, LandmarkSet, LandmarkSettings};
use crate::objective::LossParts;
use crate::seeds::{self, tag};
use crate::training::{DeltaQ, SweepRecord, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "kdml", version, about = "Knowledge-data learning with granular knowledge landmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration (JSON); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "JSON")]
    pub config: Option<PathBuf>,

    /// Overrides `output_dir` from the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,

    /// Worker threads for the lambda fits of a sweep.
    #[arg(long, global = true, default_value_t = 1, value_name = "N")]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Sample local data on the selected window and full-domain data.
    GenData,
    /// Build knowledge landmarks from the generated knowledge samples.
    BuildLandmarks,
    /// Lambda sweep on the generated data and landmarks.
    Sweep,
    /// Sweeps on every window, repeated over seeds.
    StudyWindows,
    /// Optimal lambda under increasing label noise.
    StudyNoise,
    /// Optimal lambda under increasing parameter width.
    StudyWidth,
    /// Improvement table from the window study (or from sweeps).
    Report,
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code: 0 on success, 1 on runtime failure and
/// 2 on usage or configuration errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                2
            } else {
                1
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    if cli.jobs == 0 {
        return Err(Error::Config("--jobs: must be at least 1".into()));
    }
    let dir = RunDir::new(&cfg.output_dir);
    let mut manifest = Manifest::open(&dir, &cfg)?;
    match cli.command {
        Command::GenData => gen_data(&cfg, &dir, &mut manifest)?,
        Command::BuildLandmarks => build_landmarks(&cfg, &dir, &mut manifest)?,
        Command::Sweep => sweep(&cfg, &dir, &mut manifest, cli.jobs)?,
        Command::StudyWindows => study(&cfg, &dir, &mut manifest, StudyKind::Windows, cli.jobs)?,
        Command::StudyNoise => study(&cfg, &dir, &mut manifest, StudyKind::Noise, cli.jobs)?,
        Command::StudyWidth => study(&cfg, &dir, &mut manifest, StudyKind::Width, cli.jobs)?,
        Command::Report => report(&cfg, &dir, &mut manifest)?,
    }
    manifest.save(&dir)
}

const DATA_INDEX: &str = "data/datasets.json";
const LANDMARKS: &str = "landmarks/landmarks.json";
const LANDMARK_BUILD: &str = "landmarks/build.json";

/// Sidecar of the generated datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataIndex {
    pub benchmark: Benchmark,
    pub window: NamedWindow,
    pub seed: u64,
    pub width_ratio: f64,
    /// Label noise level of the local training split.
    pub alpha: f64,
    /// Fixed parameters of the local data.
    pub w0: Vec<f64>,
    pub parameters: Vec<ParameterSpec>,
    pub files: Vec<DataFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFile {
    pub path: String,
    pub rows: usize,
    pub seed: u64,
}

impl DataIndex {
    fn file(&self, path: &str) -> Result<&DataFile> {
        self.files
            .iter()
            .find(|f| f.path == path)
            .ok_or_else(|| Error::Config(format!("{DATA_INDEX} does not list {path}; run `gen-data` again")))
    }
}

const LOCAL_TRAIN: &str = "data/local_train.csv";
const LOCAL_VALIDATION: &str = "data/local_validation.csv";
const LOCAL_TEST: &str = "data/local_test.csv";
const KNOWLEDGE: &str = "data/knowledge.csv";
const ANCHORS: &str = "data/anchors.csv";
const GLOBAL_VALIDATION: &str = "data/global_validation.csv";
const GLOBAL_TEST: &str = "data/global_test.csv";

fn gen_data(cfg: &RunConfig, dir: &RunDir, manifest: &mut Manifest) -> Result<()> {
    let window = cfg.selected_window()?;
    let local = generate_local(cfg, &window.bounds, cfg.seed)?;
    let global = generate_global(cfg, cfg.width_ratio, cfg.seed)?;
    let labeled: [(&str, &LabeledDataset); 6] = [
        (LOCAL_TRAIN, &local.train),
        (LOCAL_VALIDATION, &local.validation),
        (LOCAL_TEST, &local.test),
        (KNOWLEDGE, &global.knowledge),
        (GLOBAL_VALIDATION, &global.validation),
        (GLOBAL_TEST, &global.test),
    ];
    let mut files = Vec::new();
    for (rel, data) in labeled {
        artifacts::write_dataset(&dir.path(rel), data)?;
        files.push(DataFile { path: rel.into(), rows: data.len(), seed: data.seed });
    }
    artifacts::write_points(&dir.path(ANCHORS), &global.anchors)?;
    files.push(DataFile { path: ANCHORS.into(), rows: global.anchors.len(), seed: seeds::derive(cfg.seed, tag::ANCHORS) });
    let index = DataIndex {
        benchmark: cfg.benchmark,
        window: window.clone(),
        seed: cfg.seed,
        width_ratio: cfg.width_ratio,
        alpha: 0.0,
        w0: cfg.benchmark.nominal_parameters(),
        parameters: cfg.benchmark.parameter_specs(),
        files,
    };
    write_json(&dir.path(DATA_INDEX), &index)?;
    let mut written: Vec<String> = index.files.iter().map(|f| f.path.clone()).collect();
    written.push(DATA_INDEX.into());
    let settings = serde_json::json!({
        "benchmark": cfg.benchmark,
        "window": window,
        "seed": cfg.seed,
        "width_ratio": cfg.width_ratio,
        "samples": cfg.samples,
    });
    manifest.record(dir, "gen-data", settings, &written)?;
    println!("gen-data: {} rows of local training data on {} written to {}", local.train.len(), window.id, dir.path("data").display());
    Ok(())
}

/// Reads the generated data index and checks it against the configuration.
fn load_index(cfg: &RunConfig, dir: &RunDir) -> Result<DataIndex> {
    let index: DataIndex = read_json(&dir.require(DATA_INDEX, "gen-data")?)?;
    let window = cfg.selected_window()?;
    if index.benchmark != cfg.benchmark || index.window != window || index.seed != cfg.seed || index.width_ratio != cfg.width_ratio {
        return Err(Error::Config(format!(
            "{} holds {} data for window `{}` (seed {}, width ratio {}); run `gen-data` with the current configuration",
            dir.path("data").display(),
            index.benchmark,
            index.window.id,
            index.seed,
            index.width_ratio
        )));
    }
    Ok(index)
}

fn load_dataset(dir: &RunDir, index: &DataIndex, rel: &str) -> Result<LabeledDataset> {
    let info = index.file(rel)?;
    artifacts::read_dataset(&dir.require(rel, "gen-data")?, info.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkBuildInfo {
    pub settings: LandmarkSettings,
    pub seed: u64,
    /// Digest of the knowledge samples the landmarks were built from.
    pub knowledge_sha256: String,
    pub landmarks: usize,
    pub max_constraint_violation: f64,
    /// Conditional FCM objective per iteration, one trace per context.
    pub objective_traces: Vec<Vec<f64>>,
}

fn build_landmarks(cfg: &RunConfig, dir: &RunDir, manifest: &mut Manifest) -> Result<()> {
    let index = load_index(cfg, dir)?;
    let knowledge = load_dataset(dir, &index, KNOWLEDGE)?;
    let build = build_landmark_set(cfg, &knowledge, cfg.seed)?;
    write_json(&dir.path(LANDMARKS), &build.set.to_document())?;
    let info = LandmarkBuildInfo {
        settings: cfg.landmark_settings(),
        seed: seeds::derive(cfg.seed, tag::LANDMARKS),
        knowledge_sha256: artifacts::sha256_file(&dir.path(KNOWLEDGE))?,
        landmarks: build.set.landmarks.len(),
        max_constraint_violation: build.partition.max_constraint_violation(&build.context_degrees),
        objective_traces: build.objective_traces,
    };
    write_json(&dir.path(LANDMARK_BUILD), &info)?;
    let settings = serde_json::json!({ "landmarks": info.settings, "seed": info.seed });
    manifest.record(dir, "build-landmarks", settings, &[LANDMARKS.into(), LANDMARK_BUILD.into()])?;
    println!("build-landmarks: {} landmarks written to {}", info.landmarks, dir.path(LANDMARKS).display());
    Ok(())
}

fn load_landmarks(dir: &RunDir) -> Result<LandmarkSet> {
    let info: LandmarkBuildInfo = read_json(&dir.require(LANDMARK_BUILD, "build-landmarks")?)?;
    if artifacts::sha256_file(&dir.path(KNOWLEDGE))? != info.knowledge_sha256 {
        return Err(Error::Config(format!(
            "{} were built from different knowledge samples; run `build-landmarks` again",
            dir.path(LANDMARKS).display()
        )));
    }
    let doc: LandmarkDocument = read_json(&dir.require(LANDMARKS, "build-landmarks")?)?;
    LandmarkSet::from_document(doc)
}

/// Per-sweep manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub benchmark: Benchmark,
    pub window: NamedWindow,
    pub seed: u64,
    pub init_seed: u64,
    pub width_ratio: f64,
    pub alpha: f64,
    pub grid_step: f64,
    pub hidden: usize,
    pub output_bias_from_data: bool,
    pub train: TrainConfig,
    pub lambda_opt: f64,
    pub baseline: SweepRecord,
    pub optimum: SweepRecord,
    pub delta: DeltaQ,
    /// Objectives of the selected model on the test sets.
    pub test: TestPhase,
    pub files: Vec<String>,
}

fn sweep(cfg: &RunConfig, dir: &RunDir, manifest: &mut Manifest, jobs: usize) -> Result<()> {
    let index = load_index(cfg, dir)?;
    let train = load_dataset(dir, &index, LOCAL_TRAIN)?;
    let validation = load_dataset(dir, &index, LOCAL_VALIDATION)?;
    let test_local = load_dataset(dir, &index, LOCAL_TEST)?;
    let global_validation = load_dataset(dir, &index, GLOBAL_VALIDATION)?;
    let test_global = load_dataset(dir, &index, GLOBAL_TEST)?;
    let anchors = artifacts::read_points(&dir.require(ANCHORS, "gen-data")?)?;
    let landmarks = load_landmarks(dir)?;

    let inputs = SweepInputs { train: &train, validation: &validation, anchors: &anchors, global_validation: &global_validation, landmarks: &landmarks };
    let problem = sweep_problem(cfg, inputs, cfg.seed)?;
    let tc = train_config(cfg, cfg.seed);
    let summary = run_sweep(cfg, cfg.grid_step, &problem, &tc, &test_local, &test_global, jobs)?;

    let base = format!("sweeps/{}", index.window.id);
    let mut files = vec![format!("{base}/sweep.csv")];
    write_records(&dir.path(&files[0]), &summary.outcome.records)?;
    for (rec, params) in summary.outcome.records.iter().zip(&summary.outcome.params) {
        if let Some(p) = params {
            let rel = format!("{base}/params/{}.json", rec.params_ref);
            write_json(&dir.path(&rel), p)?;
            files.push(rel);
        }
    }
    let mut traced = vec![summary.optimum.lambda];
    if summary.baseline.lambda != summary.optimum.lambda {
        traced.push(summary.baseline.lambda);
    }
    let trace_rows = traced.iter().flat_map(|&l| {
        let idx = summary.outcome.index_of(l).expect("lambda on grid");
        summary.outcome.traces[idx].iter().enumerate().map(move |(e, p)| trace_row(l, e, p))
    });
    let trace = format!("{base}/trace.csv");
    write_csv(&dir.path(&trace), &["lambda", "epoch", "loss", "data_loss", "knowledge_loss"], trace_rows)?;
    files.push(trace);

    let sm = SweepManifest {
        benchmark: cfg.benchmark,
        window: index.window.clone(),
        seed: cfg.seed,
        init_seed: seeds::derive(cfg.seed, tag::INIT),
        width_ratio: cfg.width_ratio,
        alpha: index.alpha,
        grid_step: cfg.grid_step,
        hidden: cfg.hidden,
        output_bias_from_data: cfg.output_bias_from_data,
        train: tc,
        lambda_opt: summary.lambda_opt(),
        baseline: summary.baseline.clone(),
        optimum: summary.optimum.clone(),
        delta: summary.delta,
        test: summary.test,
        files: files.clone(),
    };
    let sm_path = format!("{base}/sweep.json");
    write_json(&dir.path(&sm_path), &sm)?;
    files.push(sm_path);
    let settings = serde_json::json!({
        "grid_step": cfg.grid_step,
        "train": tc,
        "hidden": cfg.hidden,
        "seed": cfg.seed,
        "output_bias_from_data": cfg.output_bias_from_data,
    });
    manifest.record(dir, &format!("sweep:{}", index.window.id), settings, &files)?;
    println!(
        "sweep: {} lambda values on {}; lambda_opt = {}, Q = {:.6} vs {:.6} at lambda = 1 ({:+.2}%)",
        summary.outcome.records.len(),
        index.window.id,
        summary.lambda_opt(),
        summary.optimum.q_total,
        summary.baseline.q_total,
        summary.delta.relative_pct
    );
    Ok(())
}

fn trace_row(lambda: f64, epoch: usize, p: &LossParts) -> Vec<String> {
    vec![num(lambda), epoch.to_string(), num(p.total), num(p.data), num(p.knowledge)]
}

fn record_row(r: &SweepRecord) -> Vec<String> {
    vec![num(r.lambda), num(r.q1), num(r.q2), num(r.q_total), r.valid.to_string()]
}

fn write_records(path: &Path, records: &[SweepRecord]) -> Result<()> {
    write_csv(path, &["lambda", "q1", "q2", "q_total", "valid"], records.iter().map(record_row))
}

/// Study output together with the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDocument {
    pub seed: u64,
    pub window: Option<String>,
    pub train: TrainConfig,
    pub hidden: usize,
    pub output_bias_from_data: bool,
    /// Rank correlation of the factor with the median optimal lambda.
    pub lambda_trend: Option<f64>,
    pub result: StudyResult,
}

fn study(cfg: &RunConfig, dir: &RunDir, manifest: &mut Manifest, kind: StudyKind, jobs: usize) -> Result<()> {
    let progress = |c: &StudyCell| {
        eprintln!(
            "[{}] {} repeat {}: lambda_opt = {}, dQ = {:+.2}%",
            kind.id(),
            c.factor,
            c.repeat,
            c.lambda_opt,
            c.delta.relative_pct
        )
    };
    let result = match kind {
        StudyKind::Windows => window_study(cfg, &cfg.window_set(), jobs, &progress)?,
        StudyKind::Noise => noise_study(cfg, jobs, &progress)?,
        StudyKind::Width => width_study(cfg, jobs, &progress)?,
    };
    let doc = StudyDocument {
        seed: cfg.seed,
        window: (kind != StudyKind::Windows).then(|| cfg.window.clone()),
        train: cfg.train,
        hidden: cfg.hidden,
        output_bias_from_data: cfg.output_bias_from_data,
        lambda_trend: result.lambda_trend(),
        result,
    };
    let files = write_study(dir, &doc)?;
    let settings = serde_json::json!({
        "grid_step": doc.result.grid_step,
        "repeats": doc.result.repeats,
        "train": cfg.train,
        "seed": cfg.seed,
        "studies": cfg.studies,
    });
    manifest.record(dir, &format!("study-{}", kind.id()), settings, &files)?;
    for s in &doc.result.summary {
        println!(
            "{:>8}  lambda_opt median {:.2} [{:.2}, {:.2}]  dQ% median {:+.2}",
            s.factor, s.lambda_opt.median, s.lambda_opt.min, s.lambda_opt.max, s.dq_pct.median
        );
    }
    if kind != StudyKind::Windows {
        match doc.lambda_trend {
            Some(r) => println!("Spearman(factor, median lambda_opt) = {r:.3}"),
            None => println!("Spearman(factor, median lambda_opt) undefined (constant median)"),
        }
    }
    Ok(())
}

fn write_study(dir: &RunDir, doc: &StudyDocument) -> Result<Vec<String>> {
    let base = format!("studies/{}", doc.result.study.id());
    let r = &doc.result;
    let cells = format!("{base}/cells.csv");
    write_csv(
        &dir.path(&cells),
        &["factor", "repeat", "lambda_opt", "dq_abs", "dq_pct"],
        r.cells.iter().map(|c| vec![c.factor.clone(), c.repeat.to_string(), num(c.lambda_opt), num(c.delta.absolute), num(c.delta.relative_pct)]),
    )?;
    let summary = format!("{base}/summary.csv");
    write_csv(
        &dir.path(&summary),
        &["factor", "median", "min", "max"],
        r.summary.iter().map(|s| vec![s.factor.clone(), num(s.lambda_opt.median), num(s.lambda_opt.min), num(s.lambda_opt.max)]),
    )?;
    let dq_summary = format!("{base}/dq_summary.csv");
    write_csv(
        &dir.path(&dq_summary),
        &["factor", "median", "min", "max"],
        r.summary.iter().map(|s| vec![s.factor.clone(), num(s.dq_pct.median), num(s.dq_pct.min), num(s.dq_pct.max)]),
    )?;
    let records = format!("{base}/records.csv");
    write_csv(
        &dir.path(&records),
        &["factor", "repeat", "lambda", "q1", "q2", "q_total", "valid"],
        r.cells.iter().flat_map(|c| {
            c.records.iter().map(move |rec| {
                let mut row = vec![c.factor.clone(), c.repeat.to_string()];
                row.extend(record_row(rec));
                row
            })
        }),
    )?;
    let json = format!("{base}/study.json");
    write_json(&dir.path(&json), doc)?;
    Ok(vec![cells, summary, dq_summary, records, json])
}

/// One row of the improvement table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub window: String,
    pub lambda_opt: f64,
    pub kd: SweepRecord,
    pub baseline: SweepRecord,
    pub improvement_pct: f64,
}

/// Cell with the median improvement; the lower middle for an even count.
fn median_cell<'a>(cells: &[&'a StudyCell]) -> &'a StudyCell {
    let mut sorted = cells.to_vec();
    sorted.sort_by(|a, b| a.delta.relative_pct.total_cmp(&b.delta.relative_pct));
    sorted[(sorted.len() - 1) / 2]
}

fn report_rows(cfg: &RunConfig, dir: &RunDir) -> Result<(Vec<ReportRow>, String)> {
    let study_path = dir.path("studies/windows/study.json");
    if study_path.is_file() {
        let doc: StudyDocument = read_json(&study_path)?;
        let rows = doc
            .result
            .summary
            .iter()
            .map(|s| {
                let group: Vec<&StudyCell> = doc.result.cells.iter().filter(|c| c.factor == s.factor).collect();
                let c = median_cell(&group);
                ReportRow {
                    window: c.factor.clone(),
                    lambda_opt: c.lambda_opt,
                    kd: c.optimum.clone(),
                    baseline: c.baseline.clone(),
                    improvement_pct: c.delta.relative_pct,
                }
            })
            .collect();
        return Ok((rows, format!("window study, median of {} repeats", doc.result.repeats)));
    }
    let mut rows = Vec::new();
    for w in cfg.window_set() {
        let p = dir.path(&format!("sweeps/{}/sweep.json", w.id));
        if p.is_file() {
            let sm: SweepManifest = read_json(&p)?;
            rows.push(ReportRow {
                window: w.id,
                lambda_opt: sm.lambda_opt,
                kd: sm.optimum,
                baseline: sm.baseline,
                improvement_pct: sm.delta.relative_pct,
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::MissingArtifact { path: study_path, subcommand: "study-windows" });
    }
    Ok((rows, "single sweeps".into()))
}

fn report(cfg: &RunConfig, dir: &RunDir, manifest: &mut Manifest) -> Result<()> {
    let (rows, source) = report_rows(cfg, dir)?;
    let header = ["window", "lambda_opt", "kd_q1", "kd_q2", "kd_q", "base_q1", "base_q2", "base_q", "improvement_pct"];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.window.clone(),
                format!("{:.2}", r.lambda_opt),
                format!("{:.6}", r.kd.q1),
                format!("{:.6}", r.kd.q2),
                format!("{:.6}", r.kd.q_total),
                format!("{:.6}", r.baseline.q1),
                format!("{:.6}", r.baseline.q2),
                format!("{:.6}", r.baseline.q_total),
                format!("{:.2}", r.improvement_pct),
            ]
        })
        .collect();
    let csv_rel = "reports/improvement.csv".to_string();
    write_csv(
        &dir.path(&csv_rel),
        &header,
        rows.iter().map(|r| {
            vec![
                r.window.clone(),
                num(r.lambda_opt),
                num(r.kd.q1),
                num(r.kd.q2),
                num(r.kd.q_total),
                num(r.baseline.q1),
                num(r.baseline.q2),
                num(r.baseline.q_total),
                num(r.improvement_pct),
            ]
        }),
    )?;
    let text = format!("{} ({source})\n{}", cfg.benchmark, render_table(&header, &cells));
    let txt_rel = "reports/improvement.txt".to_string();
    std::fs::create_dir_all(dir.path("reports")).map_err(|e| Error::io(dir.path("reports"), e))?;
    std::fs::write(dir.path(&txt_rel), &text).map_err(|e| Error::io(dir.path(&txt_rel), e))?;
    manifest.record(dir, "report", serde_json::json!({ "source": source }), &[csv_rel, txt_rel])?;
    print!("{text}");
    Ok(())
}

/// Right-aligned columns; the first column is left-aligned.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_owned() + "\n"
    };
    let mut out = line(header.to_vec());
    out += &line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for row in rows {
        out += &line(row.iter().map(String::as_str).collect());
    }
    out
}
