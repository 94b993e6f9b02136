//! Config-driven experiment runs: generate, pre-train, unlearn over a
//! matrix of cells, aggregate, plot and report.
//!
//! Every stage writes its artifacts into its own directory under the output
//! directory together with a `stage.json` record holding the stage key (a
//! hash of everything the stage depends on). A stage whose record matches
//! is skipped, so interrupted runs resume and repeated runs are no-ops.

mod aggregate;
mod config;
mod plot;
mod report;
mod stages;

pub use aggregate::{aggregate, gaps, AggSeries, GapRow, Group, Stat};
pub use config::{Cell, EvalConfig, ExperimentConfig, ModelSpec, UnlearnBlock, UnlearnHyper, SCHEMA_VERSION};
pub use plot::{line_chart, Line};
pub use report::{render_report, report, report_from, FinalRow, GapComparison, Report};
pub use stages::{evaluate_model, pretrain_model, split_scores, unlearn_cell, Data, UNLEARN_METRICS};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::biograph::hash_json;
use crate::evaluator::EvalReport;
use crate::nanolm::{load_checkpoint, read_trace, save_checkpoint, write_trace, Model, ModelConfig, TraceRow};
use crate::unlearner::{write_unlearn_trace, UnlearnEpoch};
use crate::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub key: String,
    /// Paths relative to the output directory.
    pub artifacts: Vec<PathBuf>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub config_hash: String,
    pub tool_version: String,
    pub out_dir: PathBuf,
    pub stages: Vec<StageRecord>,
    pub completed: bool,
}

impl RunManifest {
    pub fn read(out_dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json"))?)?)
    }

    fn write(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir)?;
        fs::write(self.out_dir.join("manifest.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Recompute every stage even when cached.
    pub force: bool,
    /// Overrides the configured worker count.
    pub workers: Option<usize>,
    /// Print one line per finished stage.
    pub verbose: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub name: String,
    pub config: ModelConfig,
    pub params: usize,
    pub pretrain: Vec<TraceRow>,
    pub eval: EvalReport,
}

/// Everything the report and the figures are built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub config_hash: String,
    pub models: Vec<ModelSummary>,
    pub unlearn: Vec<AggSeries>,
    pub gaps: Vec<GapRow>,
    /// Raw per-cell traces, in matrix order.
    pub cells: Vec<(Cell, Vec<UnlearnEpoch>)>,
}

impl Summary {
    pub fn read(out_dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json"))?)?)
    }

    pub fn model(&self, name: &str) -> Option<&ModelSummary> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn series(&self, group: &Group, metric: &str) -> Option<&AggSeries> {
        self.unlearn.iter().find(|s| &s.group == group && s.metric == metric)
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.workers = 0;
    c.out_dir = PathBuf::new();
    hash_json(&c)
}

struct Runner<'a> {
    out: &'a Path,
    force: bool,
    verbose: bool,
}

impl Runner<'_> {
    /// Runs `f` in `dir` unless a record with the same key already exists.
    fn stage(&self, name: &str, dir: &Path, key: &str, f: impl FnOnce(&Path) -> Result<Vec<PathBuf>>) -> Result<StageRecord> {
        let rec_path = dir.join("stage.json");
        if !self.force {
            if let Ok(text) = fs::read_to_string(&rec_path) {
                if let Ok(rec) = serde_json::from_str::<StageRecord>(&text) {
                    if rec.key == key {
                        return Ok(rec);
                    }
                }
            }
        }
        let _ = fs::remove_file(&rec_path);
        fs::create_dir_all(dir)?;
        let t = Instant::now();
        let files = f(dir).map_err(|e| Error::Stage { stage: name.to_string(), source: Box::new(e) })?;
        let rel = |p: PathBuf| p.strip_prefix(self.out).map(Path::to_path_buf).unwrap_or(p);
        let rec = StageRecord {
            stage: name.to_string(),
            key: key.to_string(),
            artifacts: files.into_iter().map(rel).collect(),
            seconds: t.elapsed().as_secs_f64(),
        };
        fs::write(&rec_path, serde_json::to_string_pretty(&rec)?)?;
        if self.verbose {
            eprintln!("[{:>8.1}s] {name}", rec.seconds);
        }
        Ok(rec)
    }
}

/// Runs (or resumes) an experiment. A completed run with the same config
/// hash is returned untouched unless `force` is set.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<(RunManifest, Summary)> {
    cfg.validate()?;
    let out = cfg.out_dir.as_path();
    let hash = config_hash(cfg);
    if !opts.force {
        if let Ok(m) = RunManifest::read(out) {
            if m.completed && m.config_hash == hash {
                return Ok((m, Summary::read(out)?));
            }
        }
    }
    let mut manifest = RunManifest {
        name: cfg.name.clone(),
        config_hash: hash.clone(),
        tool_version: TOOL_VERSION.to_string(),
        out_dir: out.to_path_buf(),
        stages: Vec::new(),
        completed: false,
    };
    match run_stages(cfg, opts, &mut manifest) {
        Ok(summary) => {
            manifest.completed = true;
            manifest.write()?;
            Ok((manifest, summary))
        }
        Err(e) => {
            manifest.write()?;
            Err(e)
        }
    }
}

fn run_stages(cfg: &ExperimentConfig, opts: &RunOptions, manifest: &mut RunManifest) -> Result<Summary> {
    let out = cfg.out_dir.clone();
    let runner = Runner { out: &out, force: opts.force, verbose: opts.verbose };
    let data_dir = out.join("data");
    let data_key = hash_json(&(&cfg.generation, cfg.data_seed, TOOL_VERSION));
    manifest.stages.push(runner.stage("generate", &data_dir, &data_key, |dir| {
        Data::generate(cfg)?.write(dir)?;
        Ok(["profiles.jsonl", "bios.jsonl", "qa.jsonl", "manifest.json", "vocab.json"].iter().map(|f| dir.join(f)).collect())
    })?);
    let data = Data::read(&data_dir)?;

    let mut models: BTreeMap<String, (Model<f32>, String)> = BTreeMap::new();
    let mut summaries = Vec::new();
    for spec in &cfg.models {
        let mcfg = spec.resolve(data.vocab.len(), cfg.pack_length)?;
        let train = spec.train_config(&cfg.train);
        let key = hash_json(&(&data_key, &mcfg, &train, cfg.pack_length, &cfg.eval));
        let dir = out.join("models").join(&spec.name);
        manifest.stages.push(runner.stage(&format!("pretrain:{}", spec.name), &dir, &key, |dir| {
            let (model, trace) = pretrain_model(&data, mcfg.clone(), &train, cfg.pack_length, &cfg.eval, cfg.data_seed)?;
            save_checkpoint(&dir.join("checkpoint"), &model)?;
            write_trace(&dir.join("trace.csv"), &trace)?;
            Ok(vec![dir.join("checkpoint"), dir.join("trace.csv")])
        })?);
        let model: Model<f32> = load_checkpoint(&dir.join("checkpoint"))?;
        let pretrain = read_trace(&dir.join("trace.csv"))?;
        let eval_dir = out.join("eval").join(&spec.name);
        manifest.stages.push(runner.stage(&format!("eval:{}", spec.name), &eval_dir, &key, |dir| {
            let rep = evaluate_model(&model, &data, &cfg.eval, cfg.data_seed)?;
            let p = dir.join("eval.json");
            fs::write(&p, serde_json::to_string_pretty(&rep)?)?;
            Ok(vec![p])
        })?);
        let eval: EvalReport = serde_json::from_str(&fs::read_to_string(eval_dir.join("eval.json"))?)?;
        summaries.push(ModelSummary { name: spec.name.clone(), params: mcfg.param_count(), config: mcfg, pretrain, eval });
        models.insert(spec.name.clone(), (model, key));
    }

    let cells = cfg.cells();
    let workers = opts.workers.unwrap_or(cfg.workers).max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let run_cell = |cell: &Cell| -> Result<(StageRecord, Vec<UnlearnEpoch>)> {
        let (model, model_key) = &models[&cell.model];
        let ucfg = cfg.unlearn[cell.block].hyper.to_config(cell.method, cell.delta, cell.seed)?;
        let key = hash_json(&(model_key, cell, &ucfg, &cfg.eval));
        let dir = out.join("cells").join(cell.label());
        let rec = runner.stage(&format!("unlearn:{}", cell.label()), &dir, &key, |dir| {
            let (_, trace) = unlearn_cell(model, &data, cell.split, cell.attribute, &ucfg, &cfg.eval)?;
            write_unlearn_trace(&dir.join("trace.csv"), &trace)?;
            let p = dir.join("trace.json");
            fs::write(&p, serde_json::to_string(&trace)?)?;
            Ok(vec![dir.join("trace.csv"), p])
        })?;
        let trace: Vec<UnlearnEpoch> = serde_json::from_str(&fs::read_to_string(dir.join("trace.json"))?)?;
        Ok((rec, trace))
    };
    let results: Vec<Result<(StageRecord, Vec<UnlearnEpoch>)>> = pool.install(|| cells.par_iter().map(run_cell).collect());
    let mut traces = Vec::with_capacity(cells.len());
    let mut first_err = None;
    for (cell, r) in cells.iter().zip(results) {
        match r {
            Ok((rec, t)) => {
                manifest.stages.push(rec);
                traces.push((cell.clone(), t));
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }

    let summary = Summary {
        name: cfg.name.clone(),
        config_hash: manifest.config_hash.clone(),
        unlearn: aggregate(&traces),
        gaps: gaps(&traces),
        models: summaries,
        cells: traces,
    };
    fs::write(out.join("summary.json"), serde_json::to_string(&summary)?)?;
    let fig_key = hash_json(&summary);
    manifest.stages.push(runner.stage("figures", &out.join("figures"), &fig_key, |dir| write_figures(&summary, dir))?);
    Ok(summary)
}

/// Per-figure CSV and SVG files.
pub fn write_figures(summary: &Summary, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();

    for m in &summary.models {
        let csv_path = dir.join(format!("pretrain_{}.csv", m.name));
        let rows: Vec<&TraceRow> = m.pretrain.iter().filter(|r| r.split != "train").collect();
        let mut w = csv::Writer::from_path(&csv_path)?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
        files.push(csv_path);
        let mut lines: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for r in rows {
            lines.entry(format!("{} {}", r.split, r.metric)).or_default().push((r.epoch as f64, r.value));
        }
        let lines: Vec<Line> = lines.into_iter().map(|(name, points)| Line { name, points }).collect();
        if !lines.is_empty() {
            let svg = dir.join(format!("pretrain_{}.svg", m.name));
            line_chart(&svg, &format!("Pre-training: {}", m.name), "epoch", "Rouge-L", &lines)?;
            files.push(svg);
        }
    }

    let csv_path = dir.join("unlearn.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["model", "method", "split", "delta", "metric", "epoch", "mean", "std", "n"])?;
    for s in &summary.unlearn {
        for (e, st) in &s.points {
            let g = &s.group;
            w.write_record([
                g.model.clone(),
                g.method.to_string(),
                g.split.to_string(),
                g.delta.to_string(),
                s.metric.clone(),
                e.to_string(),
                st.mean.to_string(),
                st.std.to_string(),
                st.n.to_string(),
            ])?;
        }
    }
    w.flush()?;
    files.push(csv_path);

    let mut panels: BTreeMap<(String, String, u64), Vec<&AggSeries>> = BTreeMap::new();
    for s in &summary.unlearn {
        panels.entry((s.group.model.clone(), s.group.method.to_string(), s.group.delta.to_bits())).or_default().push(s);
    }
    for ((model, method, delta), series) in panels {
        let delta = f64::from_bits(delta);
        let lines: Vec<Line> = series
            .iter()
            .map(|s| Line {
                name: format!("{} {}", s.group.split, s.metric),
                points: s.points.iter().map(|(e, st)| (*e as f64, st.mean)).collect(),
            })
            .collect();
        let svg = dir.join(format!("unlearn_{model}_{method}_d{delta}.svg"));
        line_chart(&svg, &format!("{method} on {model} (delta {delta})"), "unlearning epoch", "Rouge-L", &lines)?;
        files.push(svg);
    }

    let csv_path = dir.join("gaps.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["model", "params", "method", "split", "delta", "gap_mean", "gap_std", "n"])?;
    for g in &summary.gaps {
        let params = summary.model(&g.group.model).map_or(0, |m| m.params);
        w.write_record([
            g.group.model.clone(),
            params.to_string(),
            g.group.method.to_string(),
            g.group.split.to_string(),
            g.group.delta.to_string(),
            g.gap.mean.to_string(),
            g.gap.std.to_string(),
            g.gap.n.to_string(),
        ])?;
    }
    w.flush()?;
    files.push(csv_path);
    Ok(files)
}
