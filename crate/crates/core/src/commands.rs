//! Pipeline stages behind the command-line subcommands. Each stage reads
//! and writes fixed file names inside the output directory.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;

use crate::augment::KeyAnnotation;
use crate::config::{ExperimentConfig, SyntheticSource};
use crate::data::synth::{desk_dataset, key_signal_dataset};
use crate::data::{expand_training_set, load_interactions, DatasetFile, InputFormat};
use crate::error::{Error, Result};
use crate::eval::report::{
    sweep_plot_data, write_json, write_metrics_csv, write_similarity_csv, write_sweep_csv,
    write_timing_csv,
};
use crate::eval::{
    evaluate_users, similarity_report, sweep, timing_report, EvalOptions, MetricReport,
    SimilarityReport, SweepRow, TimingReport, CUTOFFS,
};
use crate::model::{train, Checkpoint, SequenceModel, TrainReport};
use crate::tta::TtaConfig;

pub const DATASET_FILE: &str = "dataset.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Base,
    Tta,
}

impl EvalMode {
    fn label(self) -> &'static str {
        match self {
            EvalMode::Base => "base",
            EvalMode::Tta => "tta",
        }
    }
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn ensure_out_dir(cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct Echoed<'a, T: Serialize> {
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    body: T,
}

fn write_echoed<T: Serialize>(cfg: &ExperimentConfig, name: &str, body: T) -> Result<()> {
    write_json(&out_path(cfg, name), &Echoed { config: cfg, body })
}

/// Builds the canonical dataset file (and key annotations for the
/// key-signal generator).
pub fn prepare(cfg: &ExperimentConfig) -> Result<DatasetFile> {
    cfg.validate()?;
    ensure_out_dir(cfg)?;
    let d = &cfg.dataset;
    let raw = match (&d.input, &d.synthetic) {
        (Some(path), _) => {
            let format = match d.format {
                Some(f) => f,
                None => InputFormat::from_path(path).ok_or_else(|| {
                    Error::config(format!(
                        "cannot infer the format of {}; set dataset.format",
                        path.display()
                    ))
                })?,
            };
            load_interactions(path, format)?.interactions
        }
        (None, Some(SyntheticSource::Desk(s))) => desk_dataset(s),
        (None, Some(SyntheticSource::KeySignal(s))) => key_signal_dataset(s),
        (None, None) => unreachable!("validated"),
    };
    let ds = DatasetFile::prepare(&raw, &d.prepare_config())?;
    ds.write(&out_path(cfg, DATASET_FILE))?;
    write_echoed(cfg, "stats.json", BTreeMap::from([("stats", &ds.stats)]))?;
    if let Some(SyntheticSource::KeySignal(_)) = &d.synthetic {
        let positions = ds
            .split
            .users
            .iter()
            .map(|u| (ds.catalog.users[u.user].clone(), vec![u.train.len()]))
            .collect();
        KeyAnnotation { positions }.write(&out_path(cfg, "keys.json"))?;
    }
    info!(
        "prepared {} users, {} items, {} interactions",
        ds.stats.users, ds.stats.items, ds.stats.interactions
    );
    Ok(ds)
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<DatasetFile> {
    DatasetFile::read(&out_path(cfg, DATASET_FILE))
}

fn load_model(cfg: &ExperimentConfig, ds: &DatasetFile) -> Result<SequenceModel> {
    let path = out_path(cfg, CHECKPOINT_FILE);
    let model = Checkpoint::load(&path)?.model;
    if model.num_items != ds.split.num_items {
        return Err(Error::Format {
            path,
            message: format!(
                "checkpoint has {} items but the dataset has {}",
                model.num_items, ds.split.num_items
            ),
        });
    }
    Ok(model)
}

/// Trains from scratch on the prepared dataset and writes the checkpoint
/// and loss curve.
pub fn train_model(cfg: &ExperimentConfig) -> Result<TrainReport> {
    cfg.validate()?;
    ensure_out_dir(cfg)?;
    let ds = load_dataset(cfg)?;
    let mut split = ds.split.clone();
    if let Some(spec) = &cfg.train.expand {
        let before = split.train.len();
        split = expand_training_set(&split, spec, cfg.global_seed, cfg.model.max_len, None)?;
        info!("training set expanded from {before} to {} sequences", split.train.len());
    }
    let init = SequenceModel::new(cfg.model.clone(), split.num_items)?;
    let (model, report) = train(&init, &split)?;
    Checkpoint::new(model).save(&out_path(cfg, CHECKPOINT_FILE))?;
    let curve_path = out_path(cfg, "loss_curve.csv");
    let mut w = csv::Writer::from_path(&curve_path).map_err(|e| Error::Format {
        path: curve_path.clone(),
        message: e.to_string(),
    })?;
    for r in &report.curve {
        w.serialize(r).map_err(|e| Error::Format {
            path: curve_path.clone(),
            message: e.to_string(),
        })?;
    }
    w.flush().map_err(|e| Error::io(&curve_path, e))?;
    write_echoed(
        cfg,
        "train_report.json",
        BTreeMap::from([("train", &report)]),
    )?;
    info!(
        "best epoch {} with validation NDCG@10 {:.4}",
        report.best_epoch, report.best_valid_ndcg10
    );
    Ok(report)
}

fn eval_options(cfg: &ExperimentConfig, ds: &DatasetFile) -> Result<EvalOptions> {
    let keys = match &cfg.eval.keys {
        Some(path) => {
            let path = cfg.output_dir.join(path);
            Some(KeyAnnotation::read(&path)?.resolve(&ds.split, &ds.catalog)?)
        }
        None => None,
    };
    Ok(EvalOptions {
        exclude_seen: cfg.eval.exclude_seen,
        keys,
    })
}

fn tta_config(cfg: &ExperimentConfig) -> Result<&TtaConfig> {
    cfg.tta
        .as_ref()
        .ok_or_else(|| Error::config("this command needs a [tta] block"))
}

/// Metric values keyed by cutoff, without wall times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub mode: String,
    pub operator: Option<String>,
    pub m: Option<usize>,
    pub num_users: usize,
    pub hr: BTreeMap<String, f64>,
    pub ndcg: BTreeMap<String, f64>,
}

impl MetricsSummary {
    fn new(mode: EvalMode, tta: Option<&TtaConfig>, r: &MetricReport) -> Self {
        let keyed = |v: &[f64; 3]| {
            CUTOFFS
                .iter()
                .zip(v)
                .map(|(k, x)| (format!("@{k}"), *x))
                .collect()
        };
        Self {
            mode: mode.label().into(),
            operator: tta.map(|t| t.spec.label()),
            m: tta.map(|t| t.m),
            num_users: r.num_users,
            hr: keyed(&r.hr),
            ndcg: keyed(&r.ndcg),
        }
    }
}

#[derive(Serialize)]
struct PredictionRow<'a> {
    user: &'a str,
    top_k: Vec<&'a str>,
    rank: usize,
    wall_time: f64,
}

/// Base or TTA evaluation. Metric files hold no timings, so reruns with
/// the same config produce identical files; wall times go to
/// `<mode>_timing.json` and the per-user predictions file.
pub fn evaluate_model(cfg: &ExperimentConfig, mode: EvalMode) -> Result<MetricReport> {
    cfg.validate()?;
    ensure_out_dir(cfg)?;
    let ds = load_dataset(cfg)?;
    let model = load_model(cfg, &ds)?;
    let opts = eval_options(cfg, &ds)?;
    let tta = match mode {
        EvalMode::Base => None,
        EvalMode::Tta => Some(tta_config(cfg)?),
    };
    let start = std::time::Instant::now();
    let outcomes = evaluate_users(&model, &ds.split, tta, &opts)?;
    let elapsed = start.elapsed().as_secs_f64();
    let ranks: Vec<usize> = outcomes.iter().map(|o| o.rank).collect();
    let report = MetricReport::from_ranks(&ranks, elapsed);
    let label = mode.label();

    let summary = MetricsSummary::new(mode, tta, &report);
    write_echoed(cfg, &format!("{label}_metrics.json"), &summary)?;
    let run = tta.map_or_else(|| "base".to_string(), |t| t.spec.label());
    write_metrics_csv(&out_path(cfg, &format!("{label}_metrics.csv")), &[(run, &report)])?;

    let pred_path = out_path(cfg, &format!("{label}_predictions.jsonl"));
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(&pred_path).map_err(|e| Error::io(&pred_path, e))?,
    );
    let mut total_wall = 0.0;
    for o in &outcomes {
        total_wall += o.wall_time;
        let row = PredictionRow {
            user: &ds.catalog.users[o.user],
            top_k: o.top_k.iter().map(|&i| ds.catalog.items[i - 1].as_str()).collect(),
            rank: o.rank,
            wall_time: o.wall_time,
        };
        serde_json::to_writer(&mut out, &row).expect("row serialises");
        out.write_all(b"\n").map_err(|e| Error::io(&pred_path, e))?;
    }
    out.flush().map_err(|e| Error::io(&pred_path, e))?;
    write_echoed(
        cfg,
        &format!("{label}_timing.json"),
        BTreeMap::from([
            ("inference_seconds", elapsed),
            ("inference_minutes", elapsed / 60.0),
            ("summed_user_wall_time", total_wall),
        ]),
    )?;
    info!(
        "{label}: HR@10 {:.4} NDCG@10 {:.4} over {} users in {:.2}s",
        report.hr_at(10),
        report.ndcg_at(10),
        report.num_users,
        elapsed
    );
    Ok(report)
}

/// Grid sweep over the configured axis.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    ensure_out_dir(cfg)?;
    let grid = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep needs a [sweep] block"))?;
    let tta = tta_config(cfg)?;
    let ds = load_dataset(cfg)?;
    let model = load_model(cfg, &ds)?;
    let opts = eval_options(cfg, &ds)?;
    let rows = sweep(&model, &ds.split, tta, grid, &opts)?;
    let stem = format!("sweep_{}", grid.axis.label());
    write_sweep_csv(&out_path(cfg, &format!("{stem}.csv")), &rows)?;
    let summaries: Vec<(String, MetricsSummary)> = rows
        .iter()
        .map(|r| {
            let point_cfg = TtaConfig { m: r.m, ..tta.clone() };
            let mut s = MetricsSummary::new(EvalMode::Tta, Some(&point_cfg), &r.report);
            s.operator = Some(r.operator.clone());
            (r.point.clone(), s)
        })
        .collect();
    write_echoed(cfg, &format!("{stem}.json"), BTreeMap::from([("rows", summaries)]))?;
    write_text(&out_path(cfg, &format!("{stem}.dat")), &sweep_plot_data(&rows))?;
    Ok(rows)
}

/// Mean cosine similarity between augmented and original representations
/// for each configured operator.
pub fn analyze_similarity(cfg: &ExperimentConfig) -> Result<Vec<SimilarityReport>> {
    cfg.validate()?;
    ensure_out_dir(cfg)?;
    let ds = load_dataset(cfg)?;
    let model = load_model(cfg, &ds)?;
    let opts = eval_options(cfg, &ds)?;
    let m = cfg.tta.as_ref().map_or(10, |t| t.m);
    let rows = cfg
        .analysis
        .similarity_operators
        .iter()
        .map(|spec| {
            let mut t = TtaConfig::new(spec.clone(), m);
            t.global_seed = cfg.global_seed;
            let r = similarity_report(&model, &ds.split, &t, &opts)?;
            info!("{}: mean cosine {:.4}", r.operator, r.mean);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    write_similarity_csv(&out_path(cfg, "similarity.csv"), &rows)?;
    write_echoed(cfg, "similarity.json", BTreeMap::from([("rows", &rows)]))?;
    Ok(rows)
}

/// TTA inference time per operator across catalog sizes.
pub fn analyze_timing(cfg: &ExperimentConfig) -> Result<TimingReport> {
    cfg.validate()?;
    ensure_out_dir(cfg)?;
    let ds = load_dataset(cfg)?;
    let model = load_model(cfg, &ds)?;
    let opts = eval_options(cfg, &ds)?;
    let m = cfg.tta.as_ref().map_or(10, |t| t.m);
    let ops: Vec<TtaConfig> = cfg
        .analysis
        .timing_operators
        .iter()
        .map(|spec| {
            let mut t = TtaConfig::new(spec.clone(), m);
            t.global_seed = cfg.global_seed;
            t
        })
        .collect();
    let sizes = if cfg.analysis.catalog_sizes.is_empty() {
        vec![model.num_items, 4 * model.num_items]
    } else {
        cfg.analysis.catalog_sizes.clone()
    };
    let report = timing_report(
        &model,
        &ds.split,
        &ops,
        &sizes,
        cfg.analysis.timing_users,
        cfg.analysis.timing_runs,
        &opts,
    )?;
    write_timing_csv(&out_path(cfg, "timing.csv"), &report)?;
    write_echoed(cfg, "timing.json", BTreeMap::from([("timing", &report)]))?;
    Ok(report)
}
