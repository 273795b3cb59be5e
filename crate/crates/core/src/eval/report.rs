//! Report files: csv tables, pretty json and gnuplot-style plot data.

use std::path::Path;

use serde::Serialize;

use super::{MetricReport, SimilarityReport, SweepRow, TimingReport, CUTOFFS};
use crate::error::{Error, Result};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serialises");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn metric_header() -> Vec<String> {
    let mut h = Vec::new();
    for k in CUTOFFS {
        h.push(format!("hr@{k}"));
    }
    for k in CUTOFFS {
        h.push(format!("ndcg@{k}"));
    }
    h.push("users".into());
    h
}

fn metric_fields(r: &MetricReport) -> Vec<String> {
    r.hr.iter()
        .chain(&r.ndcg)
        .map(|v| format!("{v:.6}"))
        .chain(std::iter::once(r.num_users.to_string()))
        .collect()
}

/// One row per labelled report. Wall times are left out so the file only
/// changes when the metrics do.
pub fn write_metrics_csv(path: &Path, rows: &[(String, &MetricReport)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    let mut header = vec!["run".to_string()];
    header.extend(metric_header());
    w.write_record(&header).map_err(&err)?;
    for (label, r) in rows {
        let mut rec = vec![label.clone()];
        rec.extend(metric_fields(r));
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    let mut header = vec!["axis".to_string(), "point".into(), "operator".into(), "m".into()];
    header.extend(metric_header());
    w.write_record(&header).map_err(&err)?;
    for r in rows {
        let mut rec = vec![r.axis.label().to_string(), r.point.clone(), r.operator.clone(), r.m.to_string()];
        rec.extend(metric_fields(&r.report));
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Whitespace-separated columns: grid index, point, HR@10, NDCG@10, HR@20, NDCG@20.
pub fn sweep_plot_data(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    if let Some(first) = rows.first() {
        out.push_str(&format!("# {} sweep, {}\n", first.axis.label(), first.operator));
    }
    out.push_str("# idx point hr@10 ndcg@10 hr@20 ndcg@20\n");
    for (i, r) in rows.iter().enumerate() {
        out.push_str(&format!(
            "{i} {} {:.6} {:.6} {:.6} {:.6}\n",
            r.point.replace(' ', ""),
            r.report.hr_at(10),
            r.report.ndcg_at(10),
            r.report.hr_at(20),
            r.report.ndcg_at(20)
        ));
    }
    out
}

pub fn write_similarity_csv(path: &Path, rows: &[SimilarityReport]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(["operator", "mean_cosine", "pairs", "skipped_zero", "user_min", "user_median", "user_max"])
        .map_err(&err)?;
    for r in rows {
        let q = r.per_user_quartiles;
        w.write_record([
            r.operator.clone(),
            format!("{:.6}", r.mean),
            r.pairs.to_string(),
            r.skipped_zero.to_string(),
            format!("{:.6}", q[0]),
            format!("{:.6}", q[2]),
            format!("{:.6}", q[4]),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per operator, one seconds column per catalog size, then the
/// growth ratio.
pub fn write_timing_csv(path: &Path, report: &TimingReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    let mut header = vec!["operator".to_string()];
    for s in &report.catalog_sizes {
        header.push(format!("seconds@{s}"));
    }
    for s in &report.catalog_sizes {
        header.push(format!("queries@{s}"));
    }
    header.push("growth_ratio".into());
    w.write_record(&header).map_err(&err)?;
    for e in std::iter::once(&report.base).chain(&report.operators) {
        let mut rec = vec![e.operator.clone()];
        rec.extend(e.seconds.iter().map(|s| format!("{s:.6}")));
        rec.extend(e.similarity_queries.iter().map(|q| q.to_string()));
        rec.push(format!("{:.4}", e.growth_ratio));
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
