//! CSV files of evaluation results.

use std::path::Path;

use crate::harness::{DepthResult, L2Row, Method, ProjRow};
use crate::{EvalError, Result};

pub const METRICS_HEADER: [&str; 5] = ["depth", "method", "auc", "n_pos", "n_neg"];
pub const ROC_HEADER: [&str; 4] = ["depth", "method", "fpr", "tpr"];
pub const L2_HEADER: [&str; 4] = ["depth", "mean_onestep", "mean_multistep", "mean_random"];
pub const PROJECTION_HEADER: [&str; 4] = ["x", "y", "depth", "dist_to_true"];
pub const HIST_HEADER: [&str; 6] = ["depth", "method", "bin_lo", "bin_hi", "n_pos", "n_neg"];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub depth: usize,
    pub method: Method,
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocRow {
    pub depth: usize,
    pub method: Method,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistRow {
    pub depth: usize,
    pub method: Method,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Results ordered by depth, then by method.
pub fn sorted(results: &[DepthResult]) -> Vec<&DepthResult> {
    let mut v: Vec<&DepthResult> = results.iter().collect();
    v.sort_by_key(|r| (r.depth, r.method));
    v
}

fn write_rows<const N: usize>(path: &Path, header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics(path: &Path, results: &[DepthResult]) -> Result<()> {
    write_rows(
        path,
        METRICS_HEADER,
        sorted(results).into_iter().map(|r| {
            [
                r.depth.to_string(),
                r.method.to_string(),
                r.curve.auc.to_string(),
                r.n_pos.to_string(),
                r.n_neg.to_string(),
            ]
        }),
    )
}

pub fn write_roc(path: &Path, results: &[DepthResult]) -> Result<()> {
    write_rows(
        path,
        ROC_HEADER,
        sorted(results).into_iter().flat_map(|r| {
            r.curve
                .points
                .iter()
                .map(move |&(f, t)| [r.depth.to_string(), r.method.to_string(), f.to_string(), t.to_string()])
        }),
    )
}

pub fn write_histograms(path: &Path, results: &[DepthResult]) -> Result<()> {
    write_rows(
        path,
        HIST_HEADER,
        sorted(results).into_iter().flat_map(|r| {
            r.hist.iter().map(move |b| {
                [
                    r.depth.to_string(),
                    r.method.to_string(),
                    b.lo.to_string(),
                    b.hi.to_string(),
                    b.n_pos.to_string(),
                    b.n_neg.to_string(),
                ]
            })
        }),
    )
}

pub fn write_l2(path: &Path, rows: &[L2Row]) -> Result<()> {
    write_rows(
        path,
        L2_HEADER,
        rows.iter().map(|r| {
            [
                r.depth.to_string(),
                r.mean_onestep.to_string(),
                r.mean_multistep.to_string(),
                r.mean_random.to_string(),
            ]
        }),
    )
}

pub fn write_projection(path: &Path, rows: &[ProjRow]) -> Result<()> {
    write_rows(
        path,
        PROJECTION_HEADER,
        rows.iter()
            .map(|r| [r.x.to_string(), r.y.to_string(), r.depth.to_string(), r.dist_to_true.to_string()]),
    )
}

fn read_rows<const N: usize>(path: &Path, header: [&str; N]) -> Result<Vec<csv::StringRecord>> {
    let name = path.display().to_string();
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().collect::<Vec<_>>() != header {
        return Err(EvalError::Malformed {
            file: name,
            message: format!("expected header `{}`", header.join(",")),
        });
    }
    Ok(r.records().collect::<std::result::Result<Vec<_>, _>>()?)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| EvalError::Malformed {
        file: path.display().to_string(),
        message: format!("bad field {i} in record {:?}", rec.iter().collect::<Vec<_>>()),
    })
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRow>> {
    read_rows(path, METRICS_HEADER)?
        .iter()
        .map(|r| {
            Ok(MetricRow {
                depth: field(r, 0, path)?,
                method: field(r, 1, path)?,
                auc: field(r, 2, path)?,
                n_pos: field(r, 3, path)?,
                n_neg: field(r, 4, path)?,
            })
        })
        .collect()
}

pub fn read_roc(path: &Path) -> Result<Vec<RocRow>> {
    read_rows(path, ROC_HEADER)?
        .iter()
        .map(|r| {
            Ok(RocRow {
                depth: field(r, 0, path)?,
                method: field(r, 1, path)?,
                fpr: field(r, 2, path)?,
                tpr: field(r, 3, path)?,
            })
        })
        .collect()
}

pub fn read_histograms(path: &Path) -> Result<Vec<HistRow>> {
    read_rows(path, HIST_HEADER)?
        .iter()
        .map(|r| {
            Ok(HistRow {
                depth: field(r, 0, path)?,
                method: field(r, 1, path)?,
                bin_lo: field(r, 2, path)?,
                bin_hi: field(r, 3, path)?,
                n_pos: field(r, 4, path)?,
                n_neg: field(r, 5, path)?,
            })
        })
        .collect()
}

pub fn read_l2(path: &Path) -> Result<Vec<L2Row>> {
    read_rows(path, L2_HEADER)?
        .iter()
        .map(|r| {
            Ok(L2Row {
                depth: field(r, 0, path)?,
                mean_onestep: field(r, 1, path)?,
                mean_multistep: field(r, 2, path)?,
                mean_random: field(r, 3, path)?,
            })
        })
        .collect()
}

pub fn read_projection(path: &Path) -> Result<Vec<ProjRow>> {
    read_rows(path, PROJECTION_HEADER)?
        .iter()
        .map(|r| {
            Ok(ProjRow {
                x: field(r, 0, path)?,
                y: field(r, 1, path)?,
                depth: field(r, 2, path)?,
                dist_to_true: field(r, 3, path)?,
            })
        })
        .collect()
}
