//! CSV tables: control points, metric reports and loss curves.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::colorize::EpochRecord;
use crate::error::{Error, Result};
use crate::imaging::{ControlPoint, ControlPointSet};
use crate::metrics::MetricReport;

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path.display().to_string(), io),
            _ => unreachable!(),
        }
    } else {
        Error::Format(format!("{}: {e}", path.display()))
    }
}

#[derive(Serialize, Deserialize)]
struct PointRow {
    src_x: f64,
    src_y: f64,
    dst_x: f64,
    dst_y: f64,
}

pub fn read_control_points(path: &Path) -> Result<ControlPointSet> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["src_x", "src_y", "dst_x", "dst_y"] {
        return Err(Error::Format(format!(
            "{}: control point header must be src_x,src_y,dst_x,dst_y",
            path.display()
        )));
    }
    let mut points = Vec::new();
    for row in rdr.deserialize::<PointRow>() {
        let r = row.map_err(|e| csv_err(path, e))?;
        points.push(ControlPoint { src_x: r.src_x, src_y: r.src_y, dst_x: r.dst_x, dst_y: r.dst_y });
    }
    Ok(ControlPointSet { points })
}

pub fn write_control_points(path: &Path, set: &ControlPointSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for p in &set.points {
        w.serialize(PointRow { src_x: p.src_x, src_y: p.src_y, dst_x: p.dst_x, dst_y: p.dst_y })
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

#[derive(Serialize)]
struct MetricRow<'a> {
    combination: &'a str,
    ssim: f64,
    psnr_db: f64,
    rmse: f64,
    blur_sigma: f64,
}

/// Append one report, writing the header if the file is new or empty.
pub fn append_metric_row(path: &Path, combination: &str, report: &MetricReport) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    w.serialize(MetricRow {
        combination,
        ssim: report.ssim,
        psnr_db: report.psnr,
        rmse: report.rmse,
        blur_sigma: report.blur_sigma,
    })
    .map_err(|e| csv_err(path, e))?;
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_loss_curves<W: Write>(out: W, records: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io("loss curves", e))
}
