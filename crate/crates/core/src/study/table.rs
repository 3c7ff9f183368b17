use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::study::combos::CombinationId;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub combination: CombinationId,
    /// `None` when training or evaluation failed.
    pub metrics: Option<MetricReport>,
    pub rank_ssim: usize,
    pub rank_psnr: usize,
    pub rank_rmse: usize,
    pub status: RowStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyMeta {
    pub backend: String,
    pub k: Option<usize>,
    pub seed: u64,
    pub blur_sigma: f64,
}

/// Rows sorted best first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    pub meta: StudyMeta,
}

/// Competition ranks (1, 2, 2, 4): equal scores share the lower rank.
/// Missing scores rank after every present one.
pub fn competition_ranks(scores: &[Option<f64>], higher_is_better: bool) -> Vec<usize> {
    let better = |a: f64, b: f64| if higher_is_better { a > b } else { a < b };
    scores
        .iter()
        .map(|s| match s {
            Some(v) => 1 + scores.iter().filter(|o| matches!(o, Some(w) if better(*w, *v))).count(),
            None => 1 + scores.iter().filter(|o| o.is_some()).count(),
        })
        .collect()
}

impl StudyTable {
    /// Rank per metric and sort: SSIM rank, then PSNR rank, then fewer
    /// channels, then canonical order of the input.
    pub fn from_results(results: Vec<(CombinationId, Result<MetricReport>)>, meta: StudyMeta) -> Self {
        let metrics: Vec<Option<MetricReport>> = results.iter().map(|(_, r)| r.as_ref().ok().copied()).collect();
        let pick = |f: fn(&MetricReport) -> f64| -> Vec<Option<f64>> {
            metrics.iter().map(|m| m.as_ref().map(f).filter(|v| !v.is_nan())).collect()
        };
        let rs = competition_ranks(&pick(|m| m.ssim), true);
        let rp = competition_ranks(&pick(|m| m.psnr), true);
        let rr = competition_ranks(&pick(|m| m.rmse), false);
        let mut rows: Vec<(usize, StudyRow)> = results
            .into_iter()
            .enumerate()
            .map(|(i, (combination, r))| {
                let status = match &r {
                    Ok(_) => RowStatus::Ok,
                    Err(e) => RowStatus::Failed(e.to_string()),
                };
                (
                    i,
                    StudyRow {
                        combination,
                        metrics: r.ok(),
                        rank_ssim: rs[i],
                        rank_psnr: rp[i],
                        rank_rmse: rr[i],
                        status,
                    },
                )
            })
            .collect();
        rows.sort_by_key(|(i, r)| (r.rank_ssim, r.rank_psnr, r.combination.len(), *i));
        Self { rows: rows.into_iter().map(|(_, r)| r).collect(), meta }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Format(format!("study table: {e}"));
        w.write_record(["combination", "ssim", "rank_ssim", "psnr_db", "rank_psnr", "rmse", "rank_rmse", "status"])
            .map_err(err)?;
        for r in &self.rows {
            let (ssim, psnr, rmse) = match &r.metrics {
                Some(m) => (m.ssim.to_string(), m.psnr.to_string(), m.rmse.to_string()),
                None => (String::new(), String::new(), String::new()),
            };
            let status = match &r.status {
                RowStatus::Ok => "ok".to_string(),
                RowStatus::Failed(msg) => format!("failed: {msg}"),
            };
            w.write_record([
                r.combination.to_string(),
                ssim,
                r.rank_ssim.to_string(),
                psnr,
                r.rank_psnr.to_string(),
                rmse,
                r.rank_rmse.to_string(),
                status,
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("study table", e))
    }

    /// Read a table written by [`StudyTable::write_csv`]. Row order and ranks
    /// are kept as stored.
    pub fn read_csv<R: std::io::Read>(input: R, meta: StudyMeta) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let err = |e: csv::Error| Error::Format(format!("study table: {e}"));
        let headers = r.headers().map_err(err)?.clone();
        let expected = ["combination", "ssim", "rank_ssim", "psnr_db", "rank_psnr", "rmse", "rank_rmse", "status"];
        if headers.iter().ne(expected) {
            return Err(Error::Format(format!("study table header is {:?}, expected {expected:?}", headers.iter().collect::<Vec<_>>())));
        }
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(err)?;
            let bad = |what: &str| Error::Format(format!("study table row {}: bad {what}", line + 1));
            let num = |i: usize, what: &str| rec[i].parse::<f64>().map_err(|_| bad(what));
            let rank = |i: usize, what: &str| rec[i].parse::<usize>().map_err(|_| bad(what));
            let combination: CombinationId = rec[0].parse().map_err(|_| bad("combination"))?;
            let status = match &rec[7] {
                "ok" => RowStatus::Ok,
                s => RowStatus::Failed(s.strip_prefix("failed: ").ok_or_else(|| bad("status"))?.to_string()),
            };
            let metrics = match status {
                RowStatus::Ok => Some(MetricReport {
                    ssim: num(1, "ssim")?,
                    psnr: num(3, "psnr_db")?,
                    rmse: num(5, "rmse")?,
                    blur_sigma: meta.blur_sigma,
                }),
                RowStatus::Failed(_) => None,
            };
            rows.push(StudyRow {
                combination,
                metrics,
                rank_ssim: rank(2, "rank_ssim")?,
                rank_psnr: rank(4, "rank_psnr")?,
                rank_rmse: rank(6, "rank_rmse")?,
                status,
            });
        }
        Ok(Self { rows, meta })
    }

    pub fn row(&self, combination: &CombinationId) -> Option<&StudyRow> {
        self.rows.iter().find(|r| &r.combination == combination)
    }

    /// Best, middle and worst rows as a fixed-width text table.
    pub fn summary(&self) -> String {
        let mut out = String::from("combination                      SSIM (rank)   PSNR dB (rank)   RMSE (rank)\n");
        let picks = [("best", 0), ("moderate", self.rows.len() / 2), ("worst", self.rows.len().saturating_sub(1))];
        for (name, i) in picks {
            let Some(r) = self.rows.get(i) else { continue };
            let line = match &r.metrics {
                Some(m) => format!(
                    "{:<32} {:.2} ({})      {:.2} ({})       {:.2} ({})",
                    r.combination.to_string(),
                    m.ssim,
                    r.rank_ssim,
                    m.psnr,
                    r.rank_psnr,
                    m.rmse,
                    r.rank_rmse
                ),
                None => format!("{:<32} failed", r.combination.to_string()),
            };
            out.push_str(&format!("{line}   [{name}]\n"));
        }
        out
    }
}

/// Top row of a sorted table.
pub fn select_best(table: &StudyTable) -> Result<&CombinationId> {
    table
        .rows
        .first()
        .filter(|r| r.status == RowStatus::Ok)
        .map(|r| &r.combination)
        .ok_or_else(|| Error::Data("study table has no successful rows".into()))
}
