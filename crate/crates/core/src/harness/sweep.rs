//! Sample-complexity sweeps over the dataset size or the accuracy target.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::{Experiment, SweepGrid};
use crate::harness::record::{fmt_float, TrialDetail, RECORD_COLUMNS};
use crate::harness::trial::{run_trial, GridPoint};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub grid_value: f64,
    pub trials: usize,
    pub successes: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub median_e2: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub details: Vec<TrialDetail>,
    pub summary: Vec<SummaryRow>,
    /// Name of the summarized column.
    pub metric: &'static str,
    /// Log-log slope of the median seminorm error against `n`, or the slope of
    /// median queries against `log2(1/eps)`.
    pub slope: f64,
}

/// Linear-interpolation quantile of unsorted data, NaNs ignored.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return f64::NAN;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn run_sweep(exp: &Experiment) -> Result<SweepResult> {
    let grid: Vec<GridPoint> = match &exp.config.sweep {
        None => {
            return Err(Error::Usage(
                "sweep needs a `sweep` grid in the config".into(),
            ))
        }
        Some(SweepGrid::N(ns)) => ns.iter().map(|&n| GridPoint::N(n)).collect(),
        Some(SweepGrid::Eps(es)) => es.iter().map(|&e| GridPoint::Eps(e)).collect(),
    };
    if grid.is_empty() {
        return Err(Error::Usage("sweep grid is empty".into()));
    }
    let trials = exp.config.trials as u64;
    let jobs: Vec<(GridPoint, u64)> = grid
        .iter()
        .flat_map(|&g| (0..trials).map(move |t| (g, t)))
        .collect();
    let details: Vec<TrialDetail> = jobs
        .par_iter()
        .map(|&(g, t)| run_trial(exp, t, Some(g)))
        .collect::<Result<_>>()?;

    let by_n = matches!(grid[0], GridPoint::N(_));
    let metric = if by_n { "seminorm_e2" } else { "n_or_queries" };
    let summary: Vec<SummaryRow> = grid
        .iter()
        .zip(details.chunks(trials as usize))
        .map(|(g, chunk)| {
            let values: Vec<f64> = chunk
                .iter()
                .map(|d| {
                    if by_n {
                        d.record.seminorm_e2
                    } else {
                        d.record.n_or_queries as f64
                    }
                })
                .collect();
            let e2: Vec<f64> = chunk.iter().map(|d| d.record.e2).collect();
            SummaryRow {
                grid_value: g.value(),
                trials: chunk.len(),
                successes: chunk.iter().filter(|d| d.record.success_flag).count(),
                median: quantile(&values, 0.5),
                q1: quantile(&values, 0.25),
                q3: quantile(&values, 0.75),
                median_e2: quantile(&e2, 0.5),
            }
        })
        .collect();

    let slope = if by_n {
        let x: Vec<f64> = summary.iter().map(|s| s.grid_value.ln()).collect();
        let y: Vec<f64> = summary.iter().map(|s| s.median.ln()).collect();
        ols_slope(&x, &y)
    } else {
        let x: Vec<f64> = summary
            .iter()
            .map(|s| (1.0 / s.grid_value).log2())
            .collect();
        let y: Vec<f64> = summary.iter().map(|s| s.median).collect();
        ols_slope(&x, &y)
    };
    Ok(SweepResult {
        details,
        summary,
        metric,
        slope,
    })
}

/// Trial rows prefixed with the grid value.
pub fn write_sweep_csv<W: Write>(w: W, result: &SweepResult, timing: bool) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["grid_value"];
    header.extend(RECORD_COLUMNS);
    out.write_record(&header)?;
    for d in &result.details {
        let mut row = vec![fmt_float(d.grid_value.unwrap_or(f64::NAN))];
        row.extend(d.record.csv_fields(timing));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// One row per grid point with the median and quartiles of the summarized
/// metric; the fitted slope is repeated on every row.
pub fn write_summary_csv<W: Write>(w: W, result: &SweepResult) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "grid_value",
        "metric",
        "trials",
        "successes",
        "median",
        "q1",
        "q3",
        "median_e2",
        "fitted_slope",
    ])?;
    for s in &result.summary {
        out.write_record([
            fmt_float(s.grid_value),
            result.metric.to_string(),
            s.trials.to_string(),
            s.successes.to_string(),
            fmt_float(s.median),
            fmt_float(s.q1),
            fmt_float(s.q3),
            fmt_float(s.median_e2),
            fmt_float(result.slope),
        ])?;
    }
    out.flush()?;
    Ok(())
}
