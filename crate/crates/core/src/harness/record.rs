use std::io::Write;

use serde::Serialize;

use crate::active::AxisReport;
use crate::error::Result;
use crate::model::WeightVector;

/// Measured outcome of one trial. Column order in CSV follows field order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub seed: u64,
    /// Dataset size for passive modes, oracle queries for active modes.
    pub n_or_queries: u64,
    pub e1_estimate: f64,
    pub e1_stderr: f64,
    pub e2: f64,
    pub seminorm_e2: f64,
    pub lambda_min: f64,
    pub wall_seconds: f64,
    pub success_flag: bool,
}

pub const RECORD_COLUMNS: [&str; 10] = [
    "trial_index",
    "seed",
    "n_or_queries",
    "e1_estimate",
    "e1_stderr",
    "e2",
    "seminorm_e2",
    "lambda_min",
    "wall_seconds",
    "success_flag",
];

/// Everything a trial produced, for the JSONL detail file.
#[derive(Debug, Clone, Serialize)]
pub struct TrialDetail {
    pub record: TrialRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_value: Option<f64>,
    pub w_star: WeightVector,
    pub w_hat: Option<WeightVector>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_axis: Vec<AxisReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl TrialDetail {
    pub fn aborted(&self) -> bool {
        self.diagnostic.is_some()
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

impl TrialRecord {
    pub fn csv_fields(&self, timing: bool) -> Vec<String> {
        vec![
            self.trial_index.to_string(),
            self.seed.to_string(),
            self.n_or_queries.to_string(),
            fmt_float(self.e1_estimate),
            fmt_float(self.e1_stderr),
            fmt_float(self.e2),
            fmt_float(self.seminorm_e2),
            fmt_float(self.lambda_min),
            fmt_float(if timing { self.wall_seconds } else { 0.0 }),
            self.success_flag.to_string(),
        ]
    }
}

/// Writes one row per record. With `timing` off, `wall_seconds` is written as
/// zero so that reruns are byte-identical.
pub fn write_records_csv<W: Write>(w: W, records: &[TrialRecord], timing: bool) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RECORD_COLUMNS)?;
    for r in records {
        out.write_record(r.csv_fields(timing))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_details_jsonl<W: Write>(
    mut w: W,
    details: &[TrialDetail],
    timing: bool,
) -> Result<()> {
    for d in details {
        let mut d = d.clone();
        if !timing {
            d.record.wall_seconds = 0.0;
        }
        serde_json::to_writer(&mut w, &d)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
