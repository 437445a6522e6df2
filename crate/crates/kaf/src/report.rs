//! Skill reports as CSV and JSON.

use std::io::Write;

use anyhow::Result;
use kaf_core::SkillReport;
use serde::Serialize;

pub const CSV_HEADER: [&str; 5] = [
    "lead_time",
    "rmse",
    "normalized_rmse",
    "estimated_error_rms",
    "excess_gen_error",
];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per lead; absent quantities are empty cells.
pub fn write_csv(out: impl Write, report: &SkillReport) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for k in 0..report.len() {
        writer.write_record([
            report.lead_times[k].to_string(),
            report.rmse[k].to_string(),
            report.normalized_rmse[k].to_string(),
            cell(report.estimated_error_rms[k]),
            cell(report.excess_gen_error[k]),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonReport<'a> {
    params: serde_json::Map<String, serde_json::Value>,
    lead_steps: &'a [usize],
    lead_times: &'a [f64],
    rmse: &'a [f64],
    normalized_rmse: &'a [f64],
    estimated_error_rms: &'a [Option<f64>],
    excess_gen_error: &'a [Option<f64>],
}

pub fn write_json(out: impl Write, report: &SkillReport) -> Result<()> {
    let params = report
        .params
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
        .collect();
    let json = JsonReport {
        params,
        lead_steps: &report.lead_steps,
        lead_times: &report.lead_times,
        rmse: &report.rmse,
        normalized_rmse: &report.normalized_rmse,
        estimated_error_rms: &report.estimated_error_rms,
        excess_gen_error: &report.excess_gen_error,
    };
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &json)?;
    writeln!(out)?;
    Ok(())
}
