//! CSV output.
//!
//! Columns: `optimizer, samples_seen, steps`, then `<metric>_mean` and
//! `<metric>_median` for `mse_theta`, `mse_theta_avg`, `precond_err`,
//! `precond_err_current`, `train_acc`, `test_acc` and `skipped`, plus
//! `wall_time_ns_*` when timing is recorded. Missing metrics are empty
//! fields. Floats carry 17 significant digits, so values round-trip exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::metrics::{Aggregate, Metric};

fn columns(include_time: bool) -> Vec<Metric> {
    Metric::ALL
        .into_iter()
        .filter(|&m| include_time || m != Metric::WallTimeNs)
        .collect()
}

pub fn header(include_time: bool) -> Vec<String> {
    let mut h = vec![
        "optimizer".to_owned(),
        "samples_seen".to_owned(),
        "steps".to_owned(),
    ];
    for m in columns(include_time) {
        h.push(format!("{}_mean", m.name()));
        h.push(format!("{}_median", m.name()));
    }
    h
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn cell(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub fn write_csv<W: Write>(out: W, aggregates: &[Aggregate], include_time: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(include_time))?;
    let cols = columns(include_time);
    for agg in aggregates {
        for row in &agg.rows {
            let mut rec = vec![
                agg.label.clone(),
                row.samples_seen.to_string(),
                row.steps.to_string(),
            ];
            for &m in &cols {
                rec.push(cell(row.mean(m)));
                rec.push(cell(row.median(m)));
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `aggregates` to `path`, creating parent directories.
pub fn emit_csv(aggregates: &[Aggregate], path: &Path, include_time: bool) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_csv(fs::File::create(path)?, aggregates, include_time)
}
