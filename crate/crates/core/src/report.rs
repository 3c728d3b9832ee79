//! CSV and plain-text summaries of runs and comparisons.
//!
//! CSV is UTF-8, comma-delimited, `\n`-terminated, with numbers printed in
//! their shortest exact form so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::engine::{ComparisonTable, MetricsSeries};
use crate::error::Result;

pub const SERIES_HEADER: &str =
    "time,protocol,throughput_bps,throughput_interval_bps,pdr,mean_residual_energy_j,ch_failures";

pub const TABLE_HEADER: &str = "time,protocol,throughput_bps,throughput_interval_bps,pdr,mean_residual_energy_j,ch_failures,\
throughput_bps_std,throughput_interval_bps_std,pdr_std,mean_residual_energy_j_std,ch_failures_std,seeds";

pub fn series_csv(series: &MetricsSeries) -> String {
    let mut out = String::with_capacity(64 * (series.records.len() + 1));
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for c in &series.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.time,
            series.label,
            c.throughput_bps,
            c.throughput_interval_bps,
            c.pdr,
            c.mean_residual_energy,
            c.ch_failures
        );
    }
    out
}

pub fn table_csv(table: &ComparisonTable) -> String {
    let mut out = String::new();
    out.push_str(TABLE_HEADER);
    out.push('\n');
    for s in &table.series {
        for r in &s.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.time,
                s.label,
                r.throughput_bps.mean,
                r.throughput_interval_bps.mean,
                r.pdr.mean,
                r.mean_residual_energy.mean,
                r.ch_failures.mean,
                r.throughput_bps.std,
                r.throughput_interval_bps.std,
                r.pdr.std,
                r.mean_residual_energy.std,
                r.ch_failures.std,
                s.seeds
            );
        }
    }
    out
}

/// Writes rendered CSV to `path`, creating parent directories.
pub fn emit_csv(csv: &str, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, csv)?;
    Ok(())
}

pub fn series_summary(series: &MetricsSeries) -> String {
    let mut out = format!("{} (seed {})\n", series.label, series.seed);
    match series.records.last() {
        None => out.push_str("  no checkpoints\n"),
        Some(c) => {
            let decrease = if series.initial_mean_energy > 0.0 {
                100.0 * (1.0 - c.mean_residual_energy / series.initial_mean_energy)
            } else {
                0.0
            };
            let _ = writeln!(out, "  rounds            {}", c.time);
            let _ = writeln!(
                out,
                "  packets           {} sent, {} delivered",
                c.sent, c.delivered
            );
            let _ = writeln!(out, "  pdr               {:.4}", c.pdr);
            let _ = writeln!(out, "  throughput        {:.1} bit/s", c.throughput_bps);
            let _ = writeln!(
                out,
                "  residual energy   {:.6} J mean ({decrease:.2}% spent)",
                c.mean_residual_energy
            );
            let _ = writeln!(out, "  head failures     {}", c.ch_failures);
            let _ = writeln!(out, "  alive nodes       {}", c.alive);
        }
    }
    out
}

pub fn table_summary(table: &ComparisonTable) -> String {
    let mut out = String::from(
        "protocol          seeds      pdr   throughput_bps  residual_j  ch_failures\n",
    );
    for s in &table.series {
        if let Some(r) = s.rows.last() {
            let _ = writeln!(
                out,
                "{:<16} {:>6} {:>8.4} {:>14.1} {:>11.6} {:>12.2}",
                s.label,
                s.seeds,
                r.pdr.mean,
                r.throughput_bps.mean,
                r.mean_residual_energy.mean,
                r.ch_failures.mean
            );
        }
    }
    out
}
