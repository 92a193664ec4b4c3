//! CSV output.
//!
//! | file | columns |
//! |------|---------|
//! | `activity.csv` | cycle, time_ms, young, unpinned, pinned, cold, refs_total, refs_young, refs_unpinned, refs_pinned, refs_cold |
//! | `cold_events.csv` | cycle, time_ms, region, objects, bytes |
//! | `summary.csv` | key, value |
//! | `convergence.csv` | region, t_pinned_ms, stack_convergence_ms, oracle_convergence_ms (oracle runs only) |
//!
//! Free regions count as young. The `refs_*` columns are proportions of the
//! references sampled during the cycle.

use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::oracle::convergence_time;
use crate::scenario::RunReport;

fn fraction(x: f64) -> String {
    format!("{x:.9}")
}

fn opt_ms(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "none".into())
}

pub fn emit_reports(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;

    let mut w = csv::Writer::from_path(dir.join("activity.csv"))?;
    w.write_record([
        "cycle",
        "time_ms",
        "young",
        "unpinned",
        "pinned",
        "cold",
        "refs_total",
        "refs_young",
        "refs_unpinned",
        "refs_pinned",
        "refs_cold",
    ])?;
    for row in &report.cycles {
        let f = row.fractions();
        w.write_record([
            row.cycle.to_string(),
            row.time_ms.to_string(),
            row.young.to_string(),
            row.unpinned.to_string(),
            row.pinned.to_string(),
            row.cold.to_string(),
            row.refs_total().to_string(),
            fraction(f[0]),
            fraction(f[1]),
            fraction(f[2]),
            fraction(f[3]),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("cold_events.csv"))?;
    w.write_record(["cycle", "time_ms", "region", "objects", "bytes"])?;
    for e in &report.cold_events {
        w.write_record([
            e.cycle.to_string(),
            e.time_ms.to_string(),
            e.region.to_string(),
            e.objects.to_string(),
            e.bytes.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(["key", "value"])?;
    for (k, v) in report.summary.rows() {
        w.write_record([k, v.as_str()])?;
    }
    if let Some(inc) = &report.inclusion {
        w.write_record(["fully_included", if inc.fully_included { "true" } else { "false" }])?;
        w.write_record([
            "oracle_not_slower",
            if inc.oracle_not_slower() { "true" } else { "false" },
        ])?;
    }
    w.flush()?;

    let convergence = dir.join("convergence.csv");
    match &report.oracle_log {
        Some(oracle) => {
            let mut w = csv::Writer::from_path(&convergence)?;
            w.write_record(["region", "t_pinned_ms", "stack_convergence_ms", "oracle_convergence_ms"])?;
            let oracle_eps: std::collections::BTreeMap<_, _> =
                oracle.episodes().map(|e| ((e.region, e.t_pinned), e)).collect();
            for e in report.stack_log.episodes() {
                let o = oracle_eps
                    .get(&(e.region, e.t_pinned))
                    .and_then(|o| convergence_time(o));
                w.write_record([
                    e.region.0.to_string(),
                    e.t_pinned.to_string(),
                    opt_ms(convergence_time(e)),
                    opt_ms(o),
                ])?;
            }
            w.flush()?;
        }
        None => {
            if convergence.exists() {
                fs::remove_file(&convergence)?;
            }
        }
    }
    Ok(())
}
