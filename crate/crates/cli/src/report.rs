//! CSV exports: the flat per-episode report, the error-vs-metric plot data,
//! and Pareto frontiers. All outputs are pure functions of the history log.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use xbarnas::pareto::{objective_value, pareto_front, MetricKey, Objective};
use xbarnas::search::HistoryRecord;

use crate::error::{CliError, CliResult};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per episode with every logged scalar.
pub fn report_csv(records: &[HistoryRecord]) -> String {
    let mut out = String::from(
        "episode,phase,failed,alpha_clean,alpha_var,reward,latency_ns,energy_pj,area_um2,edp_pj_ns,throughput_tops,efficiency_tops_per_w,device_index\n",
    );
    for r in records {
        let m = r.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.episode,
            r.phase,
            r.failed,
            r.alpha_clean,
            r.alpha_var,
            r.reward,
            opt(m.map(|m| m.latency_ns)),
            opt(m.map(|m| m.energy_pj)),
            opt(m.map(|m| m.area_um2)),
            opt(m.map(|m| m.edp_pj_ns)),
            opt(m.map(|m| m.throughput_tops)),
            opt(m.map(|m| m.efficiency_tops_per_w)),
            r.candidate
                .device_index
                .map(|d| d.to_string())
                .unwrap_or_default(),
        );
    }
    out
}

/// Inference error (1 - noisy accuracy) against one hardware metric, for
/// records that carry metrics.
pub fn error_vs_metric_csv(records: &[HistoryRecord], key: MetricKey, header: &str) -> String {
    let mut out = format!("episode,error,{header}\n");
    for r in records {
        if r.failed {
            continue;
        }
        if let Some(v) = objective_value(r, key) {
            let _ = writeln!(out, "{},{},{}", r.episode, 1.0 - r.alpha_var, v);
        }
    }
    out
}

pub fn pareto_csv(records: &[HistoryRecord], objectives: &[Objective]) -> CliResult<String> {
    let front = pareto_front(records, objectives).map_err(CliError::from)?;
    let mut out = String::from("episode,phase,alpha_var");
    for o in objectives {
        let _ = write!(out, ",{}", key_name(o.key));
    }
    out.push('\n');
    for r in &front.records {
        let _ = write!(out, "{},{},{}", r.episode, r.phase, r.alpha_var);
        for o in objectives {
            let _ = write!(out, ",{}", opt(objective_value(r, o.key)));
        }
        out.push('\n');
    }
    Ok(out)
}

fn key_name(key: MetricKey) -> &'static str {
    match key {
        MetricKey::AlphaVar => "alpha_var",
        MetricKey::AlphaClean => "alpha_clean",
        MetricKey::Reward => "reward",
        MetricKey::LatencyNs => "latency_ns",
        MetricKey::EnergyPj => "energy_pj",
        MetricKey::AreaUm2 => "area_um2",
        MetricKey::EdpPjNs => "edp_pj_ns",
    }
}

/// Writes the standard report bundle into `reports/`.
pub fn write_reports(reports: &Path, records: &[HistoryRecord]) -> CliResult<()> {
    fs::create_dir_all(reports)?;
    fs::write(reports.join("report.csv"), report_csv(records))?;
    for (key, header, file) in [
        (MetricKey::LatencyNs, "latency_ns", "error_vs_latency.csv"),
        (MetricKey::AreaUm2, "area_um2", "error_vs_area.csv"),
        (MetricKey::EnergyPj, "energy_pj", "error_vs_energy.csv"),
    ] {
        fs::write(reports.join(file), error_vs_metric_csv(records, key, header))?;
    }
    Ok(())
}
