//! Pareto-frontier extraction over search-history records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::HistoryRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKey {
    AlphaVar,
    AlphaClean,
    Reward,
    LatencyNs,
    EnergyPj,
    AreaUm2,
    EdpPjNs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Objective {
    pub key: MetricKey,
    pub direction: Direction,
}

impl Objective {
    pub fn new(key: MetricKey, direction: Direction) -> Self {
        Objective { key, direction }
    }

    /// Parses `name` or `name:max` / `name:min`; bare accuracy metrics
    /// default to maximize, hardware metrics to minimize.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, dir) = match s.split_once(':') {
            Some((n, d)) => (n, Some(d)),
            None => (s, None),
        };
        let (key, default_dir) = match name {
            "acc_var" | "accuracy" => (MetricKey::AlphaVar, Direction::Maximize),
            "acc_clean" => (MetricKey::AlphaClean, Direction::Maximize),
            "reward" => (MetricKey::Reward, Direction::Maximize),
            "latency" => (MetricKey::LatencyNs, Direction::Minimize),
            "energy" => (MetricKey::EnergyPj, Direction::Minimize),
            "area" => (MetricKey::AreaUm2, Direction::Minimize),
            "edp" => (MetricKey::EdpPjNs, Direction::Minimize),
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown objective '{name}' (try accuracy, acc_clean, reward, latency, energy, area, edp)"
                )))
            }
        };
        let direction = match dir {
            None => default_dir,
            Some("max") => Direction::Maximize,
            Some("min") => Direction::Minimize,
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "bad direction '{other}' in objective '{s}' (use max or min)"
                )))
            }
        };
        Ok(Objective { key, direction })
    }
}

/// Value of one objective for a record; `None` when the record carries no
/// hardware metrics for a hardware objective.
pub fn objective_value(rec: &HistoryRecord, key: MetricKey) -> Option<f64> {
    match key {
        MetricKey::AlphaVar => Some(rec.alpha_var),
        MetricKey::AlphaClean => Some(rec.alpha_clean),
        MetricKey::Reward => Some(rec.reward),
        MetricKey::LatencyNs => rec.metrics.map(|m| m.latency_ns),
        MetricKey::EnergyPj => rec.metrics.map(|m| m.energy_pj),
        MetricKey::AreaUm2 => rec.metrics.map(|m| m.area_um2),
        MetricKey::EdpPjNs => rec.metrics.map(|m| m.edp_pj_ns),
    }
}

/// Nondominated subset of the comparable records, stable order by episode
/// id. Failed records and records missing a required metric are skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoSet {
    pub objectives: Vec<Objective>,
    pub records: Vec<HistoryRecord>,
}

fn values(rec: &HistoryRecord, objectives: &[Objective]) -> Option<Vec<f64>> {
    objectives.iter().map(|o| objective_value(rec, o.key)).collect()
}

/// True when `a` is at least as good on every objective and strictly better
/// on at least one.
fn dominates(a: &[f64], b: &[f64], objectives: &[Objective]) -> bool {
    let mut strict = false;
    for ((&av, &bv), o) in a.iter().zip(b).zip(objectives) {
        let (better, worse) = match o.direction {
            Direction::Maximize => (av > bv, av < bv),
            Direction::Minimize => (av < bv, av > bv),
        };
        if worse {
            return false;
        }
        strict |= better;
    }
    strict
}

pub fn pareto_front(records: &[HistoryRecord], objectives: &[Objective]) -> Result<ParetoSet> {
    if objectives.is_empty() {
        return Err(Error::InvalidConfig("no objectives given".into()));
    }
    // Incremental frontier maintenance: a new point is dropped if dominated,
    // otherwise it evicts the members it dominates.
    let mut frontier: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        if rec.failed {
            continue;
        }
        let Some(vals) = values(rec, objectives) else {
            continue;
        };
        if frontier.iter().any(|(_, f)| dominates(f, &vals, objectives)) {
            continue;
        }
        frontier.retain(|(_, f)| !dominates(&vals, f, objectives));
        frontier.push((i, vals));
    }
    frontier.sort_by_key(|(i, _)| records[*i].episode);
    Ok(ParetoSet {
        objectives: objectives.to_vec(),
        records: frontier.into_iter().map(|(i, _)| records[i].clone()).collect(),
    })
}
