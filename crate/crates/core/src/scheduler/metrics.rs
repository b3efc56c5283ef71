use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::ScheduleError;
use crate::layout::Layout;
use crate::objectives::Direction;
use crate::protocol::Corpus;

use super::sim::{simulate, to_us, EventKind, ScheduleTrace, SimConfig};

fn window_us(dt_s: f64) -> Result<u64, ScheduleError> {
    let w = to_us(dt_s);
    if dt_s.is_finite() && w > 0 {
        Ok(w)
    } else {
        Err(ScheduleError::InvalidWindow)
    }
}

/// Pushes strictly before `ΔT` plus pops at or before `ΔT`.
pub fn throughput(tr: &ScheduleTrace, dt_s: f64) -> Result<f64, ScheduleError> {
    let w = window_us(dt_s)?;
    let n = tr
        .events
        .iter()
        .filter(|e| match e.kind {
            EventKind::Push => e.t_us < w,
            EventKind::Pop => e.t_us <= w,
            EventKind::Start => false,
        })
        .count();
    Ok(n as f64)
}

/// Mean seconds from push to pop; 0 for an empty trace.
pub fn response_time(tr: &ScheduleTrace) -> f64 {
    if tr.records.is_empty() {
        return 0.0;
    }
    let total: u64 = tr.records.iter().map(|r| r.pop_us - r.push_us).sum();
    total as f64 / 1e6 / tr.records.len() as f64
}

fn clipped(a: u64, b: u64, w: u64) -> u64 {
    b.min(w).saturating_sub(a.min(w))
}

/// Mean over devices of the capacity-normalized busy fraction of `[0, ΔT]`.
pub fn resource_utilization(tr: &ScheduleTrace, dt_s: f64) -> Result<f64, ScheduleError> {
    let w = window_us(dt_s)?;
    if tr.devices.is_empty() {
        return Ok(0.0);
    }
    let mut busy: BTreeMap<&str, u64> = BTreeMap::new();
    for r in &tr.records {
        *busy.entry(r.device.as_str()).or_default() += clipped(r.start_us, r.pop_us, w);
    }
    let sum: f64 = tr
        .devices
        .iter()
        .map(|d| busy.get(d.id.as_str()).copied().unwrap_or(0) as f64 / f64::from(d.capacity))
        .sum();
    Ok(sum / w as f64 / tr.devices.len() as f64)
}

/// Time-averaged fraction of operation classes whose active queue is empty
/// over `[0, ΔT]`.
pub fn empty_active_queue_fraction(tr: &ScheduleTrace, dt_s: f64) -> Result<f64, ScheduleError> {
    let w = window_us(dt_s)?;
    let mut by_class: BTreeMap<&str, Vec<(u64, u64)>> = BTreeMap::new();
    for r in &tr.records {
        by_class.entry(r.class.as_str()).or_default().push((r.start_us.min(w), r.pop_us.min(w)));
    }
    if by_class.is_empty() {
        return Ok(1.0);
    }
    let mut total = 0.0;
    for spans in by_class.values_mut() {
        spans.sort();
        let mut covered = 0u64;
        let mut cur: Option<(u64, u64)> = None;
        for &(a, b) in spans.iter() {
            match cur {
                Some((ca, cb)) if a <= cb => cur = Some((ca, cb.max(b))),
                Some((ca, cb)) => {
                    covered += cb - ca;
                    cur = Some((a, b));
                }
                None => cur = Some((a, b)),
            }
        }
        if let Some((ca, cb)) = cur {
            covered += cb - ca;
        }
        total += (w - covered) as f64 / w as f64;
    }
    Ok(total / by_class.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub throughput: f64,
    pub response_time_s: f64,
    pub resource_utilization: f64,
    /// Fraction of classes with an empty active queue, time-averaged.
    pub empty_active_queue_fraction: f64,
    pub makespan_s: f64,
    pub dt_throughput_s: f64,
    pub dt_util_s: f64,
}

impl MetricsReport {
    pub fn from_trace(tr: &ScheduleTrace, dt_throughput_s: f64, dt_util_s: f64) -> Result<Self, ScheduleError> {
        Ok(MetricsReport {
            throughput: throughput(tr, dt_throughput_s)?,
            response_time_s: response_time(tr),
            resource_utilization: resource_utilization(tr, dt_util_s)?,
            empty_active_queue_fraction: empty_active_queue_fraction(tr, dt_util_s)?,
            makespan_s: tr.makespan_s(),
            dt_throughput_s,
            dt_util_s,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffObjectiveVector {
    pub throughput: f64,
    pub response_time: f64,
    pub resource_utilization: f64,
    pub system_complexity: f64,
    pub cost: f64,
}

impl EffObjectiveVector {
    pub const NAMES: [&'static str; 5] =
        ["throughput", "response_time", "resource_utilization", "system_complexity", "cost"];
    pub const DIRECTIONS: [Direction; 5] =
        [Direction::Max, Direction::Min, Direction::Max, Direction::Min, Direction::Min];

    pub fn values(&self) -> Vec<f64> {
        vec![self.throughput, self.response_time, self.resource_utilization, self.system_complexity, self.cost]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffConfig {
    pub dt_throughput_s: f64,
    pub dt_util_s: f64,
    /// Cost ceiling; candidates above it are rejected.
    pub cost_max: f64,
    pub sim: SimConfig,
}

impl Default for EffConfig {
    fn default() -> Self {
        EffConfig { dt_throughput_s: 5e4, dt_util_s: 1e4, cost_max: f64::INFINITY, sim: SimConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EffOutcome {
    Accepted { objectives: EffObjectiveVector, metrics: MetricsReport },
    Rejected { cost: f64, cost_max: f64 },
}

/// Simulates the corpus on `l` and scores the resulting trace.
pub fn evaluate_eff(l: &Layout, c: &Corpus, cat: &Catalog, cfg: &EffConfig) -> Result<EffOutcome, ScheduleError> {
    let cost = l.cost(cat)?;
    if cost > cfg.cost_max {
        return Ok(EffOutcome::Rejected { cost, cost_max: cfg.cost_max });
    }
    let tr = simulate(l, c, cat, &cfg.sim)?;
    let metrics = MetricsReport::from_trace(&tr, cfg.dt_throughput_s, cfg.dt_util_s)?;
    Ok(EffOutcome::Accepted {
        objectives: EffObjectiveVector {
            throughput: metrics.throughput,
            response_time: metrics.response_time_s,
            resource_utilization: metrics.resource_utilization,
            system_complexity: l.system_complexity(cat)?,
            cost,
        },
        metrics,
    })
}
