//! Per-turn latency records and their summary statistics.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn_id: u64,
    /// Wall time spent inside ELIZA.
    pub ai_ms: f64,
    /// Wall time for behavior planning and expression mapping.
    pub plan_ms: f64,
    pub total_server_ms: f64,
    pub reply_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean_ms: f64,
    /// Sample standard deviation; absent with fewer than two values.
    pub sd_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub count: usize,
    pub ai_ms: Stat,
    pub plan_ms: Stat,
    pub total_server_ms: Stat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("no values to summarize")]
    Empty,
    #[error("standard deviation needs at least two values, got {0}")]
    TooFew(usize),
}

/// Running mean and sum of squared deviations (Welford).
#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn stat(&self) -> Stat {
        Stat {
            mean_ms: self.mean,
            sd_ms: (self.n >= 2).then(|| (self.m2 / (self.n - 1) as f64).sqrt()),
        }
    }
}

fn accumulate(values: &[f64]) -> Accumulator {
    let mut acc = Accumulator::default();
    values.iter().for_each(|&v| acc.push(v));
    acc
}

pub fn mean(values: &[f64]) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(accumulate(values).mean)
}

/// Standard deviation with the `n - 1` denominator.
pub fn sample_sd(values: &[f64]) -> Result<f64, MetricsError> {
    match values.len() {
        0 => Err(MetricsError::Empty),
        1 => Err(MetricsError::TooFew(1)),
        _ => Ok(accumulate(values).stat().sd_ms.unwrap_or_default()),
    }
}

pub fn metrics_summary(records: &[TurnRecord]) -> Result<MetricsSummary, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut ai = Accumulator::default();
    let mut plan = Accumulator::default();
    let mut total = Accumulator::default();
    for r in records {
        ai.push(r.ai_ms);
        plan.push(r.plan_ms);
        total.push(r.total_server_ms);
    }
    Ok(MetricsSummary {
        count: records.len(),
        ai_ms: ai.stat(),
        plan_ms: plan.stat(),
        total_server_ms: total.stat(),
    })
}

impl MetricsSummary {
    /// A plain-text table with one row per measured component.
    pub fn table(&self) -> String {
        let row = |name: &str, s: &Stat| {
            let sd = s.sd_ms.map_or_else(|| "n/a".to_string(), |sd| format!("{sd:.4}"));
            format!("{name:<22}{:>12.4}{:>12}\n", s.mean_ms, sd)
        };
        let mut out = format!("turns: {}\n", self.count);
        out.push_str(&format!("{:<22}{:>12}{:>12}\n", "component", "mean (ms)", "sd (ms)"));
        out.push_str(&row("ai_ms (ELIZA)", &self.ai_ms));
        out.push_str(&row("plan_ms", &self.plan_ms));
        out.push_str(&row("total_server_ms", &self.total_server_ms));
        out
    }
}

/// Collects turn records from many sessions.
#[derive(Debug, Default)]
pub struct MetricsSink {
    records: Mutex<Vec<TurnRecord>>,
}

impl MetricsSink {
    pub fn record(&self, record: TurnRecord) {
        self.records.lock().unwrap_or_else(|e| e.into_inner()).push(record);
    }

    pub fn len(&self) -> usize {
        self.records.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn summary(&self) -> Result<MetricsSummary, MetricsError> {
        metrics_summary(&self.records.lock().unwrap_or_else(|e| e.into_inner()))
    }
}
