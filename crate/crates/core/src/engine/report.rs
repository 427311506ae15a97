//! Tabular and structured run outputs.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{FloorSource, LogRow, MethodConfig, RunResult, RunStatus};

pub const CONVERGENCE_HEADER_PREFIX: &str = "iteration,z_inf,z_sup,cost_mean,cost_std,elapsed_ms";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Convergence log as CSV: the fixed columns, then `prop_t<t>` for
/// stages 2..T, then `lps_t<t>` for stages 1..T.
pub fn convergence_csv(log: &[LogRow], stages: usize) -> String {
    let mut out = String::from(CONVERGENCE_HEADER_PREFIX);
    for t in 2..=stages {
        write!(out, ",prop_t{t}").unwrap();
    }
    for t in 1..=stages {
        write!(out, ",lps_t{t}").unwrap();
    }
    out.push('\n');
    for r in log {
        write!(
            out,
            "{},{},{},{},{},{}",
            r.iteration,
            r.z_inf,
            opt(r.z_sup),
            opt(r.cost_mean),
            opt(r.cost_std),
            r.elapsed_ms
        )
        .unwrap();
        for p in &r.proportions {
            write!(out, ",{p}").unwrap();
        }
        for c in &r.lp_counts {
            write!(out, ",{c}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Mean selected proportion per stage over iterations 1.. (0 when no
/// iteration ran).
pub fn mean_proportions(log: &[LogRow]) -> Vec<f64> {
    let rows: Vec<&LogRow> = log.iter().filter(|r| r.iteration > 0).collect();
    let stages = log.first().map_or(0, |r| r.proportions.len());
    (0..stages)
        .map(|s| {
            if rows.is_empty() {
                0.0
            } else {
                rows.iter().map(|r| r.proportions[s]).sum::<f64>() / rows.len() as f64
            }
        })
        .collect()
}

/// Per-stage selection statistics as CSV.
pub fn proportions_csv(result: &RunResult) -> String {
    let mut out = String::from("stage,mean_proportion,final_proportion,final_cuts,final_selected\n");
    let means = mean_proportions(&result.log);
    for (k, mean) in means.iter().enumerate() {
        let s = k + 1;
        let (mut cuts, mut sel) = (0, 0);
        for p in result.approximation.pools(s) {
            let (a, b, _) = p.selection_stats();
            cuts += a;
            sel += b;
        }
        writeln!(
            out,
            "{},{},{},{},{}",
            s + 1,
            mean,
            result.approximation.proportion(s),
            cuts,
            sel
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub config: MethodConfig,
    pub status: RunStatus,
    pub iterations: usize,
    pub z_inf: f64,
    pub z_sup: Option<f64>,
    pub cost_mean: Option<f64>,
    pub cost_std: Option<f64>,
    pub elapsed_ms: u64,
    pub total_lps: u64,
    pub floor_source: FloorSource,
    /// Stages 2..T.
    pub mean_proportions: Vec<f64>,
    pub error: Option<String>,
}

impl RunSummary {
    pub fn new(method: &str, config: &MethodConfig, result: &RunResult) -> Self {
        let last = result.final_row();
        let bounded = result.log.iter().rev().find(|r| r.z_sup.is_some());
        Self {
            method: method.to_string(),
            config: config.clone(),
            status: result.status,
            iterations: last.iteration,
            z_inf: last.z_inf,
            z_sup: bounded.and_then(|r| r.z_sup),
            cost_mean: bounded.and_then(|r| r.cost_mean),
            cost_std: bounded.and_then(|r| r.cost_std),
            elapsed_ms: last.elapsed_ms,
            total_lps: result.total_lps(),
            floor_source: result.floor_source.clone(),
            mean_proportions: mean_proportions(&result.log),
            error: result.error.as_ref().map(|e| e.to_string()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
