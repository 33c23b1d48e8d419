use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{constraint_check, CostEstimate, Trajectory, ViolationReport};
use crate::error::Result;
use crate::synthesis::SafetySpec;

/// Columns `t, x_1..x_n, u_raw_1..u_raw_m, u_sat_1..u_sat_m, w_1..w_n`.
pub fn write_trajectory_csv<W: Write>(tr: &Trajectory, out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let n = tr.x.first().map_or(0, |v| v.len());
    let m = tr.u_raw.first().map_or(0, |v| v.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=m).map(|i| format!("u_raw_{i}")));
    header.extend((1..=m).map(|i| format!("u_sat_{i}")));
    header.extend((1..=n).map(|i| format!("w_{i}")));
    wr.write_record(&header)?;
    for t in 0..tr.len() {
        let mut row = vec![t.to_string()];
        for v in [&tr.x[t], &tr.u_raw[t], &tr.u_sat[t], &tr.w[t]] {
            row.extend(v.iter().map(|x| format!("{x:e}")));
        }
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySummary {
    pub steps: usize,
    pub diverged: bool,
    pub diverged_at: Option<usize>,
    pub max_abs_x: f64,
    pub max_abs_u: f64,
    pub time_average_cost: Option<f64>,
    pub violations: Option<ViolationReport>,
}

pub fn summarize(tr: &Trajectory, weights: Option<(&DMatrix<f64>, &DMatrix<f64>)>, safety: Option<&SafetySpec>) -> TrajectorySummary {
    let cost = weights.and_then(|(q, p)| {
        super::lqr_cost_estimate(std::slice::from_ref(tr), q, p, 0).ok().filter(|c: &CostEstimate| c.used == 1).map(|c| c.mean)
    });
    TrajectorySummary {
        steps: tr.len(),
        diverged: tr.diverged,
        diverged_at: tr.diverged_at,
        max_abs_x: tr.max_abs_x(),
        max_abs_u: tr.max_abs_u(),
        time_average_cost: cost,
        violations: safety.map(|s| constraint_check(tr, s)),
    }
}
