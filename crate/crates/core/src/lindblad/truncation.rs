//! Sensitivity of density-matrix traces to the Fock-space cutoff.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_dm_trace, DmTrace, TruncationSpec};
use crate::config::PhysicalConfig;
use crate::error::{Error, Result};

/// Relative separation that marks two traces as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub power: f64,
    pub spec: TruncationSpec,
    pub trace: DmTrace,
    /// Divergence time against the neighbouring cutoff at the same power.
    pub t_star: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TruncationTable {
    pub rows: Vec<TruncationRow>,
}

impl TruncationTable {
    /// Earliest divergence over all adjacent cutoffs, per power, in input order.
    pub fn t_star_by_power(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for row in &self.rows {
            match out.iter_mut().find(|(p, _)| *p == row.power) {
                Some(entry) => entry.1 = entry.1.min(row.t_star),
                None => out.push((row.power, row.t_star)),
            }
        }
        out
    }
}

/// Earliest grid time at which `a` and `b` differ by more than the threshold
/// relative to the larger of the two; the end of the grid if they never do.
///
/// Values below `1e-3` of the joint peak (or 1e-12) are compared against that
/// floor instead, so that rounding noise on a vanishing trace is not reported.
pub fn divergence_time(times: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let peak = a.iter().chain(b).fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = (1e-3 * peak).max(1e-12);
    for ((t, x), y) in times.iter().zip(a).zip(b) {
        let scale = x.abs().max(y.abs()).max(floor);
        if (x - y).abs() > DIVERGENCE_THRESHOLD * scale {
            return *t;
        }
    }
    times.last().copied().unwrap_or(0.0)
}

/// Runs every (power, spec) pair and attaches divergence times between
/// consecutive cutoffs.
pub fn truncation_study(
    cfg: &PhysicalConfig,
    powers: &[f64],
    specs: &[TruncationSpec],
    times: &[f64],
) -> Result<TruncationTable> {
    if specs.len() < 2 {
        return Err(Error::InvalidConfig("truncation study needs at least two specs".into()));
    }
    let base = specs[0];
    if specs.iter().any(|s| s.spin != base.spin || s.mode_count != base.mode_count) {
        return Err(Error::InvalidConfig("specs may differ only in mode_levels".into()));
    }
    let mut ordered = specs.to_vec();
    ordered.sort_by_key(|s| s.mode_levels);
    let jobs: Vec<(f64, TruncationSpec)> =
        powers.iter().flat_map(|p| ordered.iter().map(move |s| (*p, *s))).collect();
    let traces: Vec<DmTrace> = jobs
        .par_iter()
        .map(|(p, s)| run_dm_trace(&cfg.clone().with_power(*p), s, times))
        .collect::<Result<_>>()?;

    let per_power = ordered.len();
    let mut rows = Vec::with_capacity(jobs.len());
    for (chunk_jobs, chunk) in jobs.chunks(per_power).zip(traces.chunks(per_power)) {
        for k in 0..per_power {
            let neighbour = if k + 1 < per_power { k + 1 } else { k - 1 };
            let t_star = divergence_time(times, &chunk[k].negativity, &chunk[neighbour].negativity);
            rows.push(TruncationRow {
                power: chunk_jobs[k].0,
                spec: chunk_jobs[k].1,
                trace: chunk[k].clone(),
                t_star,
            });
        }
    }
    Ok(TruncationTable { rows })
}
