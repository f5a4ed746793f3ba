//! Reproduction recipes: entanglement traces, parameter sweeps and
//! cross-engine comparisons.

pub mod io;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ModelOrder, PhysicalConfig, PresetName};
use crate::entanglement::{balanced_partitions, log_negativity};
use crate::error::{Error, Result};
use crate::gaussian::{build_drift, propagate_covariance_with, uniform_grid, CovarianceState};
use crate::lindblad::{run_dm_trace, TruncationSpec};

/// Averaging window for sweep and comparison summaries, in seconds.
pub const AVERAGING_WINDOW: (f64, f64) = (0.0, 0.8e-9);
pub const DEFAULT_TMAX: f64 = 1.5e-9;
pub const DEFAULT_POINTS: usize = 1500;
/// Output density of density-matrix traces.
pub const DM_POINTS_PER_NS: f64 = 400.0;

pub fn default_grid() -> Vec<f64> {
    uniform_grid(DEFAULT_TMAX, DEFAULT_POINTS).expect("valid default grid")
}

/// Grid on [0, t_max] with at least `DM_POINTS_PER_NS` samples per nanosecond.
pub fn dm_grid(t_max: f64) -> Result<Vec<f64>> {
    let points = (t_max * 1e9 * DM_POINTS_PER_NS).ceil() as usize + 1;
    uniform_grid(t_max, points.max(2))
}

/// α = 0 followed by half-decade steps from 1e6 to 1e12.
pub fn default_alpha_grid() -> Vec<f64> {
    std::iter::once(0.0).chain((0..13).map(|k| 10f64.powf(6.0 + 0.5 * k as f64))).collect()
}

pub fn default_bath_sizes() -> Vec<u32> {
    vec![10, 50, 100, 200]
}

/// How the bipartition is chosen along a covariance trace.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMode {
    /// One partition for the whole trace: the one with the largest time-averaged negativity.
    #[default]
    Fixed,
    /// The best partition at every output time.
    PerTime,
}

impl FromStr for PartitionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(PartitionMode::Fixed),
            "per-time" | "per_time" => Ok(PartitionMode::PerTime),
            other => Err(Error::InvalidConfig(format!("unknown partition mode `{other}`"))),
        }
    }
}

impl fmt::Display for PartitionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartitionMode::Fixed => "fixed",
            PartitionMode::PerTime => "per-time",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub divisor: f64,
    /// Set when the trace never leaves zero and was left unscaled.
    pub zero_trace: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementTrace {
    /// `cm-zeroth`, `cm-first`, `cm-second` or `dm`.
    pub engine: String,
    pub partition_mode: PartitionMode,
    /// Partition behind `e_raw`; for per-time traces, the one at the peak.
    pub partition: String,
    pub times: Vec<f64>,
    pub e_raw: Vec<f64>,
    pub e_normalized: Vec<f64>,
    pub normalization: Normalization,
    /// Best partition at each output time.
    pub argmax_partition: Vec<String>,
    /// Density-matrix diagnostics; empty for covariance traces.
    pub purity: Vec<f64>,
    pub trace_defect: Vec<f64>,
    pub fingerprint: String,
}

impl EntanglementTrace {
    pub fn average(&self) -> f64 {
        time_average(&self.times, &self.e_raw, AVERAGING_WINDOW)
    }

    pub fn peak(&self) -> f64 {
        self.e_raw.iter().fold(0.0, |a: f64, v| a.max(*v))
    }
}

pub fn engine_tag(order: ModelOrder) -> String {
    format!("cm-{order}")
}

/// Divides by the trace maximum; an all-zero trace stays zero and is flagged.
pub fn normalize_trace(mut trace: EntanglementTrace) -> EntanglementTrace {
    let peak = trace.peak();
    if peak > 0.0 {
        trace.e_normalized = trace.e_raw.iter().map(|v| v / peak).collect();
        trace.normalization = Normalization { divisor: peak, zero_trace: false };
    } else {
        trace.e_normalized = vec![0.0; trace.e_raw.len()];
        trace.normalization = Normalization { divisor: 0.0, zero_trace: true };
    }
    trace
}

/// Mean of the piecewise-linear interpolant over `window` ∩ [t₀, t_end].
pub fn time_average(times: &[f64], values: &[f64], window: (f64, f64)) -> f64 {
    let n = times.len().min(values.len());
    if n == 0 {
        return 0.0;
    }
    if n == 1 {
        return values[0];
    }
    let lo = window.0.max(times[0]);
    let hi = window.1.min(times[n - 1]);
    if !(hi > lo) {
        return values[times.partition_point(|t| *t < lo).min(n - 1)];
    }
    let at = |k: usize, t: f64| {
        let (t0, t1) = (times[k], times[k + 1]);
        values[k] + (values[k + 1] - values[k]) * (t - t0) / (t1 - t0)
    };
    let mut area = 0.0;
    for k in 0..n - 1 {
        let a = times[k].max(lo);
        let b = times[k + 1].min(hi);
        if b > a {
            area += 0.5 * (at(k, a) + at(k, b)) * (b - a);
        }
    }
    area / (hi - lo)
}

/// Propagates the covariance from the vacuum and reads out mode–mode negativity.
pub fn run_entanglement_trace(
    cfg: &PhysicalConfig,
    order: ModelOrder,
    times: &[f64],
    mode: PartitionMode,
) -> Result<EntanglementTrace> {
    let model = build_drift(cfg, order)?;
    let partitions = balanced_partitions(cfg.mode_count())?;
    // values[p][t]
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(times.len()); partitions.len()];
    propagate_covariance_with(&model, &CovarianceState::vacuum(model.layout), times, |state| {
        for (p, partition) in partitions.iter().enumerate() {
            values[p].push(log_negativity(&state.v, partition)?);
        }
        Ok(())
    })?;

    let argmax_at = |t: usize| {
        let mut best = 0;
        for p in 1..partitions.len() {
            if values[p][t] > values[best][t] {
                best = p;
            }
        }
        best
    };
    let argmax: Vec<usize> = (0..times.len()).map(argmax_at).collect();
    let (e_raw, partition) = match mode {
        PartitionMode::Fixed => {
            let mut best = 0;
            let mut best_avg = f64::NEG_INFINITY;
            for (p, v) in values.iter().enumerate() {
                let avg = time_average(times, v, AVERAGING_WINDOW);
                if avg > best_avg {
                    best = p;
                    best_avg = avg;
                }
            }
            (values[best].clone(), partitions[best].to_string())
        }
        PartitionMode::PerTime => {
            let e: Vec<f64> = argmax.iter().enumerate().map(|(t, p)| values[*p][t]).collect();
            let peak_at = (0..e.len()).fold(0, |b, t| if e[t] > e[b] { t } else { b });
            let label = argmax.get(peak_at).map(|p| partitions[*p].to_string()).unwrap_or_default();
            (e, label)
        }
    };
    Ok(normalize_trace(EntanglementTrace {
        engine: engine_tag(order),
        partition_mode: mode,
        partition,
        times: times.to_vec(),
        e_normalized: Vec::new(),
        normalization: Normalization::default(),
        argmax_partition: argmax.iter().map(|p| partitions[*p].to_string()).collect(),
        e_raw,
        purity: Vec::new(),
        trace_defect: Vec::new(),
        fingerprint: cfg.fingerprint(),
    }))
}

/// Density-matrix trace between the first half of the modes and the rest.
pub fn run_dm_entanglement_trace(cfg: &PhysicalConfig, spec: &TruncationSpec, times: &[f64]) -> Result<EntanglementTrace> {
    let dm = run_dm_trace(cfg, spec, times)?;
    let split = (spec.mode_count / 2).max(1);
    let join = |r: std::ops::Range<usize>| r.map(|m| (m + 1).to_string()).collect::<Vec<_>>().join(",");
    let label = format!("{{{}}}|{{{}}}", join(0..split), join(split..spec.mode_count));
    Ok(normalize_trace(EntanglementTrace {
        engine: "dm".into(),
        partition_mode: PartitionMode::Fixed,
        partition: label.clone(),
        argmax_partition: vec![label; dm.times.len()],
        times: dm.times,
        e_raw: dm.negativity,
        e_normalized: Vec::new(),
        normalization: Normalization::default(),
        purity: dm.purity,
        trace_defect: dm.trace_defect,
        fingerprint: cfg.fingerprint(),
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub average: f64,
    pub peak: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub parameter: String,
    pub order: ModelOrder,
    pub window: (f64, f64),
    pub rows: Vec<SweepRow>,
    /// Zeroth-order average of the unswept configuration.
    pub reference: f64,
}

impl SweepTable {
    pub fn averages(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.average).collect()
    }
}

fn sweep<F>(cfg: &PhysicalConfig, parameter: &str, values: &[f64], times: &[f64], mode: PartitionMode, apply: F) -> Result<SweepTable>
where
    F: Fn(&mut PhysicalConfig, f64) + Sync,
{
    let reference = run_entanglement_trace(cfg, ModelOrder::Zeroth, times, mode)?.average();
    let rows = values
        .par_iter()
        .map(|v| {
            let mut point = cfg.clone();
            apply(&mut point, *v);
            let trace = run_entanglement_trace(&point, ModelOrder::First, times, mode)?;
            Ok(SweepRow { value: *v, average: trace.average(), peak: trace.peak() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { parameter: parameter.into(), order: ModelOrder::First, window: AVERAGING_WINDOW, rows, reference })
}

/// First-order averages over spin–bath coupling strengths.
pub fn sweep_alpha(cfg: &PhysicalConfig, alphas: &[f64], times: &[f64], mode: PartitionMode) -> Result<SweepTable> {
    sweep(cfg, "alpha", alphas, times, mode, |c, a| c.smm.alpha = a)
}

/// First-order averages over bath sizes.
pub fn sweep_bath_size(cfg: &PhysicalConfig, sizes: &[u32], times: &[f64], mode: PartitionMode) -> Result<SweepTable> {
    let values: Vec<f64> = sizes.iter().map(|n| f64::from(*n)).collect();
    sweep(cfg, "n_bath", &values, times, mode, |c, n| c.smm.n_bath = n as u32)
}

/// Traces at all three orders for one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderSuite {
    pub traces: Vec<EntanglementTrace>,
    pub averages: Vec<f64>,
    /// |⟨E⟩₂ − ⟨E⟩₀| / ⟨E⟩₀.
    pub second_order_gap: f64,
}

pub fn run_order_suite(cfg: &PhysicalConfig, times: &[f64], mode: PartitionMode) -> Result<OrderSuite> {
    let traces = ModelOrder::ALL
        .par_iter()
        .map(|o| run_entanglement_trace(cfg, *o, times, mode))
        .collect::<Result<Vec<_>>>()?;
    let averages: Vec<f64> = traces.iter().map(EntanglementTrace::average).collect();
    let second_order_gap = if averages[0] > 0.0 { (averages[2] - averages[0]).abs() / averages[0] } else { f64::NAN };
    Ok(OrderSuite { traces, averages, second_order_gap })
}

pub fn run_mn12_suite(times: &[f64], mode: PartitionMode) -> Result<OrderSuite> {
    run_order_suite(&PhysicalConfig::preset(PresetName::Mn12), times, mode)
}

/// Fe8 in the reduced setting shared by both engines.
pub fn comparison_config() -> PhysicalConfig {
    let mut cfg = PhysicalConfig::preset(PresetName::Fe8).density_matrix_variant(3.0, 2).with_power(1e-14);
    cfg.kappa_s = 1e9;
    cfg.overrides.kappa = Some(7.5e9);
    cfg
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub d_multiplier: f64,
    pub dm: EntanglementTrace,
    /// Zeroth, first and second order.
    pub cm: Vec<EntanglementTrace>,
    pub dm_average: f64,
    pub cm_averages: Vec<f64>,
    /// ⟨E⟩_DM / ⟨E⟩_CM per order.
    pub ratios: Vec<f64>,
}

impl ComparisonRow {
    /// Order whose average is closest to the density-matrix one on a log scale.
    pub fn closest_order(&self) -> ModelOrder {
        let distance = |r: f64| if r > 0.0 && r.is_finite() { r.ln().abs() } else { f64::INFINITY };
        let mut best = 0;
        for k in 1..self.ratios.len() {
            if distance(self.ratios[k]) < distance(self.ratios[best]) {
                best = k;
            }
        }
        ModelOrder::ALL[best]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub spec: TruncationSpec,
    pub rows: Vec<ComparisonRow>,
}

/// Density-matrix and covariance traces on a shared grid for each scaling of D.
pub fn compare_cm_dm(
    cfg: &PhysicalConfig,
    spec: &TruncationSpec,
    d_multipliers: &[f64],
    times: &[f64],
    mode: PartitionMode,
) -> Result<ComparisonTable> {
    let scaled = |m: f64| {
        let mut c = cfg.clone();
        c.smm.d_axial *= m;
        c
    };
    let dm: Vec<EntanglementTrace> = d_multipliers
        .par_iter()
        .map(|m| run_dm_entanglement_trace(&scaled(*m), spec, times))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(d_multipliers.len());
    for (m, dm) in d_multipliers.iter().zip(dm) {
        let suite = run_order_suite(&scaled(*m), times, mode)?;
        let dm_average = dm.average();
        let ratios = suite.averages.iter().map(|c| dm_average / c).collect();
        rows.push(ComparisonRow { d_multiplier: *m, dm, cm: suite.traces, dm_average, cm_averages: suite.averages, ratios });
    }
    Ok(ComparisonTable { spec: *spec, rows })
}
