//! Flat-file outputs: CSV tables plus a JSON sidecar with the resolved config.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{ComparisonTable, EntanglementTrace, SweepTable};
use crate::config::PhysicalConfig;
use crate::error::Result;
use crate::gaussian::{CovarianceState, QuadratureLayout};
use crate::lindblad::TruncationTable;
use crate::mean_field::MeanAmplitudes;

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    /// Which table the CSV next to it holds.
    pub kind: String,
    pub fingerprint: String,
    pub config: PhysicalConfig,
    /// Run parameters and summaries specific to the kind.
    pub details: serde_json::Value,
}

pub fn write_sidecar(path: &Path, kind: &str, cfg: &PhysicalConfig, details: serde_json::Value) -> Result<()> {
    let sidecar = Sidecar { kind: kind.into(), fingerprint: cfg.fingerprint(), config: cfg.clone(), details };
    serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), &sidecar)?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    #[serde(rename = "E_raw")]
    pub e_raw: f64,
    #[serde(rename = "E_normalized")]
    pub e_normalized: f64,
    pub engine: String,
    pub partition: String,
    pub purity: Option<f64>,
    pub trace_defect: Option<f64>,
}

pub fn trace_rows(trace: &EntanglementTrace) -> Vec<TraceRow> {
    (0..trace.times.len())
        .map(|i| TraceRow {
            t: trace.times[i],
            e_raw: trace.e_raw[i],
            e_normalized: trace.e_normalized[i],
            engine: trace.engine.clone(),
            partition: match trace.partition_mode {
                super::PartitionMode::Fixed => trace.partition.clone(),
                super::PartitionMode::PerTime => trace.argmax_partition[i].clone(),
            },
            purity: trace.purity.get(i).copied(),
            trace_defect: trace.trace_defect.get(i).copied(),
        })
        .collect()
}

pub fn write_trace_csv(path: &Path, trace: &EntanglementTrace) -> Result<()> {
    write_rows(path, &trace_rows(trace))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    pub parameter: String,
    /// Empty on the zeroth-order reference row.
    pub value: Option<f64>,
    pub order: String,
    pub average: f64,
    pub peak: Option<f64>,
}

pub fn sweep_rows(table: &SweepTable) -> Vec<SweepCsvRow> {
    let mut rows: Vec<SweepCsvRow> = table
        .rows
        .iter()
        .map(|r| SweepCsvRow {
            parameter: table.parameter.clone(),
            value: Some(r.value),
            order: table.order.to_string(),
            average: r.average,
            peak: Some(r.peak),
        })
        .collect();
    rows.push(SweepCsvRow {
        parameter: table.parameter.clone(),
        value: None,
        order: "zeroth".into(),
        average: table.reference,
        peak: None,
    });
    rows
}

pub fn write_sweep_csv(path: &Path, table: &SweepTable) -> Result<()> {
    write_rows(path, &sweep_rows(table))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTraceRow {
    pub d_multiplier: f64,
    pub engine: String,
    pub t: f64,
    #[serde(rename = "E_raw")]
    pub e_raw: f64,
    #[serde(rename = "E_normalized")]
    pub e_normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummaryRow {
    pub d_multiplier: f64,
    pub engine: String,
    pub average: f64,
    /// ⟨E⟩_DM / ⟨E⟩ of this engine.
    pub dm_ratio: f64,
}

pub fn comparison_rows(table: &ComparisonTable) -> (Vec<ComparisonTraceRow>, Vec<ComparisonSummaryRow>) {
    let mut traces = Vec::new();
    let mut summary = Vec::new();
    for row in &table.rows {
        for trace in std::iter::once(&row.dm).chain(&row.cm) {
            for i in 0..trace.times.len() {
                traces.push(ComparisonTraceRow {
                    d_multiplier: row.d_multiplier,
                    engine: trace.engine.clone(),
                    t: trace.times[i],
                    e_raw: trace.e_raw[i],
                    e_normalized: trace.e_normalized[i],
                });
            }
        }
        summary.push(ComparisonSummaryRow {
            d_multiplier: row.d_multiplier,
            engine: row.dm.engine.clone(),
            average: row.dm_average,
            dm_ratio: 1.0,
        });
        for ((trace, avg), ratio) in row.cm.iter().zip(&row.cm_averages).zip(&row.ratios) {
            summary.push(ComparisonSummaryRow {
                d_multiplier: row.d_multiplier,
                engine: trace.engine.clone(),
                average: *avg,
                dm_ratio: *ratio,
            });
        }
    }
    (traces, summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationCsvRow {
    pub power: f64,
    pub mode_levels: usize,
    pub t: f64,
    #[serde(rename = "E_raw")]
    pub e_raw: f64,
    pub purity: f64,
    pub trace_defect: f64,
    pub t_star: f64,
}

pub fn truncation_rows(table: &TruncationTable) -> Vec<TruncationCsvRow> {
    let mut out = Vec::new();
    for row in &table.rows {
        let tr = &row.trace;
        for i in 0..tr.times.len() {
            out.push(TruncationCsvRow {
                power: row.power,
                mode_levels: row.spec.mode_levels,
                t: tr.times[i],
                e_raw: tr.negativity[i],
                purity: tr.purity[i],
                trace_defect: tr.trace_defect[i],
                t_star: row.t_star,
            });
        }
    }
    out
}

/// One row per time: `t` then the upper triangle of V, row by row.
pub fn write_covariance_csv(path: &Path, layout: QuadratureLayout, states: &[CovarianceState]) -> Result<()> {
    let labels = layout.labels();
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header = vec!["t".to_string()];
    for i in 0..labels.len() {
        for j in i..labels.len() {
            header.push(format!("V_{}_{}", labels[i], labels[j]));
        }
    }
    w.write_record(&header)?;
    for s in states {
        let mut record = vec![s.time.to_string()];
        record.extend(s.upper_triangle().iter().map(f64::to_string));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub name: String,
    pub re: f64,
    pub im: f64,
}

pub fn mean_rows(means: &MeanAmplitudes) -> Vec<MeanRow> {
    let mut rows: Vec<MeanRow> = means
        .a_mean
        .iter()
        .enumerate()
        .map(|(m, a)| MeanRow { name: format!("a{}", m + 1), re: a.re, im: a.im })
        .collect();
    rows.push(MeanRow { name: "s".into(), re: means.s_mean.re, im: means.s_mean.im });
    rows.push(MeanRow { name: "n".into(), re: means.n_mean.re, im: means.n_mean.im });
    rows
}
