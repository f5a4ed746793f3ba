use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use nanomag_core::config::{ModelOrder, PhysicalConfig, PresetName};
use nanomag_core::error::{Error, Result};
use nanomag_core::gaussian::{build_drift, propagate_covariance, uniform_grid, CovarianceState};
use nanomag_core::harness::{self, io, PartitionMode};
use nanomag_core::lindblad::{truncation_study, TruncationSpec};
use nanomag_core::mean_field::solve_mean_amplitudes;

#[derive(Parser, Debug)]
#[command(name = "nanomag", version, about = "Cavity-mode entanglement mediated by a molecular nanomagnet")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Base parameter set (fe8 or mn12).
    #[arg(long, global = true)]
    preset: Option<PresetName>,
    /// TOML file merged over the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dotted override, e.g. `smm.alpha=1e8`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// End of the time window in nanoseconds.
    #[arg(long, global = true)]
    tmax: Option<f64>,
    /// Number of output times, both ends included.
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Keep one bipartition for the whole trace (default).
    #[arg(long, global = true, conflicts_with = "per_time_partition")]
    fixed_partition: bool,
    /// Re-optimize the bipartition at every output time.
    #[arg(long, global = true)]
    per_time_partition: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Entanglement trace at one approximation order.
    Trace {
        #[arg(long, default_value = "zeroth")]
        order: ModelOrder,
        /// Also write the covariance matrix at every output time.
        #[arg(long)]
        covariance: bool,
    },
    /// Time-averaged first-order entanglement over spin–bath couplings.
    SweepAlpha {
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Time-averaged first-order entanglement over bath sizes.
    SweepBath {
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<u32>>,
    },
    /// Density-matrix versus covariance traces for scaled axial anisotropy.
    CompareDm {
        #[arg(long, value_delimiter = ',', default_value = "1,3")]
        multipliers: Vec<f64>,
        #[arg(long, default_value_t = 3.0)]
        spin: f64,
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
    /// Density-matrix traces for several cutoffs and drive powers.
    TruncationStudy {
        /// Drive powers in watts.
        #[arg(long, value_delimiter = ',', default_value = "1e-14,1e-13,1e-12")]
        powers: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "4,5")]
        levels: Vec<usize>,
        #[arg(long, default_value_t = 2.0)]
        spin: f64,
    },
    /// All three orders for the Mn12 parameter set.
    Mn12Suite,
}

impl Common {
    fn partition_mode(&self) -> PartitionMode {
        if self.per_time_partition {
            PartitionMode::PerTime
        } else {
            PartitionMode::Fixed
        }
    }

    fn resolve_config(&self) -> Result<PhysicalConfig> {
        let document = match &self.config {
            Some(path) => Some(fs::read_to_string(path)?),
            None => None,
        };
        let sets = self
            .sets
            .iter()
            .map(|s| {
                s.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| Error::ConfigParse(format!("--set expects KEY=VALUE, got `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        PhysicalConfig::resolve(self.preset, document.as_deref(), &sets)
    }

    fn tmax_or(&self, default: f64) -> f64 {
        self.tmax.map_or(default, |ns| ns * 1e-9)
    }

    fn cm_grid(&self) -> Result<Vec<f64>> {
        uniform_grid(self.tmax_or(harness::DEFAULT_TMAX), self.points.unwrap_or(harness::DEFAULT_POINTS))
    }

    fn dm_grid(&self, default_tmax: f64) -> Result<Vec<f64>> {
        let tmax = self.tmax_or(default_tmax);
        match self.points {
            Some(p) => uniform_grid(tmax, p),
            None => harness::dm_grid(tmax),
        }
    }
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn run(cli: Cli) -> Result<serde_json::Value> {
    let common = &cli.common;
    let mode = common.partition_mode();
    let out = &common.out;
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let summary = match cli.command {
        Command::Trace { order, covariance } => {
            let cfg = common.resolve_config()?;
            let grid = common.cm_grid()?;
            let trace = harness::run_entanglement_trace(&cfg, order, &grid, mode)?;
            let stem = format!("trace_{order}");
            io::write_trace_csv(&out.join(format!("{stem}.csv")), &trace)?;
            written.push(path(out, &format!("{stem}.csv")));
            let details = json!({
                "order": order,
                "partition_mode": mode,
                "partition": trace.partition,
                "normalization": trace.normalization,
                "average": trace.average(),
                "window": harness::AVERAGING_WINDOW,
                "peak": trace.peak(),
            });
            io::write_sidecar(&out.join(format!("{stem}.json")), "trace", &cfg, details.clone())?;
            written.push(path(out, &format!("{stem}.json")));
            if order == ModelOrder::Second {
                io::write_rows(&out.join("means.csv"), &io::mean_rows(&solve_mean_amplitudes(&cfg)?))?;
                written.push(path(out, "means.csv"));
            }
            if covariance {
                let model = build_drift(&cfg, order)?;
                let states = propagate_covariance(&model, &CovarianceState::vacuum(model.layout), &grid)?;
                io::write_covariance_csv(&out.join(format!("covariance_{order}.csv")), model.layout, &states)?;
                written.push(path(out, &format!("covariance_{order}.csv")));
            }
            details
        }
        Command::SweepAlpha { values } => {
            let cfg = common.resolve_config()?;
            let values = values.unwrap_or_else(harness::default_alpha_grid);
            let table = harness::sweep_alpha(&cfg, &values, &common.cm_grid()?, mode)?;
            write_sweep(out, "sweep_alpha", &cfg, &table, mode, &mut written)?
        }
        Command::SweepBath { sizes } => {
            let cfg = common.resolve_config()?;
            let sizes = sizes.unwrap_or_else(harness::default_bath_sizes);
            let table = harness::sweep_bath_size(&cfg, &sizes, &common.cm_grid()?, mode)?;
            write_sweep(out, "sweep_bath", &cfg, &table, mode, &mut written)?
        }
        Command::CompareDm { multipliers, spin, levels } => {
            let cfg = common.resolve_config()?.density_matrix_variant(spin, 2);
            let spec = TruncationSpec { mode_levels: levels, spin, mode_count: 2 };
            let grid = common.dm_grid(harness::AVERAGING_WINDOW.1)?;
            let table = harness::compare_cm_dm(&cfg, &spec, &multipliers, &grid, mode)?;
            let (traces, rows) = io::comparison_rows(&table);
            io::write_rows(&out.join("compare_dm_traces.csv"), &traces)?;
            io::write_rows(&out.join("compare_dm_summary.csv"), &rows)?;
            written.push(path(out, "compare_dm_traces.csv"));
            written.push(path(out, "compare_dm_summary.csv"));
            let details = json!({
                "truncation": spec,
                "d_multipliers": multipliers,
                "window": harness::AVERAGING_WINDOW,
                "closest_order": table.rows.iter().map(|r| r.closest_order()).collect::<Vec<_>>(),
                "summary": rows,
            });
            io::write_sidecar(&out.join("compare_dm.json"), "compare-dm", &cfg, details.clone())?;
            written.push(path(out, "compare_dm.json"));
            details
        }
        Command::TruncationStudy { powers, levels, spin } => {
            let cfg = common.resolve_config()?.density_matrix_variant(spin, 2);
            let specs: Vec<TruncationSpec> =
                levels.iter().map(|l| TruncationSpec { mode_levels: *l, spin, mode_count: 2 }).collect();
            let grid = common.dm_grid(0.25e-9)?;
            let table = truncation_study(&cfg, &powers, &specs, &grid)?;
            io::write_rows(&out.join("truncation.csv"), &io::truncation_rows(&table))?;
            written.push(path(out, "truncation.csv"));
            let t_star: Vec<_> = table.t_star_by_power().into_iter().map(|(p, t)| json!({"power": p, "t_star": t})).collect();
            let details = json!({ "specs": specs, "t_star": t_star });
            io::write_sidecar(&out.join("truncation.json"), "truncation-study", &cfg, details.clone())?;
            written.push(path(out, "truncation.json"));
            details
        }
        Command::Mn12Suite => {
            let cfg = match (&common.preset, &common.config, common.sets.is_empty()) {
                (None, None, true) => PhysicalConfig::preset(PresetName::Mn12),
                _ => common.resolve_config()?,
            };
            let suite = harness::run_order_suite(&cfg, &common.cm_grid()?, mode)?;
            for trace in &suite.traces {
                let name = format!("mn12_{}.csv", trace.engine);
                io::write_trace_csv(&out.join(&name), trace)?;
                written.push(path(out, &name));
            }
            let details = json!({
                "averages": suite.averages,
                "window": harness::AVERAGING_WINDOW,
                "second_order_gap": suite.second_order_gap,
                "partition_mode": mode,
            });
            io::write_sidecar(&out.join("mn12_suite.json"), "mn12-suite", &cfg, details.clone())?;
            written.push(path(out, "mn12_suite.json"));
            details
        }
    };
    Ok(json!({ "written": written, "summary": summary }))
}

fn write_sweep(
    out: &Path,
    stem: &str,
    cfg: &PhysicalConfig,
    table: &nanomag_core::SweepTable,
    mode: PartitionMode,
    written: &mut Vec<String>,
) -> Result<serde_json::Value> {
    io::write_sweep_csv(&out.join(format!("{stem}.csv")), table)?;
    written.push(path(out, &format!("{stem}.csv")));
    let details = json!({
        "parameter": table.parameter,
        "window": table.window,
        "reference": table.reference,
        "averages": table.averages(),
        "partition_mode": mode,
    });
    io::write_sidecar(&out.join(format!("{stem}.json")), stem, cfg, details.clone())?;
    written.push(path(out, &format!("{stem}.json")));
    Ok(details)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
