//! Command-line front end.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{fit_parameters, phase_sweep, search_phases, FitData, FitRange};
use crate::gaussian::{
    covariance_pattern, propagate_covariance, sample_covariance, symplectic_defect, to_quadrature,
    CovarianceMatrix, DEFAULT_PATTERN_RELATIVE, DEFAULT_VACUUM_SCALE,
};
use crate::graphs::{analyze_topology, export_dot, extract_graph};
use crate::io::config::{Angle, ExperimentConfig};
use crate::io::container::{load_scattering, write_native, DataFormat};
use crate::io::output::{
    db_matrix_csv, fit_surface_csv, quadrature_csv, sweep_csv, topology_json, with_provenance,
    Provenance,
};
use crate::io::parse_config;
use crate::model::{predicted_intermod_indices, DeviceParams, ModeGrid, PumpScheme};
use crate::scattering::{normalize_pump_off, normalize_pump_off_complex, simulate, DbMatrix};
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD_DB: f64 = -20.0;
pub const DEFAULT_STEPS: usize = 72;
pub const DEFAULT_SIGNAL: i64 = 28;
pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_FIT_POINTS: usize = 12;
pub const DEFAULT_SEARCH_POINTS: usize = 8;

#[derive(Debug, Parser)]
#[command(name = "combscatter", version, about = "Multimode parametric scattering toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Configuration file.
    #[arg(value_name = "CONFIG")]
    pub config_path: Option<PathBuf>,
    /// Configuration file, as a flag.
    #[arg(long = "config", value_name = "CONFIG", conflicts_with = "config_path")]
    pub config_flag: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Edge cutoff in dB relative to pump-off transmission.
    #[arg(long, allow_hyphen_values = true)]
    pub threshold_db: Option<f64>,
    /// Phase of tone +1, e.g. `180deg` or `3.14rad`.
    #[arg(long = "phase1", allow_hyphen_values = true, value_name = "ANGLE")]
    pub phase_plus: Option<String>,
    /// Phase of tone 0.
    #[arg(long = "phase0", allow_hyphen_values = true, value_name = "ANGLE")]
    pub phase_zero: Option<String>,
    /// Phase of tone -1.
    #[arg(long = "phase-1", allow_hyphen_values = true, value_name = "ANGLE")]
    pub phase_minus: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Scattering matrix file (native container unless --sidecar is given).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// JSON sidecar when --data is a generic CSV.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute S, its dB map and the thresholded correlation graph.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep one pump phase and track intermodulation products.
    SweepPhase {
        #[command(flatten)]
        common: Common,
        /// Label of the swept tone.
        #[arg(long, allow_hyphen_values = true)]
        tone: Option<i64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        signal: Option<i64>,
    },
    /// Extract and classify the correlation graph.
    Graph {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Output covariance of vacuum input.
    Covariance {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo estimate of the output covariance.
    SampleCovariance {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Fit (g, γ) to a measured scattering matrix.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Pump-off reference for a raw measured matrix (native container).
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Search pump phases for a target correlation graph.
    SearchPhases {
        #[command(flatten)]
        common: Common,
        /// Target graph as JSON with an `edges` array of `[a, b, ...]`.
        #[arg(long)]
        target: PathBuf,
        /// Labels of the swept tones (repeatable).
        #[arg(long = "tone", allow_hyphen_values = true)]
        tones: Vec<i64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// List second- and third-order intermodulation indices.
    PredictIdlers {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        signal: Option<i64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::SweepPhase { .. } => "sweep-phase",
            Command::Graph { .. } => "graph",
            Command::Covariance { .. } => "covariance",
            Command::SampleCovariance { .. } => "sample-covariance",
            Command::Fit { .. } => "fit",
            Command::SearchPhases { .. } => "search-phases",
            Command::PredictIdlers { .. } => "predict-idlers",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common }
            | Command::SweepPhase { common, .. }
            | Command::Graph { common, .. }
            | Command::Covariance { common }
            | Command::SampleCovariance { common, .. }
            | Command::Fit { common, .. }
            | Command::SearchPhases { common, .. }
            | Command::PredictIdlers { common, .. } => common,
        }
    }
}

/// Summary printed on stdout after a successful run.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub command: &'static str,
    pub config_sha256: String,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

struct Context {
    config: ExperimentConfig,
    grid: ModeGrid,
    params: DeviceParams,
    scheme: PumpScheme,
    provenance: Provenance,
    out_dir: PathBuf,
    threshold_db: f64,
    outputs: Vec<PathBuf>,
    warnings: Vec<String>,
}

impl Context {
    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.out_dir.join(name);
        fs::write(&path, contents)?;
        self.outputs.push(path);
        Ok(())
    }

    fn simulate_db(&self) -> Result<(crate::scattering::ScatteringMatrix, DbMatrix)> {
        let on = simulate(&self.grid, &self.params, &self.scheme)?;
        let off = simulate(&self.grid, &self.params, &self.scheme.pump_off())?;
        let rel = normalize_pump_off_complex(&on, &off)?;
        let db = normalize_pump_off(&on, &off)?;
        Ok((rel, db))
    }
}

fn apply_overrides(config: &mut ExperimentConfig, common: &Common) -> Result<()> {
    for (label, text) in [
        (1, &common.phase_plus),
        (0, &common.phase_zero),
        (-1, &common.phase_minus),
    ] {
        if let Some(text) = text {
            let angle = Angle::parse_suffixed(text).map_err(Error::InvalidArgument)?;
            let k = config.tone_index(label)?;
            config.tones[k].phase = angle;
        }
    }
    if let Some(t) = common.threshold_db {
        if !t.is_finite() {
            return Err(Error::InvalidArgument("threshold must be finite".into()));
        }
        config.run.threshold_db = Some(t);
    }
    Ok(())
}

fn load_context(command: &Command) -> Result<Context> {
    let common = command.common();
    let path = common
        .config_path
        .as_ref()
        .or(common.config_flag.as_ref())
        .ok_or_else(|| Error::InvalidArgument("a configuration file is required".into()))?;
    let text = fs::read_to_string(path)?;
    let mut config = parse_config(&text)?;
    apply_overrides(&mut config, common)?;
    match command {
        Command::SweepPhase { tone, steps, signal, .. } => {
            if let Some(t) = tone {
                config.run.sweep_tone = Some(*t);
            }
            if let Some(s) = steps {
                config.run.steps = Some(*s);
            }
            if let Some(s) = signal {
                config.run.signal_index = Some(*s);
            }
        }
        Command::SampleCovariance { seed, samples, .. } => {
            if let Some(s) = seed {
                config.run.seed = Some(*s);
            }
            if let Some(n) = samples {
                config.run.samples = Some(*n);
            }
        }
        Command::PredictIdlers { signal: Some(s), .. } => config.run.signal_index = Some(*s),
        _ => {}
    }
    let grid = config.mode_grid()?;
    let params = config.device_params()?;
    let scheme = config.scheme()?;
    let mut warnings = Vec::new();
    let detuning = params.max_detuning_linewidths(&grid);
    if detuning > 3.0 {
        warnings.push(format!(
            "grid edge lies {detuning:.1} linewidths from resonance; the flat-coupling model may not hold"
        ));
    }
    fs::create_dir_all(&common.out_dir)?;
    Ok(Context {
        provenance: Provenance::new(config.hash()),
        threshold_db: config.run.threshold_db.unwrap_or(DEFAULT_THRESHOLD_DB),
        out_dir: common.out_dir.clone(),
        config,
        grid,
        params,
        scheme,
        outputs: Vec::new(),
        warnings,
    })
}

fn data_format(data: &DataArgs) -> Result<(PathBuf, DataFormat)> {
    let path = data
        .data
        .clone()
        .ok_or_else(|| Error::InvalidArgument("--data is required".into()))?;
    let format = match &data.sidecar {
        Some(s) => DataFormat::GenericCsv { sidecar: s.clone() },
        None => DataFormat::Native,
    };
    Ok((path, format))
}

fn read_target(path: &Path) -> Result<BTreeSet<(i64, i64)>> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("target: {e}")))?;
    let edges = value
        .get("edges")
        .and_then(|e| e.as_array())
        .ok_or_else(|| Error::Format("target needs an 'edges' array".into()))?;
    edges
        .iter()
        .map(|e| {
            let pair = e.as_array().filter(|p| p.len() >= 2);
            match pair.map(|p| (p[0].as_i64(), p[1].as_i64())) {
                Some((Some(a), Some(b))) => Ok((a.min(b), a.max(b))),
                _ => Err(Error::Format(format!("bad target edge {e}"))),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct FitReport<'a> {
    best_g: f64,
    best_gamma_rad_per_s: f64,
    best_gamma_hz: f64,
    distance: f64,
    ridge_ratio: f64,
    grid_best: (f64, f64, f64),
    valley: &'a crate::analysis::ValleyStats,
    valley_variance_ratio: f64,
    g_range: FitRange,
    gamma_range_rad_per_s: FitRange,
    grid_points: usize,
}

#[derive(Serialize)]
struct SearchReport<'a> {
    swept_tone_labels: Vec<i64>,
    best_phases_rad: &'a [f64],
    best_phases_deg: Vec<f64>,
    objective: usize,
    missing: &'a [(i64, i64)],
    extra: &'a [(i64, i64)],
    skipped: usize,
    labels: Vec<&'static str>,
    component_sizes: Vec<usize>,
}

#[derive(Serialize)]
struct CovarianceReport {
    vacuum_scale: f64,
    symplectic_defect: f64,
    imag_residual: f64,
    pattern_relative: f64,
    pattern: Vec<(i64, i64)>,
}

#[derive(Serialize)]
struct SampleReport {
    seed: u64,
    samples: usize,
    vacuum_scale: f64,
    max_abs_deviation: f64,
}

/// Execute a parsed command line.
pub fn run(cli: &Cli) -> Result<RunSummary> {
    let command = &cli.command;
    let mut ctx = load_context(command)?;
    match command {
        Command::Simulate { .. } => {
            let (rel, db) = ctx.simulate_db()?;
            let graph = extract_graph(&db, ctx.threshold_db);
            let report = analyze_topology(&graph);
            ctx.write("s_db.csv", db_matrix_csv(&db, &ctx.provenance))?;
            let path = ctx.out_dir.join("scattering.dat");
            write_native(&path, &rel)?;
            ctx.outputs.push(path);
            ctx.write("topology.json", topology_json(&graph, &report, &ctx.provenance))?;
            ctx.write("graph.dot", export_dot(&graph, &report))?;
        }
        Command::SweepPhase { .. } => {
            let label = ctx.config.run.sweep_tone.unwrap_or(1);
            let tone = ctx.config.tone_index(label)?;
            let steps = ctx.config.run.steps.unwrap_or(DEFAULT_STEPS);
            let signal = ctx.config.run.signal_index.unwrap_or(DEFAULT_SIGNAL);
            let r = phase_sweep(&ctx.scheme, tone, steps, signal, &ctx.grid, &ctx.params)?;
            let dropped = predicted_intermod_indices(&ctx.grid, signal, &ctx.scheme)?.dropped;
            if !dropped.is_empty() {
                ctx.warnings
                    .push(format!("predicted products off the grid: {dropped:?}"));
            }
            ctx.write("sweep.csv", sweep_csv(&r, &ctx.provenance))?;
        }
        Command::Graph { data, .. } => {
            let db = match data.data {
                Some(_) => {
                    let (path, format) = data_format(data)?;
                    let s = load_scattering(&path, &format)?;
                    match s.normalization() {
                        crate::scattering::Normalization::PumpOffRelative => DbMatrix::from_raw(&s),
                        crate::scattering::Normalization::Raw => {
                            let off = simulate(s.grid(), &ctx.params, &ctx.scheme.pump_off())?;
                            normalize_pump_off(&s, &off)?
                        }
                    }
                }
                None => ctx.simulate_db()?.1,
            };
            let graph = extract_graph(&db, ctx.threshold_db);
            let report = analyze_topology(&graph);
            ctx.write("topology.json", topology_json(&graph, &report, &ctx.provenance))?;
            ctx.write("graph.dot", export_dot(&graph, &report))?;
        }
        Command::Covariance { .. } => {
            let s = simulate(&ctx.grid, &ctx.params, &ctx.scheme)?;
            let sx = to_quadrature(&s)?;
            let vin = CovarianceMatrix::vacuum(ctx.grid.mode_count(), DEFAULT_VACUUM_SCALE)?;
            let v = propagate_covariance(&sx, &vin)?;
            let report = CovarianceReport {
                vacuum_scale: DEFAULT_VACUUM_SCALE,
                symplectic_defect: symplectic_defect(&sx),
                imag_residual: sx.imag_residual(),
                pattern_relative: DEFAULT_PATTERN_RELATIVE,
                pattern: covariance_pattern(&v, &ctx.grid, DEFAULT_PATTERN_RELATIVE),
            };
            ctx.write("covariance.csv", quadrature_csv(v.matrix(), &ctx.grid, &ctx.provenance))?;
            ctx.write("covariance.json", with_provenance(&report, &ctx.provenance))?;
        }
        Command::SampleCovariance { .. } => {
            let seed = ctx.config.run.seed.unwrap_or(0);
            let samples = ctx.config.run.samples.unwrap_or(DEFAULT_SAMPLES);
            let s = simulate(&ctx.grid, &ctx.params, &ctx.scheme)?;
            let sx = to_quadrature(&s)?;
            let vin = CovarianceMatrix::vacuum(ctx.grid.mode_count(), DEFAULT_VACUUM_SCALE)?;
            let exact = propagate_covariance(&sx, &vin)?;
            let v = sample_covariance(&sx, samples, seed)?;
            let report = SampleReport {
                seed,
                samples,
                vacuum_scale: DEFAULT_VACUUM_SCALE,
                max_abs_deviation: (v.matrix() - exact.matrix()).amax(),
            };
            ctx.write(
                "sample_covariance.csv",
                quadrature_csv(v.matrix(), &ctx.grid, &ctx.provenance),
            )?;
            ctx.write("sample_covariance.json", with_provenance(&report, &ctx.provenance))?;
        }
        Command::Fit { data, reference, points, .. } => {
            let (path, format) = data_format(data)?;
            let measured = load_scattering(&path, &format)?;
            let reference = match reference {
                Some(r) => Some(load_scattering(r, &DataFormat::Native)?),
                None => None,
            };
            let fit_data = FitData::new(&measured, reference.as_ref())?;
            let spec = ctx.config.run.fit;
            let nominal_g = ctx
                .scheme
                .tones()
                .iter()
                .map(|t| t.amplitude() / 2.0)
                .fold(0.0, f64::max);
            let gamma0 = ctx.params.port_coupling();
            let (g_range, gamma_range, grid_points) = match spec {
                Some(f) => (
                    FitRange::new(f.g_min, f.g_max)?,
                    FitRange::new(f.gamma_min.angular(), f.gamma_max.angular())?,
                    f.grid_points,
                ),
                None => (
                    FitRange::new(0.75 * nominal_g, 1.2 * nominal_g)?,
                    FitRange::new(0.8 * gamma0, 1.25 * gamma0)?,
                    DEFAULT_FIT_POINTS,
                ),
            };
            let grid_points = points.unwrap_or(grid_points);
            let r = fit_parameters(
                &fit_data,
                &ctx.scheme,
                ctx.params.resonance_frequency(),
                g_range,
                gamma_range,
                grid_points,
            )?;
            let report = FitReport {
                best_g: r.best_g,
                best_gamma_rad_per_s: r.best_gamma,
                best_gamma_hz: r.best_gamma / (2.0 * PI),
                distance: r.distance,
                ridge_ratio: r.ridge_ratio,
                grid_best: r.grid_best,
                valley: &r.valley,
                valley_variance_ratio: r.valley.ratio(),
                g_range,
                gamma_range_rad_per_s: gamma_range,
                grid_points,
            };
            ctx.write("fit.json", with_provenance(&report, &ctx.provenance))?;
            ctx.write("fit_surface.csv", fit_surface_csv(&r, &ctx.provenance))?;
        }
        Command::SearchPhases { target, tones, points, .. } => {
            let target = read_target(target)?;
            let labels: Vec<i64> = if !tones.is_empty() {
                tones.clone()
            } else if let Some(s) = &ctx.config.run.search {
                s.tones.clone()
            } else {
                vec![1]
            };
            let swept = labels
                .iter()
                .map(|&l| ctx.config.tone_index(l))
                .collect::<Result<Vec<_>>>()?;
            let points = points
                .or(ctx.config.run.search.as_ref().map(|s| s.points))
                .unwrap_or(DEFAULT_SEARCH_POINTS);
            let r = search_phases(
                &ctx.scheme,
                &swept,
                &target,
                points,
                ctx.threshold_db,
                &ctx.grid,
                &ctx.params,
            )?;
            let report = SearchReport {
                swept_tone_labels: labels,
                best_phases_rad: &r.best_phases,
                best_phases_deg: r.best_phases.iter().map(|p| p.to_degrees()).collect(),
                objective: r.objective,
                missing: &r.missing,
                extra: &r.extra,
                skipped: r.skipped,
                labels: r.report.labels.iter().map(|l| l.as_str()).collect(),
                component_sizes: r.report.component_sizes(),
            };
            ctx.write("search.json", with_provenance(&report, &ctx.provenance))?;
            ctx.write("search_topology.json", topology_json(&r.graph, &r.report, &ctx.provenance))?;
            ctx.write("search_graph.dot", export_dot(&r.graph, &r.report))?;
        }
        Command::PredictIdlers { .. } => {
            let signal = ctx.config.run.signal_index.unwrap_or(DEFAULT_SIGNAL);
            let p = predicted_intermod_indices(&ctx.grid, signal, &ctx.scheme)?;
            ctx.write("idlers.json", with_provenance(&p, &ctx.provenance))?;
        }
    }
    Ok(RunSummary {
        command: command.name(),
        config_sha256: ctx.provenance.config_sha256.clone(),
        outputs: ctx.outputs,
        warnings: ctx.warnings,
    })
}

/// Machine-readable error report for stderr.
pub fn error_json(command: Option<&str>, err: &Error) -> String {
    #[derive(Serialize)]
    struct Issue<'a> {
        line: usize,
        field: &'a str,
        message: &'a str,
    }
    #[derive(Serialize)]
    struct Report<'a> {
        command: Option<&'a str>,
        error: &'static str,
        exit_code: i32,
        message: String,
        #[serde(skip_serializing_if = "Vec::is_empty")]
        issues: Vec<Issue<'a>>,
    }
    let issues = match err {
        Error::Config(c) => c
            .0
            .iter()
            .map(|i| Issue {
                line: i.line,
                field: &i.field,
                message: &i.message,
            })
            .collect(),
        _ => Vec::new(),
    };
    serde_json::to_string(&Report {
        command,
        error: err.kind(),
        exit_code: err.exit_code(),
        message: err.to_string(),
        issues,
    })
    .expect("error report serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_flags_parse() {
        let cli = Cli::try_parse_from([
            "combscatter",
            "simulate",
            "x.cfg",
            "--phase1",
            "-90deg",
            "--phase-1",
            "1.5rad",
        ])
        .unwrap();
        let c = cli.command.common();
        assert_eq!(c.phase_plus.as_deref(), Some("-90deg"));
        assert_eq!(c.phase_minus.as_deref(), Some("1.5rad"));
    }

    #[test]
    fn repeated_tone_flags() {
        let cli = Cli::try_parse_from([
            "combscatter",
            "search-phases",
            "--config",
            "x.cfg",
            "--target",
            "t.json",
            "--tone",
            "1",
            "--tone",
            "-1",
        ])
        .unwrap();
        match cli.command {
            Command::SearchPhases { tones, .. } => assert_eq!(tones, vec![1, -1]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn error_report_is_json() {
        let text = error_json(Some("fit"), &Error::FitInfeasible);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["exit_code"], 3);
        assert_eq!(v["error"], "fit-infeasible");
    }
}
