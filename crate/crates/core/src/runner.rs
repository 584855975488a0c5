//! Run orchestration and file output.
//!
//! A run writes into its output directory:
//!
//! - `diagnostics.csv`: one row per output time, columns [`CSV_COLUMNS`].
//! - `snapshots.csv`: `t,x,rho,u,e_commutator,e_convolution` (when enabled).
//! - `final_state.csv`: `x,rho,u` at the last recorded time.
//! - `summary.json`: decay fits, threshold class, conservation residuals, blow-up info.
//! - `agents.csv`: `t,i,x,v` (when the scenario has an `[agents]` section).
//!
//! The directory is `output.directory`, or the value of [`OUTPUT_DIR_ENV`] when set.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::agents::{empirical_moments, run_agents, AgentState};
use crate::diagnostics::{fit_decay, format_number, threshold_classify, DecayFit, DiagnosticsRecord, ThresholdClass, CSV_COLUMNS};
use crate::dynamics::{self, e_from_prepared, BlowUp, EConvention, FieldState, Trajectory};
use crate::error::{FlockError, Result};
use crate::grid::Field;
use crate::kernels::{KernelSpec, PreparedKernel};
use crate::scenario::{Scenario, OUTPUT_DIR_ENV};

/// Version of the `summary.json` layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Exit status for a run that finished cleanly.
pub const EXIT_OK: i32 = 0;
/// Exit status for a run stopped by the blow-up detector.
pub const EXIT_BLOW_UP: i32 = 2;
/// Exit status for configuration and runtime errors.
pub const EXIT_ERROR: i32 = 1;

/// Series that receive an exponential fit, keyed as in `summary.json`.
pub const FIT_SERIES: [&str; 5] = ["V", "sup_ux", "sup_uxx", "l2_uxxx", "flock_residual"];

/// A fit or the reason it could not be made.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum FitOutcome {
    Fit(DecayFit),
    Failed { error: String },
}

impl FitOutcome {
    pub fn fit(&self) -> Option<&DecayFit> {
        match self {
            FitOutcome::Fit(f) => Some(f),
            FitOutcome::Failed { .. } => None,
        }
    }
}

impl From<Result<DecayFit>> for FitOutcome {
    fn from(r: Result<DecayFit>) -> Self {
        match r {
            Ok(f) => FitOutcome::Fit(f),
            Err(e) => FitOutcome::Failed { error: e.to_string() },
        }
    }
}

/// Drift of the conserved quantities between the first and last record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Conservation {
    /// `|ΔM| / M`.
    pub mass_relative: f64,
    /// `|ΔP|`.
    pub momentum_absolute: f64,
    /// `|Δ∫e|`.
    pub e_integral_absolute: f64,
    /// `|Δ∫e| / |∫e₀|`, absent when `∫e₀` vanishes to rounding.
    pub e_integral_relative: Option<f64>,
}

/// Particle cross-check results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentSummary {
    pub count: usize,
    pub seed: u64,
    pub normalization: &'static str,
    pub total_mass: Option<f64>,
    pub t_final: f64,
    pub velocity_diameter: f64,
    pub mean_velocity: f64,
    pub velocity_fit: FitOutcome,
    /// `∫|M ρ_emp - ρ|` against the hydrodynamic density at the same time.
    pub density_l1_error: Option<f64>,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub name: String,
    pub kernel: String,
    pub mode: &'static str,
    pub n: usize,
    pub length: f64,
    pub status: &'static str,
    pub exit_code: i32,
    pub blow_up: Option<BlowUp>,
    pub t_final: f64,
    pub steps: usize,
    pub ubar: f64,
    pub e_convention: &'static str,
    pub threshold: Option<ThresholdClass>,
    pub conservation: Conservation,
    pub fits: BTreeMap<String, FitOutcome>,
    pub initial: DiagnosticsRecord,
    pub last: DiagnosticsRecord,
    pub agents: Option<AgentSummary>,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub directory: PathBuf,
    pub trajectory: Trajectory,
    pub agents: Option<Vec<AgentState>>,
    pub summary: RunSummary,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        self.summary.exit_code
    }
}

/// Output directory after applying the environment override.
pub fn output_directory(scenario: &Scenario) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(&scenario.output.directory),
    }
}

/// Runs a scenario without writing anything.
pub fn execute(scenario: &Scenario) -> Result<(Trajectory, Option<Vec<AgentState>>, RunSummary)> {
    let trajectory = dynamics::run(scenario)?;
    let agents = match &scenario.agents {
        Some(cfg) => {
            let kernel = scenario.kernel()?;
            let initial = trajectory.initial();
            let state = AgentState::sample(initial.rho(), &initial.u(), cfg.count, cfg.seed)?;
            let normalization = scenario
                .agent_normalization(initial.rho().integral())
                .expect("agents configured");
            Some(run_agents(
                &state,
                &kernel,
                normalization,
                cfg.dt,
                scenario.step.t_end,
                scenario.output.cadence,
            )?)
        }
        None => None,
    };
    let summary = summarize(scenario, &trajectory, agents.as_deref())?;
    Ok((trajectory, agents, summary))
}

/// Runs a scenario and writes its output files to `directory`.
pub fn run_scenario_in(scenario: &Scenario, directory: &Path) -> Result<RunReport> {
    let (trajectory, agents, summary) = execute(scenario)?;
    fs::create_dir_all(directory).map_err(|e| FlockError::io(directory, e))?;
    write_diagnostics(&directory.join("diagnostics.csv"), &trajectory.records)?;
    if scenario.output.snapshots {
        write_snapshots(&directory.join("snapshots.csv"), scenario, &trajectory.snapshots)?;
    }
    write_final_state(&directory.join("final_state.csv"), trajectory.last())?;
    if let Some(a) = &agents {
        write_agents(&directory.join("agents.csv"), a)?;
    }
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    let path = directory.join("summary.json");
    fs::write(&path, json + "\n").map_err(|e| FlockError::io(&path, e))?;
    Ok(RunReport {
        directory: directory.to_path_buf(),
        trajectory,
        agents,
        summary,
    })
}

/// Runs a scenario and writes into [`output_directory`].
pub fn run_scenario(scenario: &Scenario) -> Result<RunReport> {
    run_scenario_in(scenario, &output_directory(scenario))
}

/// Builds the run summary from a finished trajectory.
pub fn summarize(scenario: &Scenario, trajectory: &Trajectory, agents: Option<&[AgentState]>) -> Result<RunSummary> {
    let kernel = scenario.kernel()?;
    let first = trajectory.records.first().expect("initial record").clone();
    let last = trajectory.records.last().expect("initial record").clone();
    let blow_up = trajectory.blow_up();

    let window = scenario.fit_window();
    let mut fits = BTreeMap::new();
    let columns: [(&str, fn(&DiagnosticsRecord) -> Option<f64>); 4] = [
        ("V", |r| Some(r.v)),
        ("sup_ux", |r| Some(r.sup_ux)),
        ("sup_uxx", |r| Some(r.sup_uxx)),
        ("l2_uxxx", |r| Some(r.l2_uxxx)),
    ];
    for (name, column) in columns {
        fits.insert(name.to_string(), fit_decay(&trajectory.series(column), window).into());
    }
    fits.insert(
        "flock_residual".to_string(),
        residual_fit(trajectory, scenario.residual_window()).into(),
    );

    let threshold = if kernel.is_singular() {
        None
    } else {
        Some(threshold_classify(trajectory.initial(), &kernel)?)
    };

    let e0 = first.e_integral;
    let e_scale = scenario.length * first.min_e.abs().max(first.max_e.abs());
    let conservation = Conservation {
        mass_relative: ((last.mass - first.mass) / first.mass).abs(),
        momentum_absolute: (last.momentum - first.momentum).abs(),
        e_integral_absolute: (last.e_integral - e0).abs(),
        e_integral_relative: (e0.abs() > 1e-10 * e_scale).then(|| ((last.e_integral - e0) / e0).abs()),
    };

    let agents = match (agents, &scenario.agents) {
        (Some(states), Some(cfg)) => Some(agent_summary(scenario, trajectory, states, cfg.mollifier_width)?),
        _ => None,
    };

    let exit_code = if blow_up.is_some() { EXIT_BLOW_UP } else { EXIT_OK };
    Ok(RunSummary {
        schema_version: SCHEMA_VERSION,
        name: scenario.name.clone(),
        kernel: kernel.name(),
        mode: scenario.mode.name(),
        n: scenario.n,
        length: scenario.length,
        status: if blow_up.is_some() { "blow_up" } else { "completed" },
        exit_code,
        blow_up,
        t_final: last.t,
        steps: trajectory.steps,
        ubar: trajectory.ubar,
        e_convention: scenario.e_convention(&kernel).name(),
        threshold,
        conservation,
        fits,
        initial: first,
        last,
        agents,
    })
}

/// Fit of the flocking residual, leaving out the final snapshot, which is
/// the reference profile itself and has residual zero.
pub fn residual_fit(trajectory: &Trajectory, window: (f64, f64)) -> Result<DecayFit> {
    let mut series = trajectory.series(|r| r.flock_residual);
    series.pop();
    fit_decay(&series, window)
}

fn agent_summary(scenario: &Scenario, trajectory: &Trajectory, states: &[AgentState], width: f64) -> Result<AgentSummary> {
    let cfg = scenario.agents.as_ref().expect("agents configured");
    let last = states.last().expect("initial agent state");
    let series: Vec<(f64, f64)> = states.iter().map(|s| (s.t(), s.velocity_diameter())).collect();
    let hydro = trajectory.last();
    let density_l1_error = if (hydro.t() - last.t()).abs() <= 1e-12 * last.t().max(1.0) {
        Some(density_l1_error(last, hydro, width)?)
    } else {
        None
    };
    Ok(AgentSummary {
        count: cfg.count,
        seed: cfg.seed,
        normalization: if cfg.adaptive { "adaptive" } else { "mean" },
        total_mass: cfg.total_mass,
        t_final: last.t(),
        velocity_diameter: last.velocity_diameter(),
        mean_velocity: last.mean_velocity(),
        velocity_fit: fit_decay(&series, scenario.fit_window()).into(),
        density_l1_error,
    })
}

/// `∫|M̄ ρ_emp - ρ|`, where `M̄` is the averaged hydrodynamic mass.
pub fn density_l1_error(agents: &AgentState, hydro: &FieldState, mollifier_width: f64) -> Result<f64> {
    let (rho_emp, _) = empirical_moments(agents, hydro.grid(), mollifier_width)?;
    let diff = rho_emp.scaled(hydro.mean_mass()).sub(hydro.rho())?;
    Ok(diff.map(f64::abs).integral())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| FlockError::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| FlockError::io(path, e))
}

/// Writes `diagnostics.csv`.
pub fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| FlockError::io(path, e);
    writeln!(w, "{}", CSV_COLUMNS.join(",")).map_err(io)?;
    for r in records {
        writeln!(w, "{}", r.csv_row()).map_err(io)?;
    }
    finish(path, w)
}

/// Writes the field snapshots in long format.
pub fn write_snapshots(path: &Path, scenario: &Scenario, snapshots: &[FieldState]) -> Result<()> {
    let kernel = scenario.kernel()?;
    let grid = scenario.grid()?;
    let prepared = PreparedKernel::new(&kernel, &grid)?;
    let mut w = create(path)?;
    let io = |e| FlockError::io(path, e);
    writeln!(w, "t,x,rho,u,e_commutator,e_convolution").map_err(io)?;
    for s in snapshots {
        let u = s.u();
        let e_comm = e_from_prepared(s, &prepared, &kernel, EConvention::Commutator)?;
        let e_conv = convolution_e(s, &prepared, &kernel)?;
        let t = format_number(s.t());
        for j in 0..grid.n() {
            let conv = e_conv.as_ref().map(|e| format_number(e.values()[j])).unwrap_or_default();
            writeln!(
                w,
                "{t},{},{},{},{},{conv}",
                format_number(grid.x(j)),
                format_number(s.rho().values()[j]),
                format_number(u.values()[j]),
                format_number(e_comm.values()[j]),
            )
            .map_err(io)?;
        }
    }
    finish(path, w)
}

fn convolution_e(state: &FieldState, prepared: &PreparedKernel, kernel: &KernelSpec) -> Result<Option<Field>> {
    if kernel.is_singular() {
        Ok(None)
    } else {
        e_from_prepared(state, prepared, kernel, EConvention::Convolution).map(Some)
    }
}

/// Writes `x,rho,u` for one state.
pub fn write_final_state(path: &Path, state: &FieldState) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| FlockError::io(path, e);
    writeln!(w, "x,rho,u").map_err(io)?;
    let u = state.u();
    for j in 0..state.grid().n() {
        writeln!(
            w,
            "{},{},{}",
            format_number(state.grid().x(j)),
            format_number(state.rho().values()[j]),
            format_number(u.values()[j])
        )
        .map_err(io)?;
    }
    finish(path, w)
}

/// Writes agent trajectories as `t,i,x,v` rows.
pub fn write_agents(path: &Path, states: &[AgentState]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| FlockError::io(path, e);
    writeln!(w, "t,i,x,v").map_err(io)?;
    for s in states {
        let t = format_number(s.t());
        for (i, (x, v)) in s.x().iter().zip(s.v()).enumerate() {
            writeln!(w, "{t},{i},{},{}", format_number(*x), format_number(*v)).map_err(io)?;
        }
    }
    finish(path, w)
}

/// One row of a sweep aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub summary: RunSummary,
}

impl SweepRow {
    pub fn header() -> String {
        let mut cols = vec!["value".to_string(), "exit_code".into(), "t_final".into(), "blow_up_t".into()];
        for s in FIT_SERIES {
            cols.push(format!("delta_{s}"));
            cols.push(format!("r2_{s}"));
        }
        cols.extend(
            ["mass_residual", "momentum_residual", "e_integral_residual", "min_e0"]
                .iter()
                .map(|s| s.to_string()),
        );
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let s = &self.summary;
        let opt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
        let mut cells = vec![
            format_number(self.value),
            s.exit_code.to_string(),
            format_number(s.t_final),
            opt(s.blow_up.map(|b| b.t)),
        ];
        for name in FIT_SERIES {
            let fit = s.fits.get(name).and_then(FitOutcome::fit);
            cells.push(opt(fit.map(|f| f.delta)));
            cells.push(opt(fit.map(|f| f.r_squared)));
        }
        cells.push(format_number(s.conservation.mass_relative));
        cells.push(format_number(s.conservation.momentum_absolute));
        cells.push(opt(s.conservation.e_integral_relative));
        cells.push(opt(s.threshold.map(|t| t.min_e0)));
        cells.join(",")
    }

    /// Fitted rate of one series, if the fit succeeded.
    pub fn delta(&self, series: &str) -> Option<f64> {
        self.summary.fits.get(series).and_then(FitOutcome::fit).map(|f| f.delta)
    }
}

/// Result of a parameter sweep.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub axis: String,
    pub rows: Vec<SweepRow>,
    pub aggregate: PathBuf,
}

/// Directory name used for one sweep member.
fn member_dir(base: &Path, axis: &str, value: f64) -> PathBuf {
    base.join(format!("{axis}={value}"))
}

/// Runs `template` once per value of `axis`, each in its own
/// subdirectory, and writes `sweep_<axis>.csv` with rows ordered by value.
pub fn run_sweep(template: &Scenario, axis: &str, values: &[f64]) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(FlockError::invalid("a sweep needs at least one value"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let scenarios = sorted
        .iter()
        .map(|&v| template.with_override(axis, v).map(|s| (v, s)))
        .collect::<Result<Vec<_>>>()?;
    let base = output_directory(template);
    let mut rows = Vec::with_capacity(scenarios.len());
    for (value, scenario) in &scenarios {
        let report = run_scenario_in(scenario, &member_dir(&base, axis, *value))?;
        rows.push(SweepRow {
            value: *value,
            summary: report.summary,
        });
    }
    fs::create_dir_all(&base).map_err(|e| FlockError::io(&base, e))?;
    let aggregate = base.join(format!("sweep_{}.csv", axis.replace('.', "_")));
    let mut w = create(&aggregate)?;
    let io = |e| FlockError::io(&aggregate, e);
    writeln!(w, "{}", SweepRow::header()).map_err(io)?;
    for r in &rows {
        writeln!(w, "{}", r.csv_row()).map_err(io)?;
    }
    finish(&aggregate, w)?;
    Ok(SweepReport {
        axis: axis.to_string(),
        rows,
        aggregate,
    })
}
