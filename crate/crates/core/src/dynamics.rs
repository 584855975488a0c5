//! Right-hand side, explicit SSP time stepping and trajectory generation.
//!
//! The velocity is stored as `u = c + f` with a scalar offset `c` and a
//! zero-mean fluctuation `f`. The alignment force does not see constants,
//! so every product that would otherwise cancel `c` is formed from `f`
//! alone. This keeps the relative precision of `f` as it decays, instead
//! of flooring at the rounding level of `c`.

use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::diagnostics::{flocking_residual, Monitor, DiagnosticsRecord};
use crate::error::{FlockError, Result};
use crate::grid::{Field, PeriodicGrid};
use crate::kernels::{check_normalization, KernelSpec, PreparedKernel};
use crate::scenario::Scenario;
use crate::spectral::{self, differentiate_coeffs, forward, inverse, pad, padded_size, truncate};

/// Hydrodynamic state `(ρ, u, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    rho: Field,
    offset: f64,
    fluct: Field,
    t: f64,
}

impl FieldState {
    /// The Nyquist mode of `u` is discarded.
    pub fn new(rho: Field, u: Field, t: f64) -> Result<Self> {
        rho.same_grid(&u)?;
        if !(rho.is_finite() && u.is_finite()) {
            return Err(FlockError::invalid("state fields must be finite"));
        }
        if !t.is_finite() {
            return Err(FlockError::invalid(format!("state time must be finite, got {t}")));
        }
        let mut state = Self {
            rho,
            offset: 0.0,
            fluct: u,
            t,
        };
        state.recentre();
        Ok(state)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.rho.grid()
    }

    pub fn rho(&self) -> &Field {
        &self.rho
    }

    /// The velocity `c + f`.
    pub fn u(&self) -> Field {
        self.fluct.map(|f| self.offset + f)
    }

    /// The scalar part `c` of the velocity.
    pub fn velocity_offset(&self) -> f64 {
        self.offset
    }

    /// The zero-mean part `f` of the velocity.
    pub fn velocity_fluctuation(&self) -> &Field {
        &self.fluct
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Averaged mass `(1/L) ∫ρ`.
    pub fn mean_mass(&self) -> f64 {
        self.rho.mean()
    }

    /// Averaged momentum `(1/L) ∫ρu`.
    pub fn mean_momentum(&self) -> f64 {
        let rf: f64 = self
            .rho
            .values()
            .iter()
            .zip(self.fluct.values())
            .map(|(r, f)| r * f)
            .sum::<f64>()
            / self.rho.len() as f64;
        self.offset * self.rho.mean() + rf
    }

    /// The state translated by whole grid cells: `out(x_j) = self(x_{j+cells})`.
    pub fn roll(&self, cells: isize) -> FieldState {
        FieldState {
            rho: self.rho.roll(cells),
            offset: self.offset,
            fluct: self.fluct.roll(cells),
            t: self.t,
        }
    }

    fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.fluct.is_finite() && self.offset.is_finite()
    }

    /// Moves the mean of `f` into `c` and drops the Nyquist mode of `f`,
    /// which no dealiased tendency can reach and which would otherwise
    /// persist at rounding level.
    fn recentre(&mut self) {
        let n = self.fluct.len() as f64;
        let (mut m, mut nyq) = (0.0, 0.0);
        for (j, f) in self.fluct.values().iter().enumerate() {
            m += f;
            nyq += if j % 2 == 0 { *f } else { -*f };
        }
        let (m, nyq) = (m / n, nyq / n);
        for (j, f) in self.fluct.values_mut().iter_mut().enumerate() {
            *f -= m + if j % 2 == 0 { nyq } else { -nyq };
        }
        self.offset += m;
    }
}

/// Time step limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub cfl_advective: f64,
    pub cfl_dissipative: f64,
    pub dt_max: f64,
    pub t_end: f64,
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("cfl_advective", self.cfl_advective),
            ("cfl_dissipative", self.cfl_dissipative),
            ("dt_max", self.dt_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(FlockError::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(FlockError::invalid(format!(
                "t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        Ok(())
    }
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            cfl_advective: 0.5,
            cfl_dissipative: 0.4,
            dt_max: 0.01,
            t_end: 1.0,
        }
    }
}

/// Which quantity is called `e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EConvention {
    /// `e = u_x + L_φ ρ` with the zero-mean operator `L_φ ρ = φ*ρ - (∫φ)ρ`
    /// (the fractional Laplacian for the singular kernel).
    Commutator,
    /// `e = u_x + φ*ρ`, bounded kernels only.
    Convolution,
}

impl EConvention {
    pub fn name(self) -> &'static str {
        match self {
            EConvention::Commutator => "commutator",
            EConvention::Convolution => "convolution",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "commutator" => Some(EConvention::Commutator),
            "convolution" => Some(EConvention::Convolution),
            _ => None,
        }
    }

    /// The convention that drives diagnostics for `kernel`.
    pub fn default_for(kernel: &KernelSpec) -> Self {
        if kernel.is_singular() {
            EConvention::Commutator
        } else {
            EConvention::Convolution
        }
    }
}

/// `e = u_x + L_φ ρ`.
pub fn compute_e(state: &FieldState, kernel: &KernelSpec) -> Result<Field> {
    compute_e_with(state, kernel, EConvention::Commutator)
}

/// `e` under an explicit convention.
pub fn compute_e_with(state: &FieldState, kernel: &KernelSpec, convention: EConvention) -> Result<Field> {
    let prepared = PreparedKernel::new(kernel, state.grid())?;
    e_from_prepared(state, &prepared, kernel, convention)
}

pub(crate) fn e_from_prepared(
    state: &FieldState,
    prepared: &PreparedKernel,
    kernel: &KernelSpec,
    convention: EConvention,
) -> Result<Field> {
    let ux = spectral::derivative_unchecked(&state.fluct, 1);
    let smoothed = prepared.apply(&state.rho);
    let l_rho = match (kernel.is_singular(), convention) {
        (true, EConvention::Commutator) => smoothed,
        (true, EConvention::Convolution) => {
            return Err(FlockError::UnsupportedKernel(format!(
                "{} (the convolution form of e needs a bounded kernel)",
                kernel.name()
            )))
        }
        (false, EConvention::Convolution) => smoothed,
        (false, EConvention::Commutator) => {
            // Discrete ∫φ is the zero mode of the multiplier.
            let total = prepared.multiplier()[0].re;
            smoothed.zip_with(&state.rho, |h, r| h - total * r)?
        }
    };
    ux.add(&l_rho)
}

/// Blow-up classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowUpReason {
    /// A field became NaN or infinite.
    NonFinite,
    /// `sup|u_x|` exceeded the configured multiple of its initial value.
    GradientGrowth,
    /// Density dropped below `-1e-10` in a bounded-kernel run.
    DensityUndershoot,
    /// Density dropped below the vacuum floor in a singular-kernel run.
    Vacuum,
}

/// Blow-up signal: the time, the reason and the offending value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowUp {
    pub t: f64,
    pub reason: BlowUpReason,
    pub value: f64,
}

/// Result of one step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Advanced(FieldState),
    BlowUp(BlowUp),
}

/// Density undershoot tolerated in bounded-kernel runs.
pub const DENSITY_UNDERSHOOT: f64 = -1e-10;

/// A kernel bound to a grid together with the scratch sizes of the RHS.
#[derive(Debug, Clone)]
pub struct Stepper {
    kernel: KernelSpec,
    grid: PeriodicGrid,
    prepared: PreparedKernel,
    dissipative: Option<(f64, f64)>,
}

impl Stepper {
    pub fn new(kernel: &KernelSpec, grid: &PeriodicGrid) -> Result<Self> {
        let prepared = PreparedKernel::new(kernel, grid)?;
        let dissipative = match kernel.alpha() {
            Some(alpha) => Some((alpha, spectral::fractional_constant(alpha)?)),
            None => None,
        };
        Ok(Self {
            kernel: kernel.clone(),
            grid: *grid,
            prepared,
            dissipative,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    fn check_state(&self, state: &FieldState) -> Result<()> {
        if *state.grid() == self.grid {
            Ok(())
        } else {
            Err(FlockError::GridMismatch {
                left: self.grid.describe(),
                right: state.grid().describe(),
            })
        }
    }

    /// `(dρ/dt, du/dt)` for the state.
    pub fn rhs(&self, state: &FieldState) -> Result<(Field, Field)> {
        self.check_state(state)?;
        let (drho, du) = self.tendency(state.rho.values(), state.offset, state.fluct.values())?;
        Ok((Field::from_raw(self.grid, drho), Field::from_raw(self.grid, du)))
    }

    /// Largest step allowed by the advective and (singular only) dissipative limits.
    pub fn stable_dt(&self, state: &FieldState, ctl: &StepControl) -> f64 {
        let dx = self.grid.dx();
        let umax = state
            .fluct
            .values()
            .iter()
            .fold(0.0f64, |m, f| m.max((state.offset + f).abs()));
        let mut dt = ctl.dt_max.min(ctl.cfl_advective * dx / (umax + 1e-12));
        if let Some((alpha, c_alpha)) = self.dissipative {
            let rho_max = state.rho.max().max(f64::MIN_POSITIVE);
            dt = dt.min(ctl.cfl_dissipative * dx.powf(alpha) / (c_alpha * rho_max));
        }
        dt
    }

    /// One SSP-RK3 step (Shu-Osher form).
    pub fn step(&self, state: &FieldState, dt: f64) -> Result<StepOutcome> {
        self.check_state(state)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(FlockError::invalid(format!("time step must be positive, got {dt}")));
        }
        let c = state.offset;
        let r0 = state.rho.values();
        let f0 = state.fluct.values();

        let (dr, df) = self.tendency(r0, c, f0)?;
        let r1 = axpy(r0, dt, &dr);
        let f1 = axpy(f0, dt, &df);

        let (dr, df) = self.tendency(&r1, c, &f1)?;
        let r2: Vec<f64> = (0..r0.len())
            .map(|j| 0.75 * r0[j] + 0.25 * (r1[j] + dt * dr[j]))
            .collect();
        let f2: Vec<f64> = (0..f0.len())
            .map(|j| 0.75 * f0[j] + 0.25 * (f1[j] + dt * df[j]))
            .collect();

        let (dr, df) = self.tendency(&r2, c, &f2)?;
        let third = 1.0 / 3.0;
        let r3: Vec<f64> = (0..r0.len())
            .map(|j| third * r0[j] + 2.0 * third * (r2[j] + dt * dr[j]))
            .collect();
        let f3: Vec<f64> = (0..f0.len())
            .map(|j| third * f0[j] + 2.0 * third * (f2[j] + dt * df[j]))
            .collect();

        let mut next = FieldState {
            rho: Field::from_raw(self.grid, r3),
            offset: c,
            fluct: Field::from_raw(self.grid, f3),
            t: state.t + dt,
        };
        if !next.is_finite() {
            return Ok(StepOutcome::BlowUp(BlowUp {
                t: next.t,
                reason: BlowUpReason::NonFinite,
                value: f64::INFINITY,
            }));
        }
        next.recentre();
        Ok(StepOutcome::Advanced(next))
    }

    /// Tendencies of `ρ` and of the fluctuation `f` at fixed offset `c`.
    fn tendency(&self, rho: &[f64], c: f64, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let grid = &self.grid;
        let n = grid.n();
        let m = padded_size(n);
        let mult = self.prepared.multiplier();

        let rho_hat = forward(rho);
        let f_hat = forward(f);
        let mut fx_hat = f_hat.clone();
        differentiate_coeffs(grid, &mut fx_hat, 1);

        let rho_p = inverse(pad(&rho_hat, m));
        let f_p = inverse(pad(&f_hat, m));
        let fx_p = inverse(pad(&fx_hat, m));
        let rf_hat = truncate(&forward(&product(&rho_p, &f_p)), n);
        let ffx_hat = truncate(&forward(&product(&f_p, &fx_p)), n);

        // ρ_t = -(cρ + ρf)_x
        let mut drho_hat: Vec<Complex64> = rho_hat.iter().zip(&rf_hat).map(|(r, rf)| c * r + rf).collect();
        differentiate_coeffs(grid, &mut drho_hat, 1);
        drho_hat.iter_mut().for_each(|v| *v = -*v);

        // f_t = -(c f_x + f f_x) + F
        let mut du_hat: Vec<Complex64> = fx_hat.iter().zip(&ffx_hat).map(|(fx, ffx)| -(c * fx + ffx)).collect();
        let h_hat: Vec<Complex64> = rho_hat.iter().zip(mult).map(|(r, k)| r * k).collect();
        let mrf_hat: Vec<Complex64> = rf_hat.iter().zip(mult).map(|(r, k)| r * k).collect();

        let du = if self.prepared.is_normalized() {
            let h = inverse(h_hat);
            check_normalization(&h)?;
            let num = inverse(mrf_hat);
            let adv = inverse(du_hat);
            (0..n).map(|j| adv[j] + num[j] / h[j] - f[j]).collect()
        } else {
            let h_p = inverse(pad(&h_hat, m));
            let hf_hat = truncate(&forward(&product(&h_p, &f_p)), n);
            for j in 0..n {
                du_hat[j] += mrf_hat[j] - hf_hat[j];
            }
            inverse(du_hat)
        };
        Ok((inverse(drho_hat), du))
    }

    /// `sup|u_x|` of a state.
    pub fn sup_ux(&self, state: &FieldState) -> f64 {
        spectral::derivative_unchecked(&state.fluct, 1).sup_norm()
    }
}

fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(x, y)| x + a * y).collect()
}

fn product(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(a, b)| a * b).collect()
}

/// `(dρ/dt, du/dt)`.
pub fn rhs(state: &FieldState, kernel: &KernelSpec) -> Result<(Field, Field)> {
    Stepper::new(kernel, state.grid())?.rhs(state)
}

/// `min(dt_max, cfl_adv Δx / (max|u| + ε), cfl_diss Δx^α / (c_α max ρ))`.
pub fn stable_dt(state: &FieldState, kernel: &KernelSpec, ctl: &StepControl) -> Result<f64> {
    Ok(Stepper::new(kernel, state.grid())?.stable_dt(state, ctl))
}

/// One SSP-RK3 step.
pub fn step(state: &FieldState, kernel: &KernelSpec, dt: f64) -> Result<StepOutcome> {
    Stepper::new(kernel, state.grid())?.step(state, dt)
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Completed,
    BlowUp(BlowUp),
}

/// Output of [`run`]: snapshots and diagnostics at the output cadence.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<FieldState>,
    pub records: Vec<DiagnosticsRecord>,
    pub termination: Termination,
    pub steps: usize,
    /// Limit velocity `P₀ / M₀`.
    pub ubar: f64,
}

impl Trajectory {
    pub fn initial(&self) -> &FieldState {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &FieldState {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    pub fn blow_up(&self) -> Option<BlowUp> {
        match self.termination {
            Termination::BlowUp(b) => Some(b),
            Termination::Completed => None,
        }
    }

    /// `(t, value)` pairs of one diagnostic column.
    pub fn series(&self, column: impl Fn(&DiagnosticsRecord) -> Option<f64>) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .filter_map(|r| column(r).map(|v| (r.t, v)))
            .collect()
    }
}

/// Integrates a scenario to `t_end` or to blow-up.
pub fn run(scenario: &Scenario) -> Result<Trajectory> {
    let grid = scenario.grid()?;
    let kernel = scenario.kernel()?;
    let (rho0, u0) = scenario.initial.sample(&grid)?;
    let mut state = FieldState::new(rho0, u0, 0.0)?;
    let stepper = Stepper::new(&kernel, &grid)?;
    let monitor = Monitor::new(
        &kernel,
        &grid,
        scenario.mode,
        scenario.output.support_eps,
        scenario.e_convention(&kernel),
    )?;
    let ctl = scenario.step;
    let out = &scenario.output;
    let ubar = state.mean_momentum() / state.mean_mass();

    let mut snapshots = vec![state.clone()];
    let mut records = vec![monitor.record(&state)?];
    let gradient_limit = out.blowup_factor * stepper.sup_ux(&state).max(1e-12);
    let mut steps = 0usize;
    let mut termination = Termination::Completed;

    let outputs = if ctl.t_end > 0.0 {
        (ctl.t_end / out.cadence - 1e-9).ceil().max(1.0) as usize
    } else {
        0
    };
    'outer: for k in 1..=outputs {
        let t_next = (k as f64 * out.cadence).min(ctl.t_end);
        while state.t < t_next {
            let mut dt = stepper.stable_dt(&state, &ctl);
            let remaining = t_next - state.t;
            let last = dt >= remaining * (1.0 - 1e-9);
            if last {
                dt = remaining;
            }
            let mut next = match stepper.step(&state, dt)? {
                StepOutcome::Advanced(s) => s,
                StepOutcome::BlowUp(b) => {
                    termination = Termination::BlowUp(b);
                    break 'outer;
                }
            };
            steps += 1;
            if last {
                next.t = t_next;
            }
            if let Some(b) = check_blow_up(&stepper, &next, gradient_limit, out.rho_floor) {
                termination = Termination::BlowUp(b);
                break 'outer;
            }
            state = next;
        }
        records.push(monitor.record(&state)?);
        snapshots.push(state.clone());
    }

    if termination == Termination::Completed {
        let profile = flocking_residual(&snapshots, ubar)?;
        for (r, (_, res)) in records.iter_mut().zip(&profile.residual_series) {
            r.flock_residual = Some(*res);
        }
    }
    Ok(Trajectory {
        snapshots,
        records,
        termination,
        steps,
        ubar,
    })
}

fn check_blow_up(stepper: &Stepper, state: &FieldState, gradient_limit: f64, rho_floor: f64) -> Option<BlowUp> {
    let min_rho = state.rho.min();
    if stepper.kernel.is_singular() {
        if min_rho < rho_floor {
            return Some(BlowUp {
                t: state.t,
                reason: BlowUpReason::Vacuum,
                value: min_rho,
            });
        }
    } else if min_rho < DENSITY_UNDERSHOOT {
        return Some(BlowUp {
            t: state.t,
            reason: BlowUpReason::DensityUndershoot,
            value: min_rho,
        });
    }
    let grad = stepper.sup_ux(state);
    if grad > gradient_limit {
        return Some(BlowUp {
            t: state.t,
            reason: BlowUpReason::GradientGrowth,
            value: grad,
        });
    }
    None
}
