//! Alignment metrics, transported quantities, derivative norms, decay fits,
//! flocking profiles, threshold classification and the free energy.

use serde::Serialize;

use crate::dynamics::{e_from_prepared, EConvention, FieldState};
use crate::error::{FlockError, Result};
use crate::grid::{Field, PeriodicGrid};
use crate::kernels::{KernelSpec, PreparedKernel};
use crate::spectral::{self, derivative_unchecked};

/// Geometry of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Periodic data on the torus.
    Torus,
    /// Localized data on a large torus standing in for the real line.
    Line,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Torus => "torus",
            Mode::Line => "line",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "torus" => Some(Mode::Torus),
            "line" => Some(Mode::Line),
            _ => None,
        }
    }
}

/// Column order of the diagnostics CSV.
pub const CSV_COLUMNS: [&str; 15] = [
    "t",
    "M",
    "P",
    "V",
    "D",
    "min_e",
    "max_e",
    "min_rho",
    "max_rho",
    "Q",
    "sup_ux",
    "sup_uxx",
    "l2_uxxx",
    "flock_residual",
    "free_energy",
];

/// Measurements at one output time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// Averaged mass `(1/L) ∫ρ`.
    pub mass: f64,
    /// Averaged momentum `(1/L) ∫ρu`.
    pub momentum: f64,
    /// Velocity diameter.
    pub v: f64,
    /// Support diameter (line mode).
    pub d: Option<f64>,
    pub min_e: f64,
    pub max_e: f64,
    /// `∫e` under the diagnostic convention.
    pub e_integral: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    /// `max|e/ρ|` (singular kernels away from vacuum).
    pub q: Option<f64>,
    pub sup_ux: f64,
    pub sup_uxx: f64,
    pub l2_uxxx: f64,
    pub flock_residual: Option<f64>,
    /// `V + M ∫_0^D φ` with `M = ∫ρ` (line mode, bounded kernels).
    pub free_energy: Option<f64>,
}

impl DiagnosticsRecord {
    /// One CSV row in [`CSV_COLUMNS`] order; inapplicable cells are empty.
    pub fn csv_row(&self) -> String {
        let cells = [
            Some(self.t),
            Some(self.mass),
            Some(self.momentum),
            Some(self.v),
            self.d,
            Some(self.min_e),
            Some(self.max_e),
            Some(self.min_rho),
            Some(self.max_rho),
            self.q,
            Some(self.sup_ux),
            Some(self.sup_uxx),
            Some(self.l2_uxxx),
            self.flock_residual,
            self.free_energy,
        ];
        cells
            .iter()
            .map(|c| c.map(format_number).unwrap_or_default())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Fixed 17-significant-digit scientific notation, round-trip exact.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Computes [`DiagnosticsRecord`]s for states of one run.
#[derive(Debug, Clone)]
pub struct Monitor {
    kernel: KernelSpec,
    prepared: PreparedKernel,
    mode: Mode,
    support_eps: f64,
    convention: EConvention,
}

impl Monitor {
    pub fn new(
        kernel: &KernelSpec,
        grid: &PeriodicGrid,
        mode: Mode,
        support_eps: f64,
        convention: EConvention,
    ) -> Result<Self> {
        if kernel.is_singular() && convention == EConvention::Convolution {
            return Err(FlockError::UnsupportedKernel(format!(
                "{} (the convolution form of e needs a bounded kernel)",
                kernel.name()
            )));
        }
        Ok(Self {
            kernel: kernel.clone(),
            prepared: PreparedKernel::new(kernel, grid)?,
            mode,
            support_eps,
            convention,
        })
    }

    pub fn record(&self, state: &FieldState) -> Result<DiagnosticsRecord> {
        let e = e_from_prepared(state, &self.prepared, &self.kernel, self.convention)?;
        let (sup_ux, sup_uxx, l2_uxxx) = derivative_norms(state);
        let rho = state.rho();
        let (v, d, free_energy) = match self.mode {
            Mode::Torus => (velocity_diameter(state, None)?, None, None),
            Mode::Line => {
                let v = velocity_diameter(state, Some(self.support_eps))?;
                let d = support_diameter(state, self.support_eps)?;
                let fe = match self.kernel.profile() {
                    Some(_) => Some(v + rho.integral() * self.kernel.integral_from_zero(d)?),
                    None => None,
                };
                (v, Some(d), fe)
            }
        };
        let q = if self.kernel.is_singular() && rho.min() > 0.0 {
            let e_comm = e_from_prepared(state, &self.prepared, &self.kernel, EConvention::Commutator)?;
            Some(max_ratio(&e_comm, rho))
        } else {
            None
        };
        Ok(DiagnosticsRecord {
            t: state.t(),
            mass: state.mean_mass(),
            momentum: state.mean_momentum(),
            v,
            d,
            min_e: e.min(),
            max_e: e.max(),
            e_integral: e.integral(),
            min_rho: rho.min(),
            max_rho: rho.max(),
            q,
            sup_ux,
            sup_uxx,
            l2_uxxx,
            flock_residual: None,
            free_energy,
        })
    }
}

fn max_ratio(e: &Field, rho: &Field) -> f64 {
    e.values()
        .iter()
        .zip(rho.values())
        .fold(0.0, |m, (e, r)| m.max((e / r).abs()))
}

fn support_mask(rho: &Field, eps: f64) -> Result<(Vec<bool>, f64)> {
    let threshold = eps * rho.max();
    let mask: Vec<bool> = rho.values().iter().map(|&r| r > threshold).collect();
    if mask.iter().any(|&m| m) {
        Ok((mask, threshold))
    } else {
        Err(FlockError::DegenerateSupport { threshold: eps })
    }
}

/// `max u - min u` over the grid, or over `{ρ > ε max ρ}` when `support_eps` is given.
pub fn velocity_diameter(state: &FieldState, support_eps: Option<f64>) -> Result<f64> {
    // The offset cancels; working with the fluctuation keeps small diameters exact.
    let f = state.velocity_fluctuation().values();
    let (lo, hi) = match support_eps {
        None => f
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        Some(eps) => {
            let (mask, _) = support_mask(state.rho(), eps)?;
            f.iter()
                .zip(&mask)
                .filter(|(_, &m)| m)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| {
                    (lo.min(v), hi.max(v))
                })
        }
    };
    Ok(hi - lo)
}

/// Diameter of `{ρ > ε max ρ}`: `L` minus the largest empty arc, with the
/// arc ends placed at linearly interpolated threshold crossings.
pub fn support_diameter(state: &FieldState, eps: f64) -> Result<f64> {
    let rho = state.rho().values();
    let (mask, threshold) = support_mask(state.rho(), eps)?;
    let grid = state.grid();
    let n = rho.len();
    let dx = grid.dx();
    if mask.iter().all(|&m| m) {
        return Ok(grid.length());
    }
    let inside: Vec<usize> = (0..n).filter(|&j| mask[j]).collect();
    let mut widest = 0.0f64;
    for (i, &a) in inside.iter().enumerate() {
        let b = inside[(i + 1) % inside.len()];
        let cells = (b + n - a) % n;
        let cells = if cells == 0 { n } else { cells };
        if cells == 1 {
            continue;
        }
        let after = (a + 1) % n;
        let before = (b + n - 1) % n;
        let left = dx * (rho[a] - threshold) / (rho[a] - rho[after]);
        let right = dx * (rho[b] - threshold) / (rho[b] - rho[before]);
        widest = widest.max(cells as f64 * dx - left - right);
    }
    Ok(grid.length() - widest)
}

/// `V + M ∫_0^D φ` on the support `{ρ > ε max ρ}`, with `M = ∫ρ`.
pub fn free_energy(state: &FieldState, kernel: &KernelSpec, eps: f64) -> Result<f64> {
    let v = velocity_diameter(state, Some(eps))?;
    let d = support_diameter(state, eps)?;
    Ok(v + state.rho().integral() * kernel.integral_from_zero(d)?)
}

/// `(sup|u_x|, sup|u_xx|, ‖u_xxx‖₂)`.
pub fn derivative_norms(state: &FieldState) -> (f64, f64, f64) {
    let f = state.velocity_fluctuation();
    (
        derivative_unchecked(f, 1).sup_norm(),
        derivative_unchecked(f, 2).sup_norm(),
        derivative_unchecked(f, 3).l2_norm(),
    )
}

/// Least-squares fit of `log value = log C - δ t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub delta: f64,
    pub amplitude: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub samples: usize,
}

/// Minimum number of samples [`fit_decay`] accepts.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Fits an exponential to the samples with `t ∈ [t_lo, t_hi]`.
pub fn fit_decay(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    let points: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= lo && *t <= hi)
        .collect();
    if points.len() < MIN_FIT_SAMPLES {
        return Err(FlockError::InsufficientData {
            found: points.len(),
            needed: MIN_FIT_SAMPLES,
        });
    }
    if let Some(&(t, value)) = points.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(FlockError::FitDomain { t, value });
    }
    let k = points.len() as f64;
    let t_mean = points.iter().map(|p| p.0).sum::<f64>() / k;
    let y_mean = points.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, v) in &points {
        let dt = t - t_mean;
        let dy = v.ln() - y_mean;
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(FlockError::InsufficientData {
            found: 1,
            needed: MIN_FIT_SAMPLES,
        });
    }
    let slope = sty / stt;
    let intercept = y_mean - slope * t_mean;
    let r_squared = if syy > 0.0 {
        (sty * sty / (stt * syy)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(DecayFit {
        delta: -slope,
        amplitude: intercept.exp(),
        window,
        r_squared,
        samples: points.len(),
    })
}

/// Shifted-density profile and its convergence record.
#[derive(Debug, Clone, PartialEq)]
pub struct FlockingProfile {
    pub ubar: f64,
    pub rho_inf: Field,
    pub residual_series: Vec<(f64, f64)>,
}

/// Shifts each density snapshot by `t ū` and measures the sup-distance to the last one.
pub fn flocking_residual(snapshots: &[FieldState], ubar: f64) -> Result<FlockingProfile> {
    let last = snapshots
        .last()
        .ok_or_else(|| FlockError::invalid("flocking residual needs at least one snapshot"))?;
    let shift = |s: &FieldState| spectral::shift(s.rho(), s.t() * ubar);
    let rho_inf = shift(last);
    let residual_series = snapshots
        .iter()
        .map(|s| {
            let d = shift(s).sub(&rho_inf)?.sup_norm();
            Ok((s.t(), d))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FlockingProfile {
        ubar,
        rho_inf,
        residual_series,
    })
}

/// Outcome of the threshold test on initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdClass {
    pub min_e0: f64,
    pub subcritical: bool,
}

/// `min(u₀' + φ*ρ₀)` and whether it is positive.
pub fn threshold_classify(state0: &FieldState, kernel: &KernelSpec) -> Result<ThresholdClass> {
    if kernel.is_singular() {
        return Err(FlockError::UnsupportedKernel(format!(
            "{} (threshold classification needs a bounded kernel)",
            kernel.name()
        )));
    }
    let prepared = PreparedKernel::new(kernel, state0.grid())?;
    let e = e_from_prepared(state0, &prepared, kernel, EConvention::Convolution)?;
    let min_e0 = e.min();
    Ok(ThresholdClass {
        min_e0,
        subcritical: min_e0 > 0.0,
    })
}

/// `max|e/ρ|` with `e = u_x + L_φ ρ`.
pub fn q_extremum(state: &FieldState, kernel: &KernelSpec) -> Result<f64> {
    let min_rho = state.rho().min();
    if !(min_rho > 0.0) {
        return Err(FlockError::Vacuum { min_rho });
    }
    let prepared = PreparedKernel::new(kernel, state.grid())?;
    let e = e_from_prepared(state, &prepared, kernel, EConvention::Commutator)?;
    Ok(max_ratio(&e, state.rho()))
}

/// `min D u'(x) V / |u'(x)|³` over the points where `|u'| > 0.1 sup|u'|`.
pub fn enhancement_ratio(u: &Field, alpha: f64) -> Result<f64> {
    let v = u.max() - u.min();
    let du = spectral::spectral_derivative(u, 1)?;
    let peak = du.sup_norm();
    if !(v > 0.0 && peak > 0.0) {
        return Err(FlockError::Degenerate(
            "enhancement ratio needs a non-constant velocity".into(),
        ));
    }
    let table = spectral::dissipation_table(u.grid(), alpha)?;
    let mut best = f64::INFINITY;
    for (j, &s) in du.values().iter().enumerate() {
        if s.abs() > 0.1 * peak {
            let d = spectral::dissipation_with_table(&du, j, alpha, &table);
            best = best.min(d * v / s.abs().powi(3));
        }
    }
    Ok(best)
}
