//! Registry of initial data for the hydrodynamic system.

use std::f64::consts::PI;

use crate::error::{FlockError, Result};
use crate::grid::{Field, PeriodicGrid};

/// Profile of a localized bump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BumpShape {
    /// `exp(-ln(10⁴) (d/h)²)`: drops to `10⁻⁴` of its height at the half-width.
    Gaussian,
    /// `exp(1 - 1/(1 - (d/h)²))` for `d < h`, zero outside.
    Compact,
}

impl BumpShape {
    pub fn name(self) -> &'static str {
        match self {
            BumpShape::Gaussian => "gaussian",
            BumpShape::Compact => "compact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian" => Some(BumpShape::Gaussian),
            "compact" => Some(BumpShape::Compact),
            _ => None,
        }
    }

    /// Unit-height bump at distance `d` with half-width `h`.
    pub fn value(self, d: f64, h: f64) -> f64 {
        let s = d / h;
        match self {
            BumpShape::Gaussian => (-(1e4f64).ln() * s * s).exp(),
            BumpShape::Compact => {
                if s < 1.0 {
                    (1.0 - 1.0 / (1.0 - s * s)).exp()
                } else {
                    0.0
                }
            }
        }
    }
}

/// Initial density and velocity.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `ρ₀ = M (1 + a cos(kθ(x) + θ₀))`, `u₀ = ū + b sin(kθ(x) + ψ)` with `θ(x) = 2πx/L`.
    PerturbedConstant {
        mass: f64,
        rho_amplitude: f64,
        rho_phase: f64,
        u_mean: f64,
        u_amplitude: f64,
        u_phase: f64,
        wavenumber: u32,
    },
    /// One bump on a background level, carrying a uniform velocity.
    Bump {
        center: f64,
        half_width: f64,
        height: f64,
        background: f64,
        velocity: f64,
        shape: BumpShape,
    },
    /// Two bumps with their own velocities, blended by a Gaussian partition of
    /// unity in the chord distance `(L/π)|sin(π(x - c)/L)|`.
    TwoBump {
        centers: [f64; 2],
        half_width: f64,
        heights: [f64; 2],
        velocities: [f64; 2],
        blend_width: f64,
        shape: BumpShape,
    },
    /// Explicit samples.
    Tabulated { rho: Vec<f64>, u: Vec<f64> },
}

impl InitialData {
    pub fn name(&self) -> &'static str {
        match self {
            InitialData::PerturbedConstant { .. } => "perturbed_constant",
            InitialData::Bump { .. } => "bump",
            InitialData::TwoBump { .. } => "two_bump",
            InitialData::Tabulated { .. } => "tabulated",
        }
    }

    /// Checks parameter ranges that do not depend on the grid.
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(FlockError::invalid(format!("initial {name} must be finite")))
            }
        };
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(FlockError::invalid(format!(
                    "initial {name} must be positive, got {v}"
                )))
            }
        };
        match self {
            InitialData::PerturbedConstant {
                mass,
                rho_amplitude,
                rho_phase,
                u_mean,
                u_amplitude,
                u_phase,
                wavenumber,
            } => {
                positive("mass", *mass)?;
                if !(rho_amplitude.is_finite() && rho_amplitude.abs() <= 1.0) {
                    return Err(FlockError::invalid(format!(
                        "initial rho_amplitude must lie in [-1, 1], got {rho_amplitude}"
                    )));
                }
                finite("rho_phase", *rho_phase)?;
                finite("u_mean", *u_mean)?;
                finite("u_amplitude", *u_amplitude)?;
                finite("u_phase", *u_phase)?;
                if *wavenumber == 0 {
                    return Err(FlockError::invalid("initial wavenumber must be at least 1"));
                }
                Ok(())
            }
            InitialData::Bump {
                center,
                half_width,
                height,
                background,
                velocity,
                ..
            } => {
                finite("center", *center)?;
                positive("half_width", *half_width)?;
                positive("height", *height)?;
                if !(background.is_finite() && *background >= 0.0) {
                    return Err(FlockError::invalid(format!(
                        "initial background must be non-negative, got {background}"
                    )));
                }
                finite("velocity", *velocity)
            }
            InitialData::TwoBump {
                centers,
                half_width,
                heights,
                velocities,
                blend_width,
                ..
            } => {
                for c in centers {
                    finite("centers", *c)?;
                }
                positive("half_width", *half_width)?;
                for h in heights {
                    positive("heights", *h)?;
                }
                for v in velocities {
                    finite("velocities", *v)?;
                }
                positive("blend_width", *blend_width)
            }
            InitialData::Tabulated { rho, u } => {
                if rho.len() != u.len() {
                    return Err(FlockError::invalid(format!(
                        "tabulated rho has {} samples but u has {}",
                        rho.len(),
                        u.len()
                    )));
                }
                if rho.iter().chain(u).any(|v| !v.is_finite()) {
                    return Err(FlockError::invalid("tabulated initial data must be finite"));
                }
                if rho.iter().any(|&r| r < 0.0) {
                    return Err(FlockError::invalid("tabulated density must be non-negative"));
                }
                Ok(())
            }
        }
    }

    /// Samples `(ρ₀, u₀)` on `grid`.
    pub fn sample(&self, grid: &PeriodicGrid) -> Result<(Field, Field)> {
        self.validate()?;
        let length = grid.length();
        let dist = |x: f64, c: f64| grid.torus_distance(x, c);
        match self {
            InitialData::PerturbedConstant {
                mass,
                rho_amplitude,
                rho_phase,
                u_mean,
                u_amplitude,
                u_phase,
                wavenumber,
            } => {
                let k = *wavenumber as f64 * 2.0 * PI / length;
                let rho = Field::from_fn(*grid, |x| mass * (1.0 + rho_amplitude * (k * x + rho_phase).cos()));
                let u = Field::from_fn(*grid, |x| u_mean + u_amplitude * (k * x + u_phase).sin());
                Ok((rho, u))
            }
            InitialData::Bump {
                center,
                half_width,
                height,
                background,
                velocity,
                shape,
            } => {
                check_fits(*half_width, length)?;
                let rho = Field::from_fn(*grid, |x| {
                    background + height * shape.value(dist(x, *center), *half_width)
                });
                Ok((rho, Field::constant(*grid, *velocity)))
            }
            InitialData::TwoBump {
                centers,
                half_width,
                heights,
                velocities,
                blend_width,
                shape,
            } => {
                check_fits(*half_width, length)?;
                let rho = Field::from_fn(*grid, |x| {
                    heights[0] * shape.value(dist(x, centers[0]), *half_width)
                        + heights[1] * shape.value(dist(x, centers[1]), *half_width)
                });
                // Chord distance: smooth and periodic, unlike the torus distance,
                // whose kink at the antipode would leave a slowly decaying spectrum.
                let chord = |x: f64, c: f64| length / PI * (PI * (x - c) / length).sin().abs();
                let u = Field::from_fn(*grid, |x| {
                    let d0 = chord(x, centers[0]);
                    let d1 = chord(x, centers[1]);
                    // Weights relative to the nearer center, so they never both underflow.
                    let near = d0.min(d1);
                    let w0 = (-(d0 * d0 - near * near) / (blend_width * blend_width)).exp();
                    let w1 = (-(d1 * d1 - near * near) / (blend_width * blend_width)).exp();
                    (w0 * velocities[0] + w1 * velocities[1]) / (w0 + w1)
                });
                Ok((rho, u))
            }
            InitialData::Tabulated { rho, u } => Ok((
                Field::new(*grid, rho.clone())?,
                Field::new(*grid, u.clone())?,
            )),
        }
    }
}

fn check_fits(half_width: f64, length: f64) -> Result<()> {
    if half_width < 0.5 * length {
        Ok(())
    } else {
        Err(FlockError::invalid(format!(
            "bump half-width {half_width} does not fit on a torus of length {length}"
        )))
    }
}
