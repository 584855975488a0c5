//! Influence kernels, their extremal bounds and the alignment forcing terms.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{FlockError, Result};
use crate::grid::{torus_distance, Field, PeriodicGrid};
use crate::quadrature::GaussLegendre;
use crate::spectral::{self, dealiased_product};

/// Image-sum truncation used for the periodized singular kernel.
pub const DEFAULT_TRUNCATION: usize = 64;

/// Radial profile `φ(r)` of a bounded kernel, `r ∈ [0, L/2]` the torus distance.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// `φ ≡ value`.
    Constant { value: f64 },
    /// `φ(r) = a + b cos(2π r / L)`.
    RaisedCosine { a: f64, b: f64 },
    /// `φ(r) = amplitude · exp(-r² / (2σ²))`.
    Gaussian { amplitude: f64, sigma: f64 },
    /// `φ(r) = amplitude · (1 + (r/scale)²)^(-decay/2)`.
    Algebraic { amplitude: f64, scale: f64, decay: f64 },
    /// Uniform samples on `[0, L/2]`, linearly interpolated.
    Tabulated { values: Vec<f64> },
}

impl Profile {
    pub fn name(&self) -> &'static str {
        match self {
            Profile::Constant { .. } => "constant",
            Profile::RaisedCosine { .. } => "raised_cosine",
            Profile::Gaussian { .. } => "gaussian",
            Profile::Algebraic { .. } => "algebraic",
            Profile::Tabulated { .. } => "tabulated",
        }
    }

    /// `φ(r)` for a distance `r ∈ [0, L/2]`.
    pub fn value(&self, r: f64, length: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::RaisedCosine { a, b } => a + b * (2.0 * PI * r / length).cos(),
            Profile::Gaussian { amplitude, sigma } => amplitude * (-r * r / (2.0 * sigma * sigma)).exp(),
            Profile::Algebraic {
                amplitude,
                scale,
                decay,
            } => amplitude * (1.0 + (r / scale).powi(2)).powf(-0.5 * decay),
            Profile::Tabulated { values } => {
                let m = values.len() - 1;
                let s = (r / (0.5 * length)).clamp(0.0, 1.0) * m as f64;
                let i = (s.floor() as usize).min(m - 1);
                let w = s - i as f64;
                (1.0 - w) * values[i] + w * values[i + 1]
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(FlockError::invalid(format!(
                    "kernel parameter {name} must be positive and finite, got {v}"
                )))
            }
        };
        match self {
            Profile::Constant { value } => positive("value", *value),
            Profile::RaisedCosine { a, b } => {
                if a.is_finite() && b.is_finite() && *a > b.abs() {
                    Ok(())
                } else {
                    Err(FlockError::invalid(format!(
                        "raised cosine needs a > |b| for positivity, got a = {a}, b = {b}"
                    )))
                }
            }
            Profile::Gaussian { amplitude, sigma } => {
                positive("amplitude", *amplitude)?;
                positive("sigma", *sigma)
            }
            Profile::Algebraic {
                amplitude,
                scale,
                decay,
            } => {
                positive("amplitude", *amplitude)?;
                positive("scale", *scale)?;
                if decay.is_finite() && *decay >= 0.0 {
                    Ok(())
                } else {
                    Err(FlockError::invalid(format!(
                        "kernel parameter decay must be non-negative, got {decay}"
                    )))
                }
            }
            Profile::Tabulated { values } => {
                if values.len() < 2 {
                    return Err(FlockError::invalid(
                        "tabulated kernel needs at least two samples",
                    ));
                }
                match values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                    Some(i) => Err(FlockError::invalid(format!(
                        "tabulated kernel must be positive, sample {i} is {}",
                        values[i]
                    ))),
                    None => Ok(()),
                }
            }
        }
    }

    /// `(min φ, max φ)` over `[0, L/2]`.
    fn bounds(&self, length: f64) -> (f64, f64) {
        let half = 0.5 * length;
        match self {
            Profile::Constant { value } => (*value, *value),
            Profile::RaisedCosine { a, b } => (a - b.abs(), a + b.abs()),
            Profile::Gaussian { amplitude, .. } | Profile::Algebraic { amplitude, .. } => {
                (self.value(half, length), *amplitude)
            }
            Profile::Tabulated { values } => (
                values.iter().copied().fold(f64::INFINITY, f64::min),
                values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
        }
    }
}

/// Variant of the alignment interaction.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelVariant {
    /// Symmetric bounded kernel, force `∫ φ (u(y) - u(x)) ρ(y) dy`.
    Bounded(Profile),
    /// Bounded kernel with the adaptive normalization `1 / (φ*ρ)(x)`.
    MotschTadmor(Profile),
    /// Periodized `|z|^{-1-α}` kernel.
    Singular { alpha: f64, truncation: usize },
}

/// A validated kernel on a periodic domain of length `L`, with cached bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    variant: KernelVariant,
    length: f64,
    iota: f64,
    sup: f64,
}

impl KernelSpec {
    pub fn new(variant: KernelVariant, length: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(FlockError::invalid(format!(
                "kernel domain length must be positive, got {length}"
            )));
        }
        let (iota, sup) = match &variant {
            KernelVariant::Bounded(p) | KernelVariant::MotschTadmor(p) => {
                p.validate()?;
                p.bounds(length)
            }
            KernelVariant::Singular { alpha, truncation } => {
                check_singular(*alpha, *truncation)?;
                let iota = periodized_kernel_with_period(*alpha, 0.5 * length, *truncation, length)?;
                (iota, f64::INFINITY)
            }
        };
        Ok(Self {
            variant,
            length,
            iota,
            sup,
        })
    }

    pub fn bounded(profile: Profile, length: f64) -> Result<Self> {
        Self::new(KernelVariant::Bounded(profile), length)
    }

    pub fn motsch_tadmor(profile: Profile, length: f64) -> Result<Self> {
        Self::new(KernelVariant::MotschTadmor(profile), length)
    }

    pub fn singular(alpha: f64, length: f64) -> Result<Self> {
        Self::new(
            KernelVariant::Singular {
                alpha,
                truncation: DEFAULT_TRUNCATION,
            },
            length,
        )
    }

    pub fn variant(&self) -> &KernelVariant {
        &self.variant
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn profile(&self) -> Option<&Profile> {
        match &self.variant {
            KernelVariant::Bounded(p) | KernelVariant::MotschTadmor(p) => Some(p),
            KernelVariant::Singular { .. } => None,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.variant {
            KernelVariant::Singular { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.alpha().is_some()
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self.variant, KernelVariant::MotschTadmor(_))
    }

    /// `ι_φ`, the minimum of the kernel over the torus.
    pub fn iota(&self) -> f64 {
        self.iota
    }

    /// `I_φ`, the maximum of the kernel (infinite for the singular kernel).
    pub fn sup(&self) -> f64 {
        self.sup
    }

    pub fn name(&self) -> String {
        match &self.variant {
            KernelVariant::Bounded(p) => format!("bounded/{}", p.name()),
            KernelVariant::MotschTadmor(p) => format!("motsch_tadmor/{}", p.name()),
            KernelVariant::Singular { alpha, .. } => format!("singular(alpha={alpha})"),
        }
    }

    /// Kernel value at the signed displacement `x`.
    pub fn value(&self, x: f64) -> Result<f64> {
        match &self.variant {
            KernelVariant::Bounded(p) | KernelVariant::MotschTadmor(p) => {
                Ok(p.value(torus_distance(x, self.length), self.length))
            }
            KernelVariant::Singular { alpha, truncation } => {
                periodized_kernel_with_period(*alpha, x, *truncation, self.length)
            }
        }
    }

    /// `∫_0^d φ(s) ds` for a bounded kernel, `0 ≤ d ≤ L`.
    pub fn integral_from_zero(&self, d: f64) -> Result<f64> {
        let p = self.bounded_profile("integral_from_zero")?;
        if !(d.is_finite() && d >= 0.0 && d <= self.length * (1.0 + 1e-12)) {
            return Err(FlockError::invalid(format!(
                "integration limit {d} outside [0, L]"
            )));
        }
        if let Profile::Constant { value } = p {
            return Ok(value * d);
        }
        let gl = GaussLegendre::new(16);
        let panels = ((d / self.length * 256.0).ceil() as usize).max(1);
        Ok(gl.integrate_panels(0.0, d, panels, |s| p.value(s, self.length)))
    }

    /// Kernel sampled at the grid displacements `x_j`.
    pub fn table(&self, grid: &PeriodicGrid) -> Result<Field> {
        self.check_grid(grid)?;
        let p = self.bounded_profile("table")?;
        Ok(Field::from_fn(*grid, |x| {
            p.value(torus_distance(x, self.length), self.length)
        }))
    }

    fn bounded_profile(&self, op: &str) -> Result<&Profile> {
        self.profile().ok_or_else(|| {
            FlockError::UnsupportedKernel(format!("{} (operation {op} needs a bounded kernel)", self.name()))
        })
    }

    fn check_grid(&self, grid: &PeriodicGrid) -> Result<()> {
        if (grid.length() - self.length).abs() <= 1e-12 * self.length {
            Ok(())
        } else {
            Err(FlockError::GridMismatch {
                left: format!("kernel period L={}", self.length),
                right: grid.describe(),
            })
        }
    }
}

fn check_singular(alpha: f64, truncation: usize) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 2.0) {
        return Err(FlockError::invalid(format!(
            "singular kernel order alpha must lie in (0, 2), got {alpha}"
        )));
    }
    if truncation < 1 {
        return Err(FlockError::invalid("image-sum truncation must be at least 1"));
    }
    Ok(())
}

/// `(ι_φ, I_φ)`; `I_φ` is infinite for the singular kernel.
pub fn kernel_bounds(kernel: &KernelSpec) -> (f64, f64) {
    (kernel.iota(), kernel.sup())
}

/// Periodized singular kernel `Σ_k |x + 2πk|^{-1-α}` on the 2π-torus.
pub fn periodized_kernel_eval(alpha: f64, x: f64, truncation: usize) -> Result<f64> {
    periodized_kernel_with_period(alpha, x, truncation, 2.0 * PI)
}

/// Periodized singular kernel with period `L`.
///
/// Explicit images `|k| ≤ truncation`, plus a midpoint Euler-Maclaurin
/// estimate of the remaining tail on each side. The argument is reduced to
/// `[0, L/2]` first, so the result is exactly even in `x`.
pub fn periodized_kernel_with_period(alpha: f64, x: f64, truncation: usize, period: f64) -> Result<f64> {
    check_singular(alpha, truncation)?;
    if !x.is_finite() {
        return Err(FlockError::invalid(format!("kernel argument must be finite, got {x}")));
    }
    let r = torus_distance(x, period);
    if r == 0.0 {
        return Err(FlockError::SingularPoint { x });
    }
    let beta = 1.0 + alpha;
    let k_max = truncation as f64;

    let tail = |y: f64| {
        y.powf(-alpha) / (period * alpha) - beta * period / 24.0 * y.powf(-beta - 1.0)
            + 7.0 / 5760.0 * beta * (beta + 1.0) * (beta + 2.0) * period.powi(3) * y.powf(-beta - 3.0)
    };
    let edge = (k_max + 0.5) * period;
    let mut sum = tail(edge + r) + tail(edge - r);
    for k in (1..=truncation).rev() {
        let shift = k as f64 * period;
        sum += (shift + r).powf(-beta) + (shift - r).powf(-beta);
    }
    Ok(sum + r.powf(-beta))
}

/// `F(x) = ∫ φ(|x-y|)(u(y) - u(x)) ρ(y) dy` in commutator form.
///
/// Bounded kernels: `φ*(ρu) - (φ*ρ)u`. Singular kernels: `L_α(ρu) - u L_α(ρ)`.
/// For the normalized variant this returns the unnormalized numerator.
pub fn commutator_force(kernel: &KernelSpec, rho: &Field, u: &Field) -> Result<Field> {
    rho.same_grid(u)?;
    PreparedKernel::new(kernel, rho.grid())?.commutator(rho, u)
}

/// `F(x) = [φ*(ρu) - (φ*ρ) u] / (φ*ρ)`, the adaptively normalized force.
pub fn mt_normalized_force(kernel: &KernelSpec, rho: &Field, u: &Field) -> Result<Field> {
    if !matches!(kernel.variant(), KernelVariant::MotschTadmor(_)) {
        return Err(FlockError::UnsupportedKernel(format!(
            "{} (normalized force needs a motsch_tadmor kernel)",
            kernel.name()
        )));
    }
    rho.same_grid(u)?;
    PreparedKernel::new(kernel, rho.grid())?.normalized(rho, u)
}

/// Per-mode factor of the smoothing operator: `L φ̂_k` for bounded kernels
/// (so that `φ*f` has coefficients `L φ̂_k f̂_k`), `-c_α |κ_k|^α` for the
/// singular kernel.
pub(crate) fn spectral_multiplier(kernel: &KernelSpec, grid: &PeriodicGrid) -> Result<Vec<Complex64>> {
    kernel.check_grid(grid)?;
    Ok(match kernel.variant() {
        KernelVariant::Singular { alpha, .. } => spectral::fractional_symbol(grid, *alpha)?
            .into_iter()
            .map(|s| Complex64::new(s, 0.0))
            .collect(),
        _ => {
            let l = grid.length();
            spectral::forward(kernel.table(grid)?.values())
                .into_iter()
                .map(|c| c * l)
                .collect()
        }
    })
}

/// A kernel bound to a grid, with its transform precomputed.
#[derive(Debug, Clone)]
pub(crate) struct PreparedKernel {
    grid: PeriodicGrid,
    multiplier: Vec<Complex64>,
    normalized: bool,
}

impl PreparedKernel {
    pub(crate) fn new(kernel: &KernelSpec, grid: &PeriodicGrid) -> Result<Self> {
        Ok(Self {
            grid: *grid,
            multiplier: spectral_multiplier(kernel, grid)?,
            normalized: matches!(kernel.variant(), KernelVariant::MotschTadmor(_)),
        })
    }

    pub(crate) fn multiplier(&self) -> &[Complex64] {
        &self.multiplier
    }

    pub(crate) fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// `φ*f` for bounded kernels, `L_α f` for the singular kernel.
    pub(crate) fn apply(&self, f: &Field) -> Field {
        let mut c = spectral::forward(f.values());
        c.iter_mut().zip(&self.multiplier).for_each(|(c, m)| *c *= m);
        Field::from_raw(self.grid, spectral::inverse(c))
    }

    pub(crate) fn commutator(&self, rho: &Field, u: &Field) -> Result<Field> {
        let flux = dealiased_product(rho, u)?;
        let smoothed = self.apply(rho);
        self.apply(&flux).sub(&dealiased_product(&smoothed, u)?)
    }

    pub(crate) fn normalized(&self, rho: &Field, u: &Field) -> Result<Field> {
        let h = self.apply(rho);
        check_normalization(h.values())?;
        let flux = self.apply(&dealiased_product(rho, u)?);
        Ok(Field::from_raw(
            self.grid,
            flux.values()
                .iter()
                .zip(h.values())
                .zip(u.values())
                .map(|((m, h), u)| m / h - u)
                .collect(),
        ))
    }
}

pub(crate) fn check_normalization(h: &[f64]) -> Result<()> {
    match h.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        Some((index, &value)) => Err(FlockError::DegenerateNormalization { index, value }),
        None => Ok(()),
    }
}
