//! Uniform periodic grids and the real-valued grid functions that live on them.

use std::f64::consts::PI;

use crate::error::{FlockError, Result};

/// Smallest grid the spectral operators accept.
pub const MIN_POINTS: usize = 16;

/// Uniform periodic sample grid `x_j = L j / n`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    n: usize,
    length: f64,
}

impl PeriodicGrid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < MIN_POINTS || n % 2 != 0 {
            return Err(FlockError::invalid(format!(
                "grid size must be even and at least {MIN_POINTS}, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(FlockError::invalid(format!(
                "domain length must be positive and finite, got {length}"
            )));
        }
        Ok(Self { n, length })
    }

    /// Grid on the 2π-torus.
    pub fn torus(n: usize) -> Result<Self> {
        Self::new(n, 2.0 * PI)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.length * j as f64 / self.n as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Integer mode number of FFT slot `j`, in `-n/2+1 ..= n/2`.
    pub fn mode(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j <= n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Physical wavenumber `2π k / L` of FFT slot `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        2.0 * PI * self.mode(j) as f64 / self.length
    }

    /// Distance on the circle of circumference `L`, in `[0, L/2]`.
    pub fn torus_distance(&self, a: f64, b: f64) -> f64 {
        torus_distance(a - b, self.length)
    }

    /// Wraps `x` into `[0, L)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let w = x.rem_euclid(self.length);
        if w >= self.length {
            0.0
        } else {
            w
        }
    }

    pub(crate) fn describe(&self) -> String {
        format!("n={}, L={}", self.n, self.length)
    }
}

/// Nearest-image distance of a displacement on a circle of circumference `period`.
pub fn torus_distance(displacement: f64, period: f64) -> f64 {
    let r = displacement.abs().rem_euclid(period);
    r.min(period - r)
}

/// Real grid function attached to a [`PeriodicGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl Field {
    /// Wraps sample values, rejecting wrong lengths and non-finite entries.
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(FlockError::invalid(format!(
                "field has {} values but the grid has {} points",
                values.len(),
                grid.n()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(FlockError::invalid(format!(
                "field value at index {j} is not finite ({})",
                values[j]
            )));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: PeriodicGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self { grid, values }
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(grid, grid.points().into_iter().map(f).collect())
    }

    pub fn constant(grid: PeriodicGrid, value: f64) -> Self {
        Self::from_raw(grid, vec![value; grid.n()])
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(FlockError::GridMismatch {
                left: self.grid.describe(),
                right: other.grid.describe(),
            })
        }
    }

    /// `Δx Σ f_j`, the periodic trapezoid rule.
    pub fn integral(&self) -> f64 {
        self.grid.dx() * self.values.iter().sum::<f64>()
    }

    /// `(1/L) ∫ f`.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete L² norm with measure `dx`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.dx() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Discrete inner product `Δx Σ f_j g_j`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self.grid.dx()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.same_grid(other)?;
        Ok(Field::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn scaled(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product without dealiasing.
    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Shifts the sample index: `out[j] = self[j + cells]` (periodic).
    pub fn roll(&self, cells: isize) -> Field {
        let n = self.values.len() as isize;
        Field::from_raw(
            self.grid,
            (0..n)
                .map(|j| self.values[(j + cells).rem_euclid(n) as usize])
                .collect(),
        )
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}
