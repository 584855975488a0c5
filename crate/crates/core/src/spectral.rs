//! Fourier machinery on the periodic grid: differentiation, the fractional
//! Laplacian, circular convolution, dealiased products, trigonometric
//! interpolation and the pointwise dissipation functional.
//!
//! Coefficients are kept *normalized*: `f(x) = Σ_k f̂_k e^{i κ_k x}` with
//! `f̂ = FFT(f) / n`. The Nyquist slot is treated as a real cosine mode.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{FlockError, Result};
use crate::grid::{Field, PeriodicGrid};
use crate::kernels::{periodized_kernel_with_period, DEFAULT_TRUNCATION};
use crate::quadrature::GaussLegendre;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static FRACTIONAL_CONSTANTS: RefCell<HashMap<u64, f64>> = RefCell::new(HashMap::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Normalized Fourier coefficients of real samples.
pub(crate) fn forward(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(n, false).process(&mut buf);
    let s = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= s);
    buf
}

/// Real samples from normalized coefficients (imaginary residue discarded).
pub(crate) fn inverse(mut coeffs: Vec<Complex64>) -> Vec<f64> {
    let n = coeffs.len();
    plan(n, true).process(&mut coeffs);
    coeffs.into_iter().map(|c| c.re).collect()
}

/// Embeds `n` coefficients into a zero-padded spectrum of length `m > n`,
/// dropping the Nyquist slot.
pub(crate) fn pad(coeffs: &[Complex64], m: usize) -> Vec<Complex64> {
    let n = coeffs.len();
    let half = n / 2;
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    out[..half].copy_from_slice(&coeffs[..half]);
    for k in 1..half {
        out[m - k] = coeffs[n - k];
    }
    out
}

/// Keeps modes `|k| < n/2` of a length-`m` spectrum.
pub(crate) fn truncate(coeffs: &[Complex64], n: usize) -> Vec<Complex64> {
    let m = coeffs.len();
    let half = n / 2;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    out[..half].copy_from_slice(&coeffs[..half]);
    for k in 1..half {
        out[n - k] = coeffs[m - k];
    }
    out
}

/// Size of the zero-padded grid used for quadratic products (3/2 rule).
pub(crate) fn padded_size(n: usize) -> usize {
    3 * n / 2
}

/// Multiplies normalized coefficients by `(i κ)^order`.
pub(crate) fn differentiate_coeffs(grid: &PeriodicGrid, coeffs: &mut [Complex64], order: u32) {
    let n = grid.n();
    for (j, c) in coeffs.iter_mut().enumerate() {
        let kappa = grid.wavenumber(j);
        if j == n / 2 && order % 2 == 1 {
            *c = Complex64::new(0.0, 0.0);
            continue;
        }
        let factor = match order % 4 {
            0 => Complex64::new(kappa.powi(order as i32), 0.0),
            1 => Complex64::new(0.0, kappa.powi(order as i32)),
            2 => Complex64::new(-kappa.powi(order as i32), 0.0),
            _ => Complex64::new(0.0, -kappa.powi(order as i32)),
        };
        *c *= factor;
    }
}

/// `order`-th derivative by wavenumber multiplication, `order ∈ {1, 2, 3}`.
pub fn spectral_derivative(f: &Field, order: u32) -> Result<Field> {
    if !(1..=3).contains(&order) {
        return Err(FlockError::invalid(format!(
            "derivative order must be 1, 2 or 3, got {order}"
        )));
    }
    Ok(derivative_unchecked(f, order))
}

pub(crate) fn derivative_unchecked(f: &Field, order: u32) -> Field {
    let grid = *f.grid();
    let mut c = forward(f.values());
    differentiate_coeffs(&grid, &mut c, order);
    Field::from_raw(grid, inverse(c))
}

/// `c_α = 2 ∫_0^∞ (1 - cos s) / s^{1+α} ds`, the constant linking the kernel
/// `|z|^{-1-α}` to the Fourier symbol `-c_α |κ|^α`.
///
/// Evaluated by quadrature: an exact power series on `[0, 1]`, composite
/// Gauss-Legendre panels on `[1, 2π·400]`, and an asymptotic expansion of
/// the oscillatory tail. Cached per α for the calling thread.
pub fn fractional_constant(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let key = alpha.to_bits();
    if let Some(c) = FRACTIONAL_CONSTANTS.with(|m| m.borrow().get(&key).copied()) {
        return Ok(c);
    }
    let c = 2.0 * one_sided_fractional_integral(alpha);
    FRACTIONAL_CONSTANTS.with(|m| m.borrow_mut().insert(key, c));
    Ok(c)
}

fn one_sided_fractional_integral(alpha: f64) -> f64 {
    // ∫_0^1: 1 - cos s = Σ_{m≥1} (-1)^{m+1} s^{2m} / (2m)!
    let mut head = 0.0;
    let mut factorial = 1.0;
    for m in 1..30 {
        let two_m = 2 * m;
        factorial *= ((two_m - 1) * two_m) as f64;
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        head += sign / (factorial * (two_m as f64 - alpha));
    }

    let x_far = 2.0 * PI * 400.0;
    let gl = GaussLegendre::new(16);
    let body = gl.integrate_panels(1.0, x_far, 1600, |s| (1.0 - s.cos()) * s.powf(-1.0 - alpha));

    // ∫_X^∞ s^{-β} ds - ∫_X^∞ cos(s) s^{-β} ds with β = 1 + α and cos X = 1.
    let beta = 1.0 + alpha;
    let mut cos_tail = 0.0;
    let mut rising = beta;
    let mut sign = 1.0;
    let mut power = x_far.powf(-beta - 1.0);
    for j in 0..4 {
        cos_tail += sign * rising * power;
        let b = beta + (2 * j + 1) as f64;
        rising *= b * (b + 1.0);
        sign = -sign;
        power /= x_far * x_far;
    }
    let tail = x_far.powf(-alpha) / alpha - cos_tail;

    head + body + tail
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(FlockError::invalid(format!(
            "fractional order alpha must lie in (0, 2), got {alpha}"
        )))
    }
}

/// Fourier symbol `-c_α |κ_j|^α` for every FFT slot of `grid`.
pub fn fractional_symbol(grid: &PeriodicGrid, alpha: f64) -> Result<Vec<f64>> {
    let c = fractional_constant(alpha)?;
    Ok((0..grid.n())
        .map(|j| -c * grid.wavenumber(j).abs().powf(alpha))
        .collect())
}

/// Applies `L_α f(x) = ∫ |z|^{-1-α} (f(x+z) - f(x)) dz` spectrally.
pub fn fractional_laplacian_apply(f: &Field, alpha: f64) -> Result<Field> {
    let symbol = fractional_symbol(f.grid(), alpha)?;
    Ok(apply_symbol(f, &symbol))
}

pub(crate) fn apply_symbol(f: &Field, symbol: &[f64]) -> Field {
    let mut c = forward(f.values());
    c.iter_mut().zip(symbol).for_each(|(c, s)| *c *= *s);
    Field::from_raw(*f.grid(), inverse(c))
}

/// `(φ * f)(x_j) = Δx Σ_m φ_tab(x_j - x_m) f(x_m)`, computed with transforms.
pub fn circular_convolution(kernel_table: &Field, f: &Field) -> Result<Field> {
    kernel_table.same_grid(f)?;
    let grid = *f.grid();
    let k = forward(kernel_table.values());
    Ok(convolve_with_coeffs(&grid, &k, f))
}

pub(crate) fn convolve_with_coeffs(grid: &PeriodicGrid, kernel: &[Complex64], f: &Field) -> Field {
    let l = grid.length();
    let mut c = forward(f.values());
    c.iter_mut().zip(kernel).for_each(|(c, k)| *c *= l * k);
    Field::from_raw(*grid, inverse(c))
}

/// Pointwise product with the 3/2 zero-padding rule: both factors are
/// evaluated on a padded grid, multiplied, and projected back onto the
/// modes `|k| < n/2`.
pub fn dealiased_product(a: &Field, b: &Field) -> Result<Field> {
    a.same_grid(b)?;
    let n = a.len();
    let m = padded_size(n);
    let pa = inverse(pad(&forward(a.values()), m));
    let pb = inverse(pad(&forward(b.values()), m));
    let prod: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
    Ok(Field::from_raw(*a.grid(), inverse(truncate(&forward(&prod), n))))
}

/// Trigonometric interpolant of `f` evaluated at `x` (wrapped into `[0, L)`).
pub fn interpolate(f: &Field, x: f64) -> f64 {
    interpolate_coeffs(f.grid(), &forward(f.values()), x)
}

pub(crate) fn interpolate_coeffs(grid: &PeriodicGrid, coeffs: &[Complex64], x: f64) -> f64 {
    let n = grid.n();
    let x = grid.wrap(x);
    let mut acc = coeffs[0].re;
    for (j, c) in coeffs.iter().enumerate().take(n / 2).skip(1) {
        let phase = grid.wavenumber(j) * x;
        acc += 2.0 * (c.re * phase.cos() - c.im * phase.sin());
    }
    acc + coeffs[n / 2].re * (grid.wavenumber(n / 2) * x).cos()
}

/// `g(x) = f(x + a)` by a Fourier phase shift; exact on band-limited data.
pub fn shift(f: &Field, a: f64) -> Field {
    let grid = *f.grid();
    let n = grid.n();
    let mut c = forward(f.values());
    for (j, c) in c.iter_mut().enumerate() {
        let phase = grid.wavenumber(j) * a;
        if j == n / 2 {
            *c = Complex64::new(c.re * phase.cos(), 0.0);
        } else {
            *c *= Complex64::new(phase.cos(), phase.sin());
        }
    }
    Field::from_raw(grid, inverse(c))
}

/// `∫_0^x f(s) ds` of the trigonometric interpolant.
pub(crate) fn cumulative_integral_coeffs(grid: &PeriodicGrid, coeffs: &[Complex64], x: f64) -> f64 {
    let n = grid.n();
    let mut acc = coeffs[0].re * x;
    for (j, c) in coeffs.iter().enumerate().take(n / 2).skip(1) {
        let kappa = grid.wavenumber(j);
        // 2 Re( c (e^{iκx} - 1) / (iκ) )
        let (s, co) = (kappa * x).sin_cos();
        acc += 2.0 * (c.re * s + c.im * (co - 1.0)) / kappa;
    }
    let kn = grid.wavenumber(n / 2);
    acc + coeffs[n / 2].re * (kn * x).sin() / kn
}

/// Pointwise dissipation `D g(x_j) = ∫ |g(x_j) - g(x_j + z)|² / |z|^{1+α} dz`.
///
/// Midpoint quadrature on the grid offsets `z_m = m Δx` against the
/// periodized kernel. The `z = 0` cell uses the centered-difference slope:
/// `|g'|² ∫_{|z|<Δx/2} |z|^{1-α} dz`.
pub fn dissipation_pointwise(g: &Field, x_index: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let n = g.len();
    if x_index >= n {
        return Err(FlockError::invalid(format!(
            "x_index {x_index} out of range for a grid of {n} points"
        )));
    }
    let table = dissipation_table(g.grid(), alpha)?;
    Ok(dissipation_with_table(g, x_index, alpha, &table))
}

/// Periodized kernel at the grid offsets `m Δx`, indexed by `m mod n`; slot 0 unused.
pub(crate) fn dissipation_table(grid: &PeriodicGrid, alpha: f64) -> Result<Vec<f64>> {
    let n = grid.n();
    let mut table = vec![0.0; n];
    for (m, slot) in table.iter_mut().enumerate().skip(1) {
        *slot = periodized_kernel_with_period(alpha, grid.x(m), DEFAULT_TRUNCATION, grid.length())?;
    }
    Ok(table)
}

pub(crate) fn dissipation_with_table(g: &Field, x_index: usize, alpha: f64, table: &[f64]) -> f64 {
    let n = g.len();
    let dx = g.grid().dx();
    let v = g.values();
    let gj = v[x_index];

    let slope = (v[(x_index + 1) % n] - v[(x_index + n - 1) % n]) / (2.0 * dx);
    let center_cell = 2.0 * (0.5 * dx).powf(2.0 - alpha) / (2.0 - alpha);
    let mut total = slope * slope * center_cell;
    for (m, phi) in table.iter().enumerate().skip(1) {
        let d = gj - v[(x_index + m) % n];
        total += dx * d * d * phi;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::torus(n).unwrap()
    }

    #[test]
    fn derivative_of_sine_is_cosine() {
        let g = grid(64);
        let d = spectral_derivative(&Field::from_fn(g, f64::sin), 1).unwrap();
        for (x, v) in g.points().iter().zip(d.values()) {
            assert!((v - x.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = grid(32);
        for order in 1..=3 {
            let d = spectral_derivative(&Field::constant(g, 7.0), order).unwrap();
            assert!(d.sup_norm() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_exp_sin_matches_formula() {
        let g = grid(256);
        let f = Field::from_fn(g, |x| x.sin().exp());
        let d = spectral_derivative(&f, 1).unwrap();
        for (x, v) in g.points().iter().zip(d.values()) {
            assert!((v - x.cos() * x.sin().exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn derivative_rejects_bad_order() {
        let f = Field::zeros(grid(16));
        assert!(spectral_derivative(&f, 0).is_err());
        assert!(spectral_derivative(&f, 4).is_err());
    }

    #[test]
    fn fractional_constant_alpha_one_is_pi() {
        let c = fractional_constant(1.0).unwrap();
        assert!((c - PI).abs() < 1e-12, "{c}");
    }

    #[test]
    fn fractional_laplacian_annihilates_constants() {
        let f = Field::constant(grid(32), 4.0);
        let l = fractional_laplacian_apply(&f, 1.3).unwrap();
        assert!(l.sup_norm() < 1e-12);
    }

    #[test]
    fn fractional_laplacian_rejects_bad_alpha() {
        let f = Field::zeros(grid(16));
        for a in [0.0, 2.0, -1.0, 2.5, f64::NAN] {
            assert!(fractional_laplacian_apply(&f, a).is_err());
        }
    }

    #[test]
    fn fractional_laplacian_on_cosine_mode() {
        let g = grid(64);
        let c1 = fractional_constant(1.0).unwrap();
        for k in [1.0, 3.0, 7.0] {
            let f = Field::from_fn(g, |x| (k * x).cos());
            let l = fractional_laplacian_apply(&f, 1.0).unwrap();
            for (x, v) in g.points().iter().zip(l.values()) {
                assert!((v + c1 * k * (k * x).cos()).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn convolution_with_constant_gives_kernel_integral() {
        let g = grid(64);
        let phi = Field::from_fn(g, |x| 2.0 + x.cos());
        let out = circular_convolution(&phi, &Field::constant(g, 1.0)).unwrap();
        let integral = phi.integral();
        for v in out.values() {
            assert!((v - integral).abs() < 1e-12);
        }
    }

    #[test]
    fn convolution_eigenrelation_for_cosine() {
        let g = grid(64);
        let phi = Field::from_fn(g, |x| (-(x.min(2.0 * PI - x)).powi(2) / 2.0).exp());
        let f = Field::from_fn(g, f64::cos);
        let out = circular_convolution(&phi, &f).unwrap();
        let hat: f64 = g.dx()
            * g.points()
                .iter()
                .zip(phi.values())
                .map(|(x, p)| p * x.cos())
                .sum::<f64>();
        for (x, v) in g.points().iter().zip(out.values()) {
            assert!((v - hat * x.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn convolution_is_linear() {
        let g = grid(32);
        let phi = Field::from_fn(g, |x| 1.0 + 0.5 * x.cos());
        let f = Field::from_fn(g, |x| (3.0 * x).sin());
        let h = Field::from_fn(g, |x| x.cos().exp());
        let combo = f.scaled(2.0).add(&h.scaled(-0.5)).unwrap();
        let lhs = circular_convolution(&phi, &combo).unwrap();
        let rhs = circular_convolution(&phi, &f)
            .unwrap()
            .scaled(2.0)
            .add(&circular_convolution(&phi, &h).unwrap().scaled(-0.5))
            .unwrap();
        assert!(lhs.sub(&rhs).unwrap().sup_norm() < 1e-13);
    }

    #[test]
    fn convolution_rejects_grid_mismatch() {
        let a = Field::zeros(grid(16));
        let b = Field::zeros(grid(32));
        assert!(matches!(
            circular_convolution(&a, &b),
            Err(FlockError::GridMismatch { .. })
        ));
    }

    #[test]
    fn dealiased_product_exact_for_resolved_modes() {
        let g = grid(32);
        let a = Field::from_fn(g, |x| (5.0 * x).sin());
        let b = Field::from_fn(g, |x| (7.0 * x).cos());
        let p = dealiased_product(&a, &b).unwrap();
        for (x, v) in g.points().iter().zip(p.values()) {
            assert!((v - (5.0 * x).sin() * (7.0 * x).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn dealiased_product_drops_aliased_modes() {
        let g = grid(16);
        // sin(6x) cos(5x) = (sin 11x + sin x)/2; mode 11 is beyond the band.
        let a = Field::from_fn(g, |x| (6.0 * x).sin());
        let b = Field::from_fn(g, |x| (5.0 * x).cos());
        let p = dealiased_product(&a, &b).unwrap();
        for (x, v) in g.points().iter().zip(p.values()) {
            assert!((v - 0.5 * x.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn interpolation_is_exact_on_band_limited_data() {
        let g = grid(32);
        let f = Field::from_fn(g, f64::sin);
        assert!((interpolate(&f, PI / 5.0) - (PI / 5.0).sin()).abs() < 1e-12);
        for j in [0, 3, 17] {
            assert!((interpolate(&f, g.x(j)) - f.values()[j]).abs() < 1e-13);
        }
        assert!((interpolate(&f, PI / 5.0 + 4.0 * PI) - (PI / 5.0).sin()).abs() < 1e-12);
    }

    #[test]
    fn interpolation_of_exp_cos() {
        let g = grid(256);
        let f = Field::from_fn(g, |x| x.cos().exp());
        assert!((interpolate(&f, 1.234) - 1.234f64.cos().exp()).abs() < 1e-8);
    }

    #[test]
    fn interpolation_reproduces_nyquist_samples() {
        let g = grid(16);
        let f = Field::from_fn(g, |x| (8.0 * x).cos() + 0.3);
        for j in 0..16 {
            assert!((interpolate(&f, g.x(j)) - f.values()[j]).abs() < 1e-13);
        }
    }

    #[test]
    fn shift_matches_analytic_translation() {
        let g = grid(64);
        let f = Field::from_fn(g, |x| x.sin().exp());
        let s = shift(&f, 0.7);
        for (x, v) in g.points().iter().zip(s.values()) {
            assert!((v - (x + 0.7).sin().exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn cumulative_integral_of_cosine() {
        let g = grid(32);
        let f = Field::from_fn(g, |x| 1.0 + x.cos());
        let c = forward(f.values());
        for x in [0.0, 0.4, 2.0, 6.0] {
            let v = cumulative_integral_coeffs(&g, &c, x);
            assert!((v - (x + x.sin())).abs() < 1e-12);
        }
    }

    #[test]
    fn dissipation_of_constant_is_zero() {
        let g = grid(64);
        let d = dissipation_pointwise(&Field::constant(g, 3.0), 5, 1.0).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn dissipation_is_quadratically_homogeneous() {
        let g = grid(64);
        let f = Field::from_fn(g, |x| (2.0 * x).sin() + 0.3 * x.cos());
        for lambda in [0.1, -3.0, 10.0] {
            let a = dissipation_pointwise(&f.scaled(lambda), 7, 1.2).unwrap();
            let b = dissipation_pointwise(&f, 7, 1.2).unwrap();
            assert!((a - lambda * lambda * b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn dissipation_rejects_bad_index() {
        let g = grid(16);
        assert!(dissipation_pointwise(&Field::zeros(g), 16, 1.0).is_err());
    }
}
