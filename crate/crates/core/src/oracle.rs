//! Slow reference computations that share no code path with the spectral
//! operators: closed forms, brute-force image sums, adaptive quadrature
//! and direct `O(n²)` sums.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::error::{FlockError, Result};
use crate::grid::{torus_distance, Field, PeriodicGrid};
use crate::kernels::{periodized_kernel_eval, KernelSpec, KernelVariant};
use crate::quadrature::tanh_sinh;

/// `c_α = π / (Γ(1+α) sin(πα/2))`.
pub fn fractional_constant_closed_form(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(PI / (gamma(1.0 + alpha) * (0.5 * PI * alpha).sin()))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(FlockError::invalid(format!("alpha must lie in (0, 2), got {alpha}")))
    }
}

/// `Σ_{|k|≤K} |x + 2πk|^{-(1+α)}` plus the integral of the remaining images.
pub fn periodized_kernel_bruteforce(alpha: f64, x: f64, terms: usize) -> Result<f64> {
    check_alpha(alpha)?;
    let r = x.rem_euclid(2.0 * PI);
    if r == 0.0 {
        return Err(FlockError::SingularPoint { x });
    }
    let beta = 1.0 + alpha;
    let k_max = terms as f64;
    let edge = 2.0 * PI * (k_max + 0.5);
    let tail = ((edge + r).powf(-alpha) + (edge - r).powf(-alpha)) / (2.0 * PI * alpha);
    let mut sum = tail;
    for k in (1..=terms).rev() {
        let s = 2.0 * PI * k as f64;
        sum += (s + r).powf(-beta) + (s - r).powf(-beta);
    }
    Ok(sum + r.powf(-beta))
}

/// `a₀ + Σ_k a_k cos(kx) + b_k sin(kx)` on the 2π-torus.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    pub a0: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigPolynomial {
    pub fn new(a0: f64, cos: Vec<f64>, sin: Vec<f64>) -> Self {
        Self { a0, cos, sin }
    }

    pub fn degree(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    fn coeffs(&self, k: usize) -> (f64, f64) {
        (
            self.cos.get(k - 1).copied().unwrap_or(0.0),
            self.sin.get(k - 1).copied().unwrap_or(0.0),
        )
    }

    pub fn eval(&self, x: f64) -> f64 {
        (1..=self.degree()).fold(self.a0, |s, k| {
            let (a, b) = self.coeffs(k);
            let kx = k as f64 * x;
            s + a * kx.cos() + b * kx.sin()
        })
    }

    pub fn sample(&self, grid: &PeriodicGrid) -> Field {
        Field::from_fn(*grid, |x| self.eval(x))
    }

    /// `f(x+z) + f(x-z) - 2f(x)`, written without cancellation.
    fn second_difference(&self, x: f64, z: f64) -> f64 {
        (1..=self.degree()).fold(0.0, |s, k| {
            let (a, b) = self.coeffs(k);
            let kf = k as f64;
            let half = (0.5 * kf * z).sin();
            s - 4.0 * (a * (kf * x).cos() + b * (kf * x).sin()) * half * half
        })
    }

    /// `f(x) - f(x+z)`, written without cancellation.
    fn difference(&self, x: f64, z: f64) -> f64 {
        (1..=self.degree()).fold(0.0, |s, k| {
            let (a, b) = self.coeffs(k);
            let kf = k as f64;
            let mid = kf * (x + 0.5 * z);
            s + 2.0 * (0.5 * kf * z).sin() * (a * mid.sin() - b * mid.cos())
        })
    }
}

/// `∫_0^π φ_α(z) (f(x+z) + f(x-z) - 2f(x)) dz` by tanh-sinh quadrature.
pub fn fractional_laplacian_direct(f: &TrigPolynomial, alpha: f64, x: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let kernel = |z: f64| periodized_kernel_eval(alpha, z, 64).unwrap_or(0.0);
    Ok(tanh_sinh(0.0, PI, 1e-13, |z| kernel(z) * f.second_difference(x, z)))
}

/// `∫_{-π}^{π} |g(x) - g(x+z)|² φ_α(|z|) dz` by tanh-sinh quadrature.
pub fn dissipation_direct(g: &TrigPolynomial, alpha: f64, x: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let kernel = |z: f64| periodized_kernel_eval(alpha, z, 64).unwrap_or(0.0);
    Ok(tanh_sinh(0.0, PI, 1e-13, |z| {
        let p = g.difference(x, z);
        let m = g.difference(x, -z);
        kernel(z) * (p * p + m * m)
    }))
}

fn bounded_pair_weights(kernel: &KernelSpec, grid: &PeriodicGrid) -> Result<Vec<f64>> {
    let profile = kernel
        .profile()
        .ok_or_else(|| FlockError::UnsupportedKernel(kernel.name()))?;
    Ok((0..grid.n())
        .map(|m| profile.value(torus_distance(grid.x(m), grid.length()), grid.length()))
        .collect())
}

/// `Σ_j Δx φ(d(x_i, x_j)) ρ_j (u_j - u_i)` by direct summation.
pub fn commutator_force_direct(kernel: &KernelSpec, rho: &Field, u: &Field) -> Result<Field> {
    rho.same_grid(u)?;
    if !matches!(kernel.variant(), KernelVariant::Bounded(_)) {
        return Err(FlockError::UnsupportedKernel(kernel.name()));
    }
    let grid = *rho.grid();
    let w = bounded_pair_weights(kernel, &grid)?;
    let (r, v) = (rho.values(), u.values());
    let n = grid.n();
    let out = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| grid.dx() * w[(i + n - j) % n] * r[j] * (v[j] - v[i]))
                .sum()
        })
        .collect();
    Field::new(grid, out)
}

/// `Σ_j φ ρ_j u_j / Σ_j φ ρ_j - u_i` by direct summation.
pub fn mt_force_direct(kernel: &KernelSpec, rho: &Field, u: &Field) -> Result<Field> {
    rho.same_grid(u)?;
    if !matches!(kernel.variant(), KernelVariant::MotschTadmor(_)) {
        return Err(FlockError::UnsupportedKernel(kernel.name()));
    }
    let grid = *rho.grid();
    let w = bounded_pair_weights(kernel, &grid)?;
    let (r, v) = (rho.values(), u.values());
    let n = grid.n();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..n {
            let wr = w[(i + n - j) % n] * r[j];
            num += wr * v[j];
            den += wr;
        }
        if !(den > 0.0) {
            return Err(FlockError::DegenerateNormalization {
                index: i,
                value: den * grid.dx(),
            });
        }
        out.push(num / den - v[i]);
    }
    Field::new(grid, out)
}

/// Two agents with constant interaction: `v₁ - v₂` decays as `e^{-κt}`
/// where `κ` is the prefactor times `2φ`. Positions are not wrapped.
pub fn two_body_constant(x0: [f64; 2], v0: [f64; 2], kappa: f64, t: f64) -> ([f64; 2], [f64; 2]) {
    let mean = 0.5 * (v0[0] + v0[1]);
    let decay = (-kappa * t).exp();
    let drift = if kappa == 0.0 { t } else { (1.0 - decay) / kappa };
    let mut x = [0.0; 2];
    let mut v = [0.0; 2];
    for i in 0..2 {
        let dev = v0[i] - mean;
        v[i] = mean + dev * decay;
        x[i] = x0[i] + mean * t + dev * drift;
    }
    (x, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_constant_at_one_is_pi() {
        assert!((fractional_constant_closed_form(1.0).unwrap() - PI).abs() < 1e-14);
        assert!(fractional_constant_closed_form(2.0).is_err());
    }

    #[test]
    fn bruteforce_kernel_at_pi() {
        let v = periodized_kernel_bruteforce(1.0, PI, 1_000_000).unwrap();
        assert!((v - 0.25).abs() < 1e-12, "{v}");
    }

    #[test]
    fn direct_laplacian_on_single_mode() {
        let f = TrigPolynomial::new(0.0, vec![0.0, 1.0], vec![]);
        let c = fractional_constant_closed_form(1.5).unwrap();
        let x = 0.7;
        let got = fractional_laplacian_direct(&f, 1.5, x).unwrap();
        let want = -c * 2f64.powf(1.5) * (2.0 * x).cos();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn differences_match_naive_forms() {
        let f = TrigPolynomial::new(0.3, vec![1.0, -0.5], vec![0.2, 0.0, 0.7]);
        let (x, z) = (0.4, 1.1);
        let naive2 = f.eval(x + z) + f.eval(x - z) - 2.0 * f.eval(x);
        assert!((f.second_difference(x, z) - naive2).abs() < 1e-13);
        assert!((f.difference(x, z) - (f.eval(x) - f.eval(x + z))).abs() < 1e-13);
    }

    #[test]
    fn two_body_conserves_mean() {
        let (x, v) = two_body_constant([0.0, 1.0], [1.0, -1.0], 1.0, 2.0);
        assert!((v[0] + v[1]).abs() < 1e-15);
        assert!((v[0] - (-2.0f64).exp()).abs() < 1e-15);
        assert!((x[0] - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
    }
}
