//! Cucker-Smale particles on the torus and their mollified moments.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FlockError, Result};
use crate::grid::{torus_distance, Field, PeriodicGrid};
use crate::kernels::{KernelSpec, Profile};
use crate::spectral;

/// Prefactor of the pairwise alignment sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// `total_mass / N`; `total_mass = 1` is the classical model.
    Mean { total_mass: f64 },
    /// `1 / Σ_j φ(|x_i - x_j|)`.
    Adaptive,
}

impl Normalization {
    /// The classical `1/N` prefactor.
    pub fn mean() -> Self {
        Normalization::Mean { total_mass: 1.0 }
    }
}

/// Positions and velocities of `N` agents.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    x: Vec<f64>,
    v: Vec<f64>,
    t: f64,
    length: f64,
}

impl AgentState {
    pub fn new(x: Vec<f64>, v: Vec<f64>, length: f64) -> Result<Self> {
        if x.is_empty() || x.len() != v.len() {
            return Err(FlockError::invalid(format!(
                "agent state needs matching non-empty position and velocity lists ({} vs {})",
                x.len(),
                v.len()
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(FlockError::invalid(format!("domain length must be positive, got {length}")));
        }
        if x.iter().chain(&v).any(|a| !a.is_finite()) {
            return Err(FlockError::invalid("agent positions and velocities must be finite"));
        }
        let x = x.into_iter().map(|p| wrap(p, length)).collect();
        Ok(Self { x, v, t: 0.0, length })
    }

    /// Places `count` agents by inverse-CDF sampling of `ρ₀` at the rotated
    /// lattice `(i + s)/N`, with `s` drawn from `seed`; velocities are `u₀(x_i)`.
    pub fn sample(rho0: &Field, u0: &Field, count: usize, seed: u64) -> Result<Self> {
        rho0.same_grid(u0)?;
        if count == 0 {
            return Err(FlockError::invalid("agent count must be positive"));
        }
        if rho0.min() < 0.0 {
            return Err(FlockError::invalid("cannot sample a negative density"));
        }
        let grid = *rho0.grid();
        let length = grid.length();
        let coeffs = spectral::forward(rho0.values());
        let total = spectral::cumulative_integral_coeffs(&grid, &coeffs, length);
        if !(total > 0.0) {
            return Err(FlockError::invalid("cannot sample a density of zero mass"));
        }
        let offset: f64 = ChaCha8Rng::seed_from_u64(seed).random();
        let u_coeffs = spectral::forward(u0.values());
        let mut x = Vec::with_capacity(count);
        let mut v = Vec::with_capacity(count);
        for i in 0..count {
            let target = total * (i as f64 + offset) / count as f64;
            let p = invert_cdf(&grid, &coeffs, target);
            x.push(p);
            v.push(spectral::interpolate_coeffs(&grid, &u_coeffs, p));
        }
        Self::new(x, v, length)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `max v_i - min v_i`.
    pub fn velocity_diameter(&self) -> f64 {
        let (lo, hi) = self
            .v
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    pub fn mean_velocity(&self) -> f64 {
        self.v.iter().sum::<f64>() / self.v.len() as f64
    }
}

fn wrap(x: f64, length: f64) -> f64 {
    let w = x.rem_euclid(length);
    if w >= length {
        0.0
    } else {
        w
    }
}

/// Solves `∫_0^x ρ = target` by safeguarded Newton iteration.
fn invert_cdf(grid: &PeriodicGrid, coeffs: &[rustfft::num_complex::Complex64], target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, grid.length());
    let mut x = grid.length() * 0.5;
    for _ in 0..100 {
        let c = spectral::cumulative_integral_coeffs(grid, coeffs, x) - target;
        if c > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let slope = spectral::interpolate_coeffs(grid, coeffs, x);
        let newton = x - c / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 1e-14 * grid.length() || hi - lo <= 1e-14 * grid.length() {
            return next;
        }
        x = next;
    }
    x
}

/// Pair weights `φ(d(x_i, x_j))` with a fast path for cosine profiles.
enum PairWeights<'a> {
    Cosine { a: f64, b: f64, c: Vec<f64>, s: Vec<f64> },
    General { profile: &'a Profile, length: f64, x: &'a [f64] },
}

impl<'a> PairWeights<'a> {
    fn new(profile: &'a Profile, length: f64, x: &'a [f64]) -> Self {
        let cosine = |a: f64, b: f64| {
            let k = 2.0 * PI / length;
            PairWeights::Cosine {
                a,
                b,
                c: x.iter().map(|p| (k * p).cos()).collect(),
                s: x.iter().map(|p| (k * p).sin()).collect(),
            }
        };
        match profile {
            Profile::Constant { value } => cosine(*value, 0.0),
            Profile::RaisedCosine { a, b } => cosine(*a, *b),
            _ => PairWeights::General { profile, length, x },
        }
    }

    #[inline]
    fn weight(&self, i: usize, j: usize) -> f64 {
        match self {
            // cos(k(x_i - x_j)) by angle addition.
            PairWeights::Cosine { a, b, c, s } => a + b * (c[i] * c[j] + s[i] * s[j]),
            PairWeights::General { profile, length, x } => {
                profile.value(torus_distance(x[i] - x[j], *length), *length)
            }
        }
    }

    fn self_weight(&self, i: usize) -> f64 {
        self.weight(i, i)
    }
}

/// `(dx/dt, dv/dt)` of the particle system.
pub fn cs_rhs(agents: &AgentState, kernel: &KernelSpec, normalization: Normalization) -> Result<(Vec<f64>, Vec<f64>)> {
    let profile = agent_profile(kernel, agents.length)?;
    Ok((agents.v.clone(), alignment(profile, agents.length, &agents.x, &agents.v, normalization)))
}

fn agent_profile(kernel: &KernelSpec, length: f64) -> Result<&Profile> {
    let profile = kernel.profile().ok_or_else(|| {
        FlockError::UnsupportedKernel(format!("{} (particle model needs a bounded kernel)", kernel.name()))
    })?;
    if (kernel.length() - length).abs() > 1e-12 * length {
        return Err(FlockError::invalid(format!(
            "kernel period {} differs from the agent domain {length}",
            kernel.length()
        )));
    }
    Ok(profile)
}

fn alignment(profile: &Profile, length: f64, x: &[f64], v: &[f64], normalization: Normalization) -> Vec<f64> {
    let n = x.len();
    let w = PairWeights::new(profile, length, x);
    let (acc, norm) = match &w {
        PairWeights::Cosine { a, b, c, s } => cosine_sums(*a, *b, c, s, v),
        PairWeights::General { .. } => pairwise_sums(&w, v),
    };
    match normalization {
        Normalization::Mean { total_mass } => {
            let s = total_mass / n as f64;
            acc.iter().map(|a| s * a).collect()
        }
        Normalization::Adaptive => acc.iter().zip(&norm).map(|(a, z)| a / z).collect(),
    }
}

/// `Σ_j φ_ij (v_j - v_i)` and `Σ_j φ_ij` for a general profile.
fn pairwise_sums(w: &PairWeights, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = v.len();
    let mut acc = vec![0.0; n];
    let mut norm: Vec<f64> = (0..n).map(|i| w.self_weight(i)).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let phi = w.weight(i, j);
            let dv = phi * (v[j] - v[i]);
            acc[i] += dv;
            acc[j] -= dv;
            norm[i] += phi;
            norm[j] += phi;
        }
    }
    (acc, norm)
}

/// The same sums for `φ = a + b cos(k r)` in `O(N)`: by angle addition every
/// pair sum reduces to a handful of global moments.
fn cosine_sums(a: f64, b: f64, c: &[f64], s: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = v.len() as f64;
    // Alignment only sees velocity differences; centring limits cancellation.
    let mean = v.iter().sum::<f64>() / n;
    let w: Vec<f64> = v.iter().map(|v| v - mean).collect();
    let (mut sw, mut sc, mut ss, mut scw, mut ssw) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((w, c), s) in w.iter().zip(c).zip(s) {
        sw += w;
        sc += c;
        ss += s;
        scw += c * w;
        ssw += s * w;
    }
    let acc = w
        .iter()
        .zip(c)
        .zip(s)
        .map(|((wi, ci), si)| a * (sw - n * wi) + b * (ci * (scw - wi * sc) + si * (ssw - wi * ss)))
        .collect();
    let norm = c.iter().zip(s).map(|(ci, si)| a * n + b * (ci * sc + si * ss)).collect();
    (acc, norm)
}

/// One classical RK4 step.
pub fn agents_step(agents: &AgentState, kernel: &KernelSpec, dt: f64, normalization: Normalization) -> Result<AgentState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(FlockError::invalid(format!("time step must be positive, got {dt}")));
    }
    let profile = agent_profile(kernel, agents.length)?;
    let l = agents.length;
    let f = |x: &[f64], v: &[f64]| alignment(profile, l, x, v, normalization);
    let shift = |a: &[f64], h: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| a + h * b).collect() };

    let (x0, v0) = (&agents.x, &agents.v);
    let a1 = f(x0, v0);
    let (x1, v1) = (shift(x0, 0.5 * dt, v0), shift(v0, 0.5 * dt, &a1));
    let a2 = f(&x1, &v1);
    let (x2, v2) = (shift(x0, 0.5 * dt, &v1), shift(v0, 0.5 * dt, &a2));
    let a3 = f(&x2, &v2);
    let (x3, v3) = (shift(x0, dt, &v2), shift(v0, dt, &a3));
    let a4 = f(&x3, &v3);

    let n = x0.len();
    let mut x = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let dx = v0[i] + 2.0 * v1[i] + 2.0 * v2[i] + v3[i];
        let dv = a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i];
        x.push(wrap(x0[i] + dt / 6.0 * dx, l));
        v.push(v0[i] + dt / 6.0 * dv);
    }
    Ok(AgentState {
        x,
        v,
        t: agents.t + dt,
        length: l,
    })
}

/// Advances to `t_end` with steps no larger than `dt`, returning states at
/// multiples of `cadence` (the initial state included).
pub fn run_agents(
    initial: &AgentState,
    kernel: &KernelSpec,
    normalization: Normalization,
    dt: f64,
    t_end: f64,
    cadence: f64,
) -> Result<Vec<AgentState>> {
    if !(cadence.is_finite() && cadence > 0.0) {
        return Err(FlockError::invalid(format!("cadence must be positive, got {cadence}")));
    }
    let mut state = initial.clone();
    let mut out = vec![state.clone()];
    let outputs = if t_end > 0.0 {
        (t_end / cadence - 1e-9).ceil().max(1.0) as usize
    } else {
        0
    };
    for k in 1..=outputs {
        let t_next = (k as f64 * cadence).min(t_end);
        let span = t_next - state.t;
        let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for _ in 0..steps {
            state = agents_step(&state, kernel, h, normalization)?;
        }
        state.t = t_next;
        out.push(state.clone());
    }
    Ok(out)
}

/// Mollified density and momentum, `ρ_emp = (L/N) Σ ψ_w(x - x_i)`.
///
/// `ψ_w` is a periodic Gaussian of standard deviation `w`, normalized on the
/// grid so that each agent carries exactly `L/N` of discrete mass.
pub fn empirical_moments(agents: &AgentState, grid: &PeriodicGrid, mollifier_width: f64) -> Result<(Field, Field)> {
    let minimum = 2.0 * grid.dx();
    if !(mollifier_width >= minimum) {
        return Err(FlockError::UnderResolved {
            width: mollifier_width,
            minimum,
        });
    }
    if (grid.length() - agents.length).abs() > 1e-12 * agents.length {
        return Err(FlockError::invalid("grid and agent domain lengths differ"));
    }
    let n = grid.n();
    let dx = grid.dx();
    let share = grid.length() / agents.len() as f64;
    let inv = 1.0 / (2.0 * mollifier_width * mollifier_width);
    let mut rho = vec![0.0; n];
    let mut mom = vec![0.0; n];
    let mut bump = vec![0.0; n];
    for (xi, vi) in agents.x.iter().zip(&agents.v) {
        let mut z = 0.0;
        for (j, b) in bump.iter_mut().enumerate() {
            let d = torus_distance(grid.x(j) - xi, grid.length());
            *b = (-d * d * inv).exp();
            z += *b;
        }
        let scale = share / (z * dx);
        for j in 0..n {
            rho[j] += scale * bump[j];
            mom[j] += scale * vi * bump[j];
        }
    }
    Ok((Field::from_raw(*grid, rho), Field::from_raw(*grid, mom)))
}
