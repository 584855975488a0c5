use std::f64::consts::PI;

use eulerflock::agents::{agents_step, AgentState, Normalization};
use eulerflock::diagnostics::{enhancement_ratio, fit_decay};
use eulerflock::dynamics::{step, StepOutcome};
use eulerflock::kernels::{commutator_force, mt_normalized_force, periodized_kernel_eval};
use eulerflock::scenario::{AgentConfig, OutputConfig};
use eulerflock::spectral::{circular_convolution, dealiased_product, fractional_laplacian_apply, shift};
use eulerflock::{
    EConvention, Field, FieldState, InitialData, KernelSpec, KernelVariant, Mode, PeriodicGrid, Profile, Scenario,
    StepControl,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn trig(grid: PeriodicGrid, c: &[f64]) -> Field {
    Field::from_fn(grid, |x| {
        c.iter()
            .enumerate()
            .map(|(k, a)| a * ((k + 1) as f64 * x + k as f64).cos())
            .sum()
    })
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 1..6)
}

fn profile() -> impl Strategy<Value = Profile> {
    prop_oneof![
        (0.1..2.0f64).prop_map(|value| Profile::Constant { value }),
        (0.5..3.0f64, 0.0..0.45f64).prop_map(|(a, r)| Profile::RaisedCosine { a, b: a * r }),
        (0.1..2.0f64, 0.2..3.0f64).prop_map(|(amplitude, sigma)| Profile::Gaussian { amplitude, sigma }),
        (0.1..2.0f64, 0.2..3.0f64, 0.1..2.0f64)
            .prop_map(|(amplitude, scale, decay)| Profile::Algebraic { amplitude, scale, decay }),
    ]
}

fn positive_density(grid: PeriodicGrid, c: &[f64]) -> Field {
    let f = trig(grid, c);
    let lo = f.min();
    f.map(|v| v - lo + 0.2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn convolution_is_linear(a in coeffs(), b in coeffs(), s in -3.0..3.0f64, p in profile()) {
        let grid = PeriodicGrid::torus(64).unwrap();
        let table = KernelSpec::bounded(p, grid.length()).unwrap().table(&grid).unwrap();
        let (f, g) = (trig(grid, &a), trig(grid, &b));
        let lhs = circular_convolution(&table, &f.scaled(s).add(&g).unwrap()).unwrap();
        let rhs = circular_convolution(&table, &f).unwrap().scaled(s)
            .add(&circular_convolution(&table, &g).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn convolution_commutes_with_shift(a in coeffs(), cells in 0isize..64, p in profile()) {
        let grid = PeriodicGrid::torus(64).unwrap();
        let table = KernelSpec::bounded(p, grid.length()).unwrap().table(&grid).unwrap();
        let f = trig(grid, &a);
        let lhs = circular_convolution(&table, &f.roll(cells)).unwrap();
        let rhs = circular_convolution(&table, &f).unwrap().roll(cells);
        prop_assert!(lhs.sub(&rhs).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn commutator_force_carries_no_net_momentum(a in coeffs(), b in coeffs(), p in profile()) {
        let grid = PeriodicGrid::torus(64).unwrap();
        let kernel = KernelSpec::bounded(p, grid.length()).unwrap();
        let rho = positive_density(grid, &a);
        let u = trig(grid, &b);
        let force = commutator_force(&kernel, &rho, &u).unwrap();
        let scale = rho.integral() * u.sup_norm() * kernel.sup() * grid.length();
        prop_assert!(rho.inner(&force).unwrap().abs() < 1e-12 * scale.max(1.0));
    }

    #[test]
    fn singular_force_carries_no_net_momentum(a in coeffs(), b in coeffs(), alpha in 0.2..1.8f64) {
        let grid = PeriodicGrid::torus(64).unwrap();
        let kernel = KernelSpec::singular(alpha, grid.length()).unwrap();
        let rho = positive_density(grid, &a);
        let u = trig(grid, &b);
        let force = commutator_force(&kernel, &rho, &u).unwrap();
        prop_assert!(rho.inner(&force).unwrap().abs() < 1e-10 * force.sup_norm().max(1.0));
    }

    #[test]
    fn mt_force_ignores_density_scale(a in coeffs(), b in coeffs(), lambda in 0.01..100.0f64, p in profile()) {
        let grid = PeriodicGrid::torus(64).unwrap();
        let kernel = KernelSpec::motsch_tadmor(p, grid.length()).unwrap();
        let rho = positive_density(grid, &a);
        let u = trig(grid, &b);
        let f1 = mt_normalized_force(&kernel, &rho, &u).unwrap();
        let f2 = mt_normalized_force(&kernel, &rho.scaled(lambda), &u).unwrap();
        prop_assert!(f1.sub(&f2).unwrap().sup_norm() < 1e-12 * f1.sup_norm().max(1.0));
    }

    #[test]
    fn dealiased_product_is_exact_for_resolved_factors(a in coeffs(), b in coeffs()) {
        let grid = PeriodicGrid::torus(32).unwrap();
        let (f, g) = (trig(grid, &a), trig(grid, &b));
        let exact = f.mul(&g).unwrap();
        prop_assert!(dealiased_product(&f, &g).unwrap().sub(&exact).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn fractional_laplacian_is_dissipative(a in coeffs(), c in -5.0..5.0f64, alpha in 0.1..1.9f64) {
        let grid = PeriodicGrid::torus(64).unwrap();
        let f = trig(grid, &a);
        let lf = fractional_laplacian_apply(&f, alpha).unwrap();
        prop_assert!(f.inner(&lf).unwrap() <= 1e-12);
        let lc = fractional_laplacian_apply(&f.map(|v| v + c), alpha).unwrap();
        prop_assert!(lc.sub(&lf).unwrap().sup_norm() < 1e-10);
    }

    #[test]
    fn periodized_kernel_is_even_and_decreasing(alpha in 0.1..1.9f64, x in 0.05..PI - 0.05) {
        let k = |z: f64| periodized_kernel_eval(alpha, z, 64).unwrap();
        let at = k(x);
        prop_assert!((at - k(-x)).abs() <= 1e-12 * at);
        prop_assert!((at - k(2.0 * PI - x)).abs() <= 1e-12 * at);
        prop_assert!(k(x + 0.04) < at);
    }

    #[test]
    fn enhancement_ratio_invariant_under_affine_maps(a in coeffs(), s in 0.1..10.0f64, c in -3.0..3.0f64, cells in 0isize..128) {
        let grid = PeriodicGrid::torus(128).unwrap();
        let u = trig(grid, &a);
        prop_assume!(u.max() - u.min() > 1e-3);
        let r = enhancement_ratio(&u, 1.0).unwrap();
        let moved = u.map(|v| s * v + c).roll(cells);
        let r2 = enhancement_ratio(&moved, 1.0).unwrap();
        prop_assert!((r - r2).abs() < 1e-9 * r.abs().max(1.0));
    }

    #[test]
    fn shift_by_whole_cells_matches_roll(a in coeffs(), cells in 0usize..64) {
        let grid = PeriodicGrid::torus(64).unwrap();
        let f = trig(grid, &a);
        let shifted = shift(&f, cells as f64 * grid.dx());
        prop_assert!(shifted.sub(&f.roll(cells as isize)).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn one_step_conserves_mass_and_momentum(a in coeffs(), b in coeffs(), p in profile()) {
        let grid = PeriodicGrid::torus(64).unwrap();
        let kernel = KernelSpec::bounded(p, grid.length()).unwrap();
        let rho = positive_density(grid, &a);
        let u = trig(grid, &b).scaled(0.2);
        let s0 = FieldState::new(rho, u, 0.0).unwrap();
        let StepOutcome::Advanced(s1) = step(&s0, &kernel, 1e-3).unwrap() else {
            return Err(TestCaseError::fail("step did not advance"));
        };
        prop_assert!((s1.mean_mass() - s0.mean_mass()).abs() < 1e-13 * s0.mean_mass());
        let drift = (s1.mean_momentum() - s0.mean_momentum()).abs();
        prop_assert!(drift < 1e-9, "momentum drift {drift}");
    }

    #[test]
    fn agent_velocity_diameter_never_grows(seed in 0u64..1000, n in 2usize..40, p in profile()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = 2.0 * PI;
        let x: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, 0.0..l)).collect();
        let v: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let kernel = KernelSpec::bounded(p, l).unwrap();
        let mut state = AgentState::new(x, v, l).unwrap();
        let mean = state.mean_velocity();
        for _ in 0..20 {
            let next = agents_step(&state, &kernel, 0.05, Normalization::mean()).unwrap();
            prop_assert!(next.velocity_diameter() <= state.velocity_diameter() * (1.0 + 1e-12));
            state = next;
        }
        prop_assert!((state.mean_velocity() - mean).abs() < 1e-12);
    }

    #[test]
    fn scenario_text_round_trips(s in scenario()) {
        let text = s.to_text();
        let back = Scenario::parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, s);
    }
}

fn kernel_variant() -> impl Strategy<Value = KernelVariant> {
    prop_oneof![
        profile().prop_map(KernelVariant::Bounded),
        profile().prop_map(KernelVariant::MotschTadmor),
        (0.1..1.9f64, 1usize..200).prop_map(|(alpha, truncation)| KernelVariant::Singular { alpha, truncation }),
    ]
}

fn initial() -> impl Strategy<Value = InitialData> {
    (0.1..5.0f64, -1.0..1.0f64, -3.0..3.0f64, -1.0..1.0f64, -1.0..1.0f64, -3.0..3.0f64, 1u32..5).prop_map(
        |(mass, rho_amplitude, rho_phase, u_mean, u_amplitude, u_phase, wavenumber)| InitialData::PerturbedConstant {
            mass,
            rho_amplitude,
            rho_phase,
            u_mean,
            u_amplitude,
            u_phase,
            wavenumber,
        },
    )
}

fn scenario() -> impl Strategy<Value = Scenario> {
    (
        "[a-z][a-z0-9_]{0,12}",
        (8usize..256).prop_map(|h| 2 * h),
        1.0..50.0f64,
        kernel_variant(),
        initial(),
        (0.1..1.0f64, 0.1..1.0f64, 1e-4..0.1f64, 0.0..100.0f64),
        (0.01..1.0f64, any::<bool>(), 1e-8..0.5f64, prop::option::of((0.0..10.0f64, 10.0..20.0f64))),
        prop::option::of((1usize..5000, any::<u64>(), 2.0..4.0f64, any::<bool>(), 0.001..0.1f64)),
    )
        .prop_map(|(name, n, length, kernel, initial, st, out, agents)| {
            let singular = matches!(kernel, KernelVariant::Singular { .. });
            let e_convention = match kernel {
                KernelVariant::Singular { .. } => Some(EConvention::Commutator),
                _ => None,
            };
            Scenario {
                mode: Mode::Torus,
                n,
                length,
                kernel,
                initial,
                step: StepControl {
                    cfl_advective: st.0,
                    cfl_dissipative: st.1,
                    dt_max: st.2,
                    t_end: st.3,
                },
                output: OutputConfig {
                    cadence: out.0,
                    directory: format!("out/{name}"),
                    snapshots: out.1,
                    support_eps: out.2,
                    fit_window: out.3,
                    residual_window: None,
                    blowup_factor: 1e3,
                    rho_floor: 1e-8,
                    e_convention,
                },
                agents: agents.filter(|_| !singular).map(|(count, seed, w, adaptive, dt)| AgentConfig {
                    count,
                    seed,
                    mollifier_width: w * length / n as f64,
                    adaptive,
                    dt,
                    total_mass: None,
                }),
                name,
            }
        })
}

#[test]
fn noisy_decay_fit_recovers_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let series: Vec<(f64, f64)> = (0..=200)
        .map(|i| {
            let t = 0.1 * i as f64;
            (t, 3.0 * (-0.5 * t).exp() * (1.0 + noise.sample(&mut rng)))
        })
        .collect();
    let fit = fit_decay(&series, (2.0, 20.0)).unwrap();
    assert!((0.45..=0.55).contains(&fit.delta), "{fit:?}");
    assert!(fit.r_squared > 0.99, "{fit:?}");
}

#[test]
fn decay_fit_needs_enough_samples() {
    let series: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, (-(i as f64)).exp())).collect();
    assert!(fit_decay(&series, (0.0, 5.0)).is_err());
}
