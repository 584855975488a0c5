//! Acceptance suite: one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use eulerflock::agents::{run_agents, AgentState, Normalization};
use eulerflock::diagnostics::{enhancement_ratio, threshold_classify};
use eulerflock::dynamics::{StepOutcome, Stepper};
use eulerflock::kernels::{commutator_force, kernel_bounds, mt_normalized_force, periodized_kernel_eval};
use eulerflock::oracle::{self, TrigPolynomial};
use eulerflock::runner::{self, density_l1_error, residual_fit, RunReport, EXIT_BLOW_UP, EXIT_OK};
use eulerflock::spectral::fractional_laplacian_apply;
use eulerflock::{FieldState, Field, KernelSpec, PeriodicGrid, Profile, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<Vec<String>, String>;

fn scenario(name: &str) -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.scn"));
    Scenario::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn run_in(s: &Scenario, dir: &Path) -> Result<RunReport, String> {
    runner::run_scenario_in(s, dir).map_err(|e| e.to_string())
}

fn require(ok: bool, what: String, notes: &mut Vec<String>) -> Result<(), String> {
    if ok {
        notes.push(what);
        Ok(())
    } else {
        Err(what)
    }
}

fn fit_of(report: &RunReport, series: &str) -> Result<(f64, f64), String> {
    match report.summary.fits.get(series).and_then(|f| f.fit()) {
        Some(f) => Ok((f.delta, f.r_squared)),
        None => Err(format!("no fit for {series}: {:?}", report.summary.fits.get(series))),
    }
}

fn ac1(tmp: &Path) -> Check {
    let s = scenario("bounded_alignment");
    let r = run_in(&s, &tmp.join("ac1"))?;
    let c = r.summary.conservation;
    let mut notes = vec![];
    require(r.exit_code() == EXIT_OK, format!("exit {}", r.exit_code()), &mut notes)?;
    require(c.mass_relative <= 1e-8, format!("|dM|/M = {:.2e}", c.mass_relative), &mut notes)?;
    require(c.momentum_absolute <= 1e-7, format!("|dP| = {:.2e}", c.momentum_absolute), &mut notes)?;
    let e = c.e_integral_relative.ok_or("integral of e0 vanishes")?;
    require(e <= 1e-6, format!("|d int e|/|int e0| = {e:.2e}"), &mut notes)?;
    Ok(notes)
}

fn ac2(tmp: &Path) -> Check {
    let mut notes = vec![];
    let s = scenario("bounded_alignment");
    let r = run_in(&s, &tmp.join("ac2"))?;
    let kernel = s.kernel().map_err(|e| e.to_string())?;
    let (iota, _) = kernel_bounds(&kernel);
    let mass = r.trajectory.initial().rho().integral();
    let (delta, r2) = fit_of(&r, "V")?;
    require(
        delta >= 0.95 * mass * iota && r2 >= 0.99,
        format!("delta_V = {delta:.4} vs M iota = {:.4}, r2 = {r2:.6}", mass * iota),
        &mut notes,
    )?;

    let s = scenario("all_to_all");
    let r = run_in(&s, &tmp.join("ac2_const"))?;
    let exact = r.trajectory.initial().rho().integral();
    let (delta, r2) = fit_of(&r, "V")?;
    require(
        (delta - exact).abs() <= 0.1 * exact && r2 >= 0.99,
        format!("phi = 1: delta_V = {delta:.4} vs exact {exact:.4}, r2 = {r2:.6}"),
        &mut notes,
    )?;
    Ok(notes)
}

fn ac3(tmp: &Path) -> Check {
    let mut notes = vec![];
    let mut s = scenario("mt_alignment");
    s.output.directory = tmp.join("ac3").to_string_lossy().into_owned();
    let sweep = runner::run_sweep(&s, "mass", &[0.5, 1.0, 5.0, 10.0]).map_err(|e| e.to_string())?;
    let (iota, sup) = kernel_bounds(&s.kernel().map_err(|e| e.to_string())?);
    let rates = sweep
        .rows
        .iter()
        .map(|r| r.delta("V").ok_or(format!("no V fit at mass {}", r.value)))
        .collect::<Result<Vec<_>, _>>()?;
    let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    require((hi - lo) / lo < 0.1, format!("delta_V in [{lo:.6}, {hi:.6}]"), &mut notes)?;
    require(
        lo >= 0.9 * iota / sup,
        format!("min delta_V {lo:.4} vs iota/I = {:.4}", iota / sup),
        &mut notes,
    )?;
    Ok(notes)
}

fn ac4(tmp: &Path) -> Check {
    let mut notes = vec![];
    let s = scenario("subcritical");
    let r = run_in(&s, &tmp.join("ac4"))?;
    require(r.exit_code() == EXIT_OK, format!("exit {}", r.exit_code()), &mut notes)?;
    for series in ["sup_ux", "sup_uxx"] {
        let (delta, r2) = fit_of(&r, series)?;
        require(delta > 0.0 && r2 >= 0.95, format!("{series}: delta {delta:.4}, r2 {r2:.5}"), &mut notes)?;
    }
    let window = (0.5 * s.step.t_end, s.step.t_end);
    let fit = residual_fit(&r.trajectory, window).map_err(|e| e.to_string())?;
    require(
        fit.delta > 0.0 && fit.r_squared >= 0.95,
        format!(
            "flock residual on [{}, {}]: delta {:.4}, r2 {:.5}",
            window.0, window.1, fit.delta, fit.r_squared
        ),
        &mut notes,
    )?;
    Ok(notes)
}

fn ac5(tmp: &Path) -> Check {
    let mut notes = vec![];
    let s = scenario("subcritical")
        .with_override("step.t_end", 50.0)
        .map_err(|e| e.to_string())?;
    let r = run_in(&s, &tmp.join("ac5_sub"))?;
    require(r.exit_code() == EXIT_OK, format!("subcritical exit {}", r.exit_code()), &mut notes)?;
    let min_e = r.trajectory.records.iter().map(|x| x.min_e).fold(f64::INFINITY, f64::min);
    require(min_e > 0.0, format!("min e over [0, 50] = {min_e:.4}"), &mut notes)?;
    let early = r
        .trajectory
        .records
        .iter()
        .filter(|x| x.t <= 5.0)
        .map(|x| x.sup_ux)
        .fold(0.0, f64::max);
    let worst = r.trajectory.records.iter().map(|x| x.sup_ux).fold(0.0, f64::max);
    require(
        worst <= 3.0 * early,
        format!("max sup|u_x| = {worst:.4} vs early max {early:.4}"),
        &mut notes,
    )?;

    let s = scenario("supercritical");
    let r = run_in(&s, &tmp.join("ac5_super"))?;
    let class = r.summary.threshold.ok_or("no threshold class")?;
    require(class.min_e0 < 0.0, format!("supercritical min e0 = {:.4}", class.min_e0), &mut notes)?;
    let b = r.summary.blow_up.ok_or("supercritical run completed without blow-up")?;
    require(
        r.exit_code() == EXIT_BLOW_UP && b.t < 50.0,
        format!("blow-up ({:?}) at t = {:.4}, exit {}", b.reason, b.t, r.exit_code()),
        &mut notes,
    )?;
    Ok(notes)
}

fn singular_suite(name: &str, tmp: &Path) -> Check {
    let mut notes = vec![];
    let s = scenario(name);
    let r = run_in(&s, &tmp.join(name))?;
    require(r.exit_code() == EXIT_OK, format!("exit {}", r.exit_code()), &mut notes)?;
    let recs = &r.trajectory.records;
    let early_min = recs.iter().filter(|x| x.t <= 1.0).map(|x| x.min_rho).fold(f64::INFINITY, f64::min);
    let early_max = recs.iter().filter(|x| x.t <= 1.0).map(|x| x.max_rho).fold(0.0, f64::max);
    let late = recs.iter().filter(|x| x.t >= 1.0);
    let late_min = late.clone().map(|x| x.min_rho).fold(f64::INFINITY, f64::min);
    let late_max = late.map(|x| x.max_rho).fold(0.0, f64::max);
    require(
        late_min >= 0.9 * early_min && late_max <= 1.1 * early_max,
        format!("rho in [{late_min:.4}, {late_max:.4}] vs early [{early_min:.4}, {early_max:.4}]"),
        &mut notes,
    )?;
    let q0 = recs[0].q.ok_or("Q missing")?;
    let (mut qlo, mut qhi) = (f64::INFINITY, 0.0f64);
    for x in recs.iter().filter(|x| x.t <= 10.0) {
        let ratio = x.q.ok_or("Q missing")? / q0;
        qlo = qlo.min(ratio);
        qhi = qhi.max(ratio);
    }
    require(
        qlo >= 0.999 && qhi <= 1.001,
        format!("Q/Q0 in [{qlo:.9}, {qhi:.9}]"),
        &mut notes,
    )?;
    for series in ["sup_ux", "sup_uxx", "l2_uxxx"] {
        let (delta, r2) = fit_of(&r, series)?;
        require(delta > 0.0 && r2 >= 0.95, format!("{series}: delta {delta:.4}, r2 {r2:.5}"), &mut notes)?;
    }
    let (delta, r2) = fit_of(&r, "flock_residual")?;
    let w = s.residual_window();
    require(
        delta > 0.0 && r2 >= 0.95,
        format!("flock residual on [{}, {}]: delta {delta:.4}, r2 {r2:.5}", w.0, w.1),
        &mut notes,
    )?;
    Ok(notes)
}

fn ac6(tmp: &Path) -> Check {
    let mut notes = vec![];
    for (label, name) in [("alpha 1", "singular_alpha1"), ("alpha 1.5", "singular_alpha15")] {
        let n = singular_suite(name, tmp).map_err(|e| format!("{label}: {e}"))?;
        notes.push(format!("{label}: {}", n.join("; ")));
    }
    Ok(notes)
}

fn random_poly(rng: &mut ChaCha8Rng) -> TrigPolynomial {
    let degree = rng.random_range(1..=8);
    let mut coeff = || rng.random_range(-1.0..1.0);
    let a0 = coeff();
    let cos = (0..degree).map(|_| coeff()).collect();
    let sin = (0..degree).map(|_| coeff()).collect();
    TrigPolynomial::new(a0, cos, sin)
}

fn ac7(_tmp: &Path) -> Check {
    let mut notes = vec![];
    let err = |e: eulerflock::FlockError| e.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = PeriodicGrid::torus(64).map_err(err)?;
    for alpha in [1.0, 1.5] {
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let p = random_poly(&mut rng);
            let fast = fractional_laplacian_apply(&p.sample(&grid), alpha).map_err(err)?;
            for j in 0..grid.n() {
                let direct = oracle::fractional_laplacian_direct(&p, alpha, grid.x(j)).map_err(err)?;
                worst = worst.max((fast.values()[j] - direct).abs());
            }
        }
        require(worst <= 1e-6, format!("fractional Laplacian alpha {alpha}: sup diff {worst:.2e}"), &mut notes)?;
    }

    let grid = PeriodicGrid::torus(256).map_err(err)?;
    let rho = Field::from_fn(grid, |x| 1.0 + 0.5 * x.cos());
    let u = Field::from_fn(grid, f64::sin);
    let profile = Profile::RaisedCosine { a: 2.0, b: 1.0 };
    let k = KernelSpec::bounded(profile.clone(), grid.length()).map_err(err)?;
    let d = commutator_force(&k, &rho, &u)
        .map_err(err)?
        .sub(&oracle::commutator_force_direct(&k, &rho, &u).map_err(err)?)
        .map_err(err)?
        .sup_norm();
    require(d <= 1e-8, format!("commutator force: sup diff {d:.2e}"), &mut notes)?;
    let k = KernelSpec::motsch_tadmor(profile, grid.length()).map_err(err)?;
    let d = mt_normalized_force(&k, &rho, &u)
        .map_err(err)?
        .sub(&oracle::mt_force_direct(&k, &rho, &u).map_err(err)?)
        .map_err(err)?
        .sup_norm();
    require(d <= 1e-8, format!("normalized force: sup diff {d:.2e}"), &mut notes)?;

    let v = periodized_kernel_eval(1.0, PI, 64).map_err(err)?;
    require((v - 0.25).abs() <= 1e-10, format!("kernel(1, pi) - 1/4 = {:.2e}", v - 0.25), &mut notes)?;
    Ok(notes)
}

fn integrate_fixed(stepper: &Stepper, s0: &FieldState, dt: f64, t_end: f64) -> Result<FieldState, String> {
    let steps = (t_end / dt).round() as usize;
    let mut s = s0.clone();
    for _ in 0..steps {
        s = match stepper.step(&s, dt).map_err(|e| e.to_string())? {
            StepOutcome::Advanced(next) => next,
            StepOutcome::BlowUp(b) => return Err(format!("blow-up at t = {}", b.t)),
        };
    }
    Ok(s)
}

fn state_distance(a: &FieldState, b: &FieldState) -> f64 {
    let dr = a.rho().sub(b.rho()).expect("same grid").sup_norm();
    let du = a.u().sub(&b.u()).expect("same grid").sup_norm();
    dr.max(du)
}

fn ac8(_tmp: &Path) -> Check {
    let mut notes = vec![];
    let s = scenario("bounded_alignment");
    let grid = s.grid().map_err(|e| e.to_string())?;
    let kernel = s.kernel().map_err(|e| e.to_string())?;
    let (rho, u) = s.initial.sample(&grid).map_err(|e| e.to_string())?;
    let s0 = FieldState::new(rho, u, 0.0).map_err(|e| e.to_string())?;
    let stepper = Stepper::new(&kernel, &grid).map_err(|e| e.to_string())?;
    let t_end = 1.0;
    let dts = [0.02, 0.01, 0.005];
    let reference = integrate_fixed(&stepper, &s0, dts[2] / 16.0, t_end)?;
    let errors = dts
        .iter()
        .map(|&dt| integrate_fixed(&stepper, &s0, dt, t_end).map(|s| state_distance(&s, &reference)))
        .collect::<Result<Vec<_>, _>>()?;
    notes.push(format!("errors {:.3e}, {:.3e}, {:.3e}", errors[0], errors[1], errors[2]));
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        require(order >= 2.7, format!("observed order {order:.3}"), &mut notes)?;
    }
    Ok(notes)
}

fn ac9(tmp: &Path) -> Check {
    let mut notes = vec![];
    let err = |e: eulerflock::FlockError| e.to_string();
    let kernel = KernelSpec::bounded(Profile::Constant { value: 1.0 }, 2.0 * PI).map_err(err)?;
    let (x0, v0) = ([0.5, 4.0], [0.3, -0.7]);
    let start = AgentState::new(x0.to_vec(), v0.to_vec(), kernel.length()).map_err(err)?;
    let states = run_agents(&start, &kernel, Normalization::mean(), 1e-3, 5.0, 0.1).map_err(err)?;
    let mut worst: f64 = 0.0;
    for st in &states {
        let (x, v) = oracle::two_body_constant(x0, v0, 1.0, st.t());
        for i in 0..2 {
            let dx = eulerflock::grid::torus_distance(st.x()[i] - x[i], kernel.length());
            worst = worst.max(dx.abs()).max((st.v()[i] - v[i]).abs());
        }
    }
    require(worst <= 1e-8, format!("two-body max deviation {worst:.2e}"), &mut notes)?;

    let s = scenario("agents_vs_hydro");
    let hydro = run_in(&s, &tmp.join("ac9"))?;
    let pde = hydro.trajectory.last().clone();
    let initial = hydro.trajectory.initial();
    let kernel = s.kernel().map_err(err)?;
    let cfg = s.agents.clone().ok_or("scenario has no agents")?;
    let normalization = Normalization::Mean {
        total_mass: initial.rho().integral(),
    };
    let l1 = |count: usize, seed: u64| -> Result<f64, String> {
        let a0 = AgentState::sample(initial.rho(), &initial.u(), count, seed).map_err(err)?;
        let states = run_agents(&a0, &kernel, normalization, cfg.dt, s.step.t_end, s.step.t_end).map_err(err)?;
        let width = s.length / (count as f64).sqrt();
        density_l1_error(states.last().expect("final state"), &pde, width).map_err(err)
    };
    let mut wins = 0;
    let mut rows = vec![];
    for seed in 1..=5 {
        let (small, large) = (l1(200, seed)?, l1(2000, seed)?);
        if large < small {
            wins += 1;
        }
        rows.push(format!("{large:.2e}<{small:.2e}"));
    }
    require(wins >= 4, format!("L1(N=2000) < L1(N=200) in {wins}/5 seeds [{}]", rows.join(", ")), &mut notes)?;
    Ok(notes)
}

fn ac10(tmp: &Path) -> Check {
    let mut notes = vec![];
    let s = scenario("two_bump_line");
    let r = run_in(&s, &tmp.join("ac10"))?;
    require(r.exit_code() == EXIT_OK, format!("exit {}", r.exit_code()), &mut notes)?;
    let recs = &r.trajectory.records;
    let mut worst = f64::NEG_INFINITY;
    for w in recs.windows(2) {
        let (a, b) = (w[0].free_energy.ok_or("no free energy")?, w[1].free_energy.ok_or("no free energy")?);
        worst = worst.max((b - a) / (w[1].t - w[0].t));
    }
    require(worst <= 1e-3, format!("max free-energy growth rate {worst:.2e}"), &mut notes)?;

    let kernel = s.kernel().map_err(|e| e.to_string())?;
    let mass = r.trajectory.initial().rho().integral();
    let (d0, v0) = (recs[0].d.ok_or("no D")?, recs[0].v);
    let target = |d: f64| -> f64 {
        let lo = kernel.integral_from_zero(d0).expect("within period");
        mass * (kernel.integral_from_zero(d).expect("within period") - lo) - v0
    };
    let (mut lo, mut hi) = (d0, s.length);
    if target(hi) < 0.0 {
        return Err("D_inf exceeds the period".into());
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if target(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let d_inf = 0.5 * (lo + hi);
    let d_max = recs.iter().filter_map(|x| x.d).fold(0.0, f64::max);
    let d_end = recs.last().and_then(|x| x.d).ok_or("no D")?;
    let dx = s.length / s.n as f64;
    notes.push(format!(
        "D0 = {d0:.4}, D_end = {d_end:.4}, D_inf = {d_inf:.4}, within one cell: {}",
        d_end <= d_inf + dx
    ));
    require(d_max <= 1.2 * d_inf, format!("max D = {d_max:.4} <= 1.2 D_inf"), &mut notes)?;
    Ok(notes)
}

fn ac11(tmp: &Path) -> Check {
    let mut notes = vec![];
    let err = |e: eulerflock::FlockError| e.to_string();
    let grid = PeriodicGrid::torus(256).map_err(err)?;
    let u = Field::from_fn(grid, |x| x.sin() + 0.3 * (2.0 * x).cos() + 0.1 * (3.0 * x + 0.4).sin());
    for alpha in [1.0, 1.5] {
        let base = enhancement_ratio(&u, alpha).map_err(err)?;
        let scaled = enhancement_ratio(&u.scaled(3.7), alpha).map_err(err)?;
        let lifted = enhancement_ratio(&u.map(|v| v + 5.0), alpha).map_err(err)?;
        let moved = enhancement_ratio(&u.roll(37), alpha).map_err(err)?;
        let worst = [scaled, lifted, moved]
            .iter()
            .map(|r| ((r - base) / base).abs())
            .fold(0.0, f64::max);
        require(
            worst <= 1e-6,
            format!("enhancement ratio alpha {alpha} = {base:.6}, worst relative change {worst:.2e}"),
            &mut notes,
        )?;
    }

    let s = scenario("bounded_alignment");
    let kernel = s.kernel().map_err(err)?;
    let (rho, u) = s.initial.sample(&grid).map_err(err)?;
    let a = threshold_classify(&FieldState::new(rho.clone(), u.clone(), 0.0).map_err(err)?, &kernel).map_err(err)?;
    let b = threshold_classify(&FieldState::new(rho, u.map(|v| v - 2.5), 0.0).map_err(err)?, &kernel).map_err(err)?;
    require(
        (a.min_e0 - b.min_e0).abs() <= 1e-12 && a.subcritical == b.subcritical,
        format!("threshold under velocity shift: {:.15} vs {:.15}", a.min_e0, b.min_e0),
        &mut notes,
    )?;

    let mut s = scenario("bounded_alignment");
    s.output.snapshots = true;
    let dirs = [tmp.join("ac11_a"), tmp.join("ac11_b")];
    for d in &dirs {
        run_in(&s, d)?;
    }
    for file in ["diagnostics.csv", "snapshots.csv", "final_state.csv", "summary.json"] {
        let read = |d: &PathBuf| std::fs::read(d.join(file)).map_err(|e| e.to_string());
        require(read(&dirs[0])? == read(&dirs[1])?, format!("{file} bit-identical"), &mut notes)?;
    }
    Ok(notes)
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let criteria: [(&str, fn(&Path) -> Check); 11] = [
        ("AC1 conservation", ac1),
        ("AC2 velocity-diameter rate", ac2),
        ("AC3 normalized-kernel mass sweep", ac3),
        ("AC4 subcritical decay", ac4),
        ("AC5 threshold dichotomy", ac5),
        ("AC6 singular-kernel suite", ac6),
        ("AC7 operator oracles", ac7),
        ("AC8 temporal order", ac8),
        ("AC9 particle consistency", ac9),
        ("AC10 line free energy", ac10),
        ("AC11 invariances and determinism", ac11),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check(tmp.path());
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(notes) => println!("PASS {name} ({secs:.1}s): {}", notes.join("; ")),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1}s): {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
