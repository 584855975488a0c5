//! Spectral operators against their slow references.

use eulerflock::kernels::{commutator_force, mt_normalized_force};
use eulerflock::oracle::{self, TrigPolynomial};
use eulerflock::spectral::{dissipation_pointwise, fractional_constant, fractional_laplacian_apply};
use eulerflock::{Field, KernelSpec, PeriodicGrid, Profile};

fn main() -> eulerflock::Result<()> {
    for alpha in [0.5, 1.0, 1.5] {
        let fast = fractional_constant(alpha)?;
        let exact = oracle::fractional_constant_closed_form(alpha)?;
        println!("c_alpha({alpha}): {fast:.15} vs {exact:.15}");
    }

    let grid = PeriodicGrid::torus(64)?;
    let p = TrigPolynomial::new(0.5, vec![1.0, 0.0, -0.3], vec![0.0, 0.7]);
    let fast = fractional_laplacian_apply(&p.sample(&grid), 1.2)?;
    let worst = (0..grid.n())
        .map(|j| Ok((fast.values()[j] - oracle::fractional_laplacian_direct(&p, 1.2, grid.x(j))?).abs()))
        .collect::<eulerflock::Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    println!("fractional Laplacian, alpha = 1.2: sup error {worst:.2e}");

    let fine = PeriodicGrid::torus(512)?;
    let d = dissipation_pointwise(&p.sample(&fine), 40, 1.2)?;
    let direct = oracle::dissipation_direct(&p, 1.2, fine.x(40))?;
    println!("dissipation at x = {:.4}: {d:.10} vs {direct:.10}", fine.x(40));

    let grid = PeriodicGrid::torus(256)?;
    let rho = Field::from_fn(grid, |x| 1.0 + 0.5 * x.cos());
    let u = Field::from_fn(grid, |x| (2.0 * x).sin());
    let profile = Profile::RaisedCosine { a: 2.0, b: 1.0 };
    let bounded = KernelSpec::bounded(profile.clone(), grid.length())?;
    let mt = KernelSpec::motsch_tadmor(profile, grid.length())?;
    let e1 = commutator_force(&bounded, &rho, &u)?.sub(&oracle::commutator_force_direct(&bounded, &rho, &u)?)?;
    let e2 = mt_normalized_force(&mt, &rho, &u)?.sub(&oracle::mt_force_direct(&mt, &rho, &u)?)?;
    println!("commutator force error {:.2e}, normalized force error {:.2e}", e1.sup_norm(), e2.sup_norm());
    Ok(())
}
