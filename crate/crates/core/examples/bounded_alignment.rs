//! Smooth data under a bounded kernel: velocity diameter decay against the
//! rate `ι_φ ∫ρ` and the decay of higher derivatives.

use eulerflock::runner::execute;
use eulerflock::Scenario;

fn main() -> eulerflock::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/bounded_alignment.scn");
    let scenario = Scenario::from_file(path)?;
    let kernel = scenario.kernel()?;
    let (trajectory, _, summary) = execute(&scenario)?;
    let mass = trajectory.initial().rho().integral();
    println!("rate bound iota * mass = {:.4}", kernel.iota() * mass);
    for (name, outcome) in &summary.fits {
        match outcome.fit() {
            Some(f) => println!("{name:>15}: delta {:.4}, r^2 {:.4}", f.delta, f.r_squared),
            None => println!("{name:>15}: no fit"),
        }
    }
    let last = trajectory.records.last().expect("at least one record");
    println!("t = {}: V = {:.3e}, mass drift {:.1e}", last.t, last.v, summary.conservation.mass_relative);
    Ok(())
}
