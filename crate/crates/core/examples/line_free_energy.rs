//! Two bumps on a long torus merge; the free energy `V + M ∫₀^D φ` decreases.

use eulerflock::dynamics::run;
use eulerflock::Scenario;

fn main() -> eulerflock::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/two_bump_line.scn");
    let scenario = Scenario::from_file(path)?.with_override("step.t_end", 20.0)?;
    let trajectory = run(&scenario)?;
    for r in trajectory.records.iter().step_by(20) {
        println!(
            "t = {:5.1}  V = {:.4e}  D = {:.4}  E = {:.6}",
            r.t,
            r.v,
            r.d.unwrap_or(f64::NAN),
            r.free_energy.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
