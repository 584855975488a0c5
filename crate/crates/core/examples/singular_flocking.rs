//! Fractional kernel: `e/ρ` is transported, the velocity aligns and the
//! density relaxes to a travelling profile.

use eulerflock::runner::execute;
use eulerflock::Scenario;

fn main() -> eulerflock::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/singular_alpha1.scn");
    let scenario = Scenario::from_file(path)?.with_override("step.t_end", 10.0)?;
    let (trajectory, _, summary) = execute(&scenario)?;
    let q0 = trajectory.records[0].q.unwrap_or(f64::NAN);
    for r in trajectory.records.iter().step_by(20) {
        println!(
            "t = {:5.2}  V = {:.3e}  Q/Q0 = {:.12}  residual = {}",
            r.t,
            r.v,
            r.q.unwrap_or(f64::NAN) / q0,
            r.flock_residual.map_or("-".into(), |x| format!("{x:.3e}"))
        );
    }
    println!("ubar = {:.6}", summary.ubar);
    for (name, outcome) in &summary.fits {
        if let Some(f) = outcome.fit() {
            println!("{name:>15}: delta {:.4}", f.delta);
        }
    }
    Ok(())
}
