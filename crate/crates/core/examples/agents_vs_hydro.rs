//! Agents sampled from the initial density follow the hydrodynamic solution.

use eulerflock::runner::execute;
use eulerflock::Scenario;

fn main() -> eulerflock::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/agents_vs_hydro.scn");
    let scenario = Scenario::from_file(path)?;
    let (trajectory, agents, summary) = execute(&scenario)?;
    let agents = agents.expect("scenario has an [agents] section");
    let hydro = trajectory.records.last().expect("records");
    let last = agents.last().expect("agent states");
    println!("t = {}: hydro V {:.4e}, agent V {:.4e}", hydro.t, hydro.v, last.velocity_diameter());
    if let Some(a) = summary.agents {
        println!("density L1 error {:.3e} with {} agents", a.density_l1_error.unwrap_or(f64::NAN), a.count);
        if let Some(f) = a.velocity_fit.fit() {
            println!("agent velocity decay rate {:.4}", f.delta);
        }
    }
    Ok(())
}
