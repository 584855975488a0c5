//! Normalized alignment: the velocity decay rate does not depend on mass.

use eulerflock::{run_sweep, Scenario};

fn main() -> eulerflock::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/mt_alignment.scn");
    let mut scenario = Scenario::from_file(path)?.with_override("step.t_end", 8.0)?;
    scenario.output.fit_window = Some((2.0, 8.0));
    scenario.output.directory = std::env::temp_dir().join("eulerflock_mt_sweep").display().to_string();
    let report = run_sweep(&scenario, "mass", &[0.5, 1.0, 5.0, 10.0])?;
    for row in &report.rows {
        println!("mass {:>4}: delta_V {:.6}", row.value, row.delta("V").unwrap_or(f64::NAN));
    }
    println!("aggregate: {}", report.aggregate.display());
    Ok(())
}
