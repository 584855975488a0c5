//! Sign of `u₀' + φ*ρ₀` decides between global smoothness and blow-up.

use eulerflock::diagnostics::threshold_classify;
use eulerflock::dynamics::run;
use eulerflock::{FieldState, Scenario};

fn main() -> eulerflock::Result<()> {
    for name in ["subcritical", "supercritical"] {
        let path = format!("{}/scenarios/{name}.scn", env!("CARGO_MANIFEST_DIR"));
        let scenario = Scenario::from_file(path)?;
        let kernel = scenario.kernel()?;
        let (rho, u) = scenario.initial.sample(&scenario.grid()?)?;
        let class = threshold_classify(&FieldState::new(rho, u, 0.0)?, &kernel)?;
        let trajectory = run(&scenario)?;
        print!("{name}: min e0 = {:+.4} ({}), ", class.min_e0, if class.subcritical { "sub" } else { "super" });
        match trajectory.blow_up() {
            Some(b) => println!("blow-up ({:?}) at t = {:.3}", b.reason, b.t),
            None => println!("smooth up to t = {}, sup|u_x| = {:.2e}", trajectory.last().t(), trajectory.records.last().unwrap().sup_ux),
        }
    }
    Ok(())
}
