//! Exponential rate fits on a synthetic series.

use eulerflock::diagnostics::fit_decay;

fn main() -> eulerflock::Result<()> {
    let series: Vec<(f64, f64)> = (0..=100)
        .map(|i| {
            let t = 0.2 * i as f64;
            (t, 2.0 * (-0.75 * t).exp() * (1.0 + 0.01 * (7.0 * t).sin()))
        })
        .collect();
    let fit = fit_decay(&series, (4.0, 20.0))?;
    println!("delta {:.5}, amplitude {:.5}, r^2 {:.6}, {} samples", fit.delta, fit.amplitude, fit.r_squared, fit.samples);
    Ok(())
}
