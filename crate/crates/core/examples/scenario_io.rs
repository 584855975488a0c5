//! Parse a scenario, override one parameter and print the canonical text.

use eulerflock::Scenario;

const TEXT: &str = "
[run]
name = demo

[grid]
n = 128
length = 2pi

[kernel]
variant = motsch_tadmor
profile = gaussian
amplitude = 1
sigma = 0.8

[initial]
profile = perturbed_constant
mass = 1
rho_amplitude = 0.3
u_amplitude = 0.2

[step]
t_end = 5
";

fn main() -> eulerflock::Result<()> {
    let scenario = Scenario::parse(TEXT)?.with_override("mass", 4.0)?;
    print!("{}", scenario.to_text());
    assert_eq!(Scenario::parse(&scenario.to_text())?, scenario);

    let broken = TEXT.replace("n = 128", "n = 127").replace("sigma = 0.8", "sigma = -1");
    if let Err(e) = Scenario::parse(&broken) {
        println!("\nrejected:\n{e}");
    }
    Ok(())
}
