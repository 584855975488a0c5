use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use eulerflock::agents::{run_agents, AgentState, Normalization};
use eulerflock::diagnostics::format_number;
use eulerflock::kernels::{commutator_force, mt_normalized_force, periodized_kernel_eval};
use eulerflock::oracle::{self, TrigPolynomial};
use eulerflock::runner::{self, EXIT_ERROR};
use eulerflock::spectral::{dissipation_pointwise, fractional_constant, fractional_laplacian_apply};
use eulerflock::{Field, FlockError, KernelSpec, PeriodicGrid, Profile, Result, Scenario};

#[derive(Parser)]
#[command(name = "eulerflock", version, about = "Euler alignment simulator and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file. Exit 0 on completion, 2 on blow-up, 1 on error.
    Simulate { file: PathBuf },
    /// Run a scenario once per value of one parameter.
    Sweep {
        file: PathBuf,
        /// `section.key`, or one of `mass`, `n`, `alpha`.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Check a scenario file and print its canonical form.
    Validate { file: PathBuf },
    /// Compare a fast operator with its brute-force reference.
    Oracle {
        #[command(subcommand)]
        operator: Operator,
    },
}

#[derive(Subcommand)]
enum Operator {
    /// Fractional-Laplacian constant: quadrature vs closed form.
    CAlpha {
        #[arg(long)]
        alpha: f64,
    },
    /// Periodized kernel: tail-corrected sum vs long image sum.
    Kernel {
        #[arg(long)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, default_value_t = 1_000_000)]
        terms: usize,
    },
    /// Spectral fractional Laplacian vs direct quadrature on a trigonometric polynomial.
    Laplacian {
        #[arg(long)]
        alpha: f64,
        #[command(flatten)]
        poly: PolyArgs,
        #[arg(long, default_value_t = 64)]
        n: usize,
    },
    /// Pointwise dissipation: grid sum vs direct quadrature at grid point `index`.
    Dissipation {
        #[arg(long)]
        alpha: f64,
        #[command(flatten)]
        poly: PolyArgs,
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Alignment force for phi = a + b cos r, rho = 1 + 0.5 cos x, u = sin x: spectral vs direct sum.
    Force {
        #[arg(long, value_enum, default_value_t = ForceVariant::Bounded)]
        variant: ForceVariant,
        #[arg(long, default_value_t = 2.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, default_value_t = 256)]
        n: usize,
    },
    /// Two agents with unit interaction: integrator vs closed form.
    TwoBody {
        #[arg(long, default_value_t = 5.0)]
        t: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
}

#[derive(clap::Args)]
struct PolyArgs {
    /// Constant term.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    a0: f64,
    /// Cosine coefficients for k = 1, 2, ...
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    cos: Vec<f64>,
    /// Sine coefficients for k = 1, 2, ...
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    sin: Vec<f64>,
}

impl PolyArgs {
    fn polynomial(&self) -> TrigPolynomial {
        TrigPolynomial::new(self.a0, self.cos.clone(), self.sin.clone())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ForceVariant {
    Bounded,
    Mt,
}

fn report(pairs: &[(&str, f64)]) {
    for (k, v) in pairs {
        println!("{k} = {}", format_number(*v));
    }
}

fn oracle(op: Operator) -> Result<()> {
    match op {
        Operator::CAlpha { alpha } => {
            let fast = fractional_constant(alpha)?;
            let exact = oracle::fractional_constant_closed_form(alpha)?;
            report(&[("quadrature", fast), ("closed_form", exact), ("abs_diff", (fast - exact).abs())]);
        }
        Operator::Kernel { alpha, x, terms } => {
            let fast = periodized_kernel_eval(alpha, x, eulerflock::kernels::DEFAULT_TRUNCATION)?;
            let slow = oracle::periodized_kernel_bruteforce(alpha, x, terms)?;
            report(&[("fast", fast), ("reference", slow), ("abs_diff", (fast - slow).abs())]);
        }
        Operator::Laplacian { alpha, poly, n } => {
            let p = poly.polynomial();
            let grid = PeriodicGrid::torus(n)?;
            let fast = fractional_laplacian_apply(&p.sample(&grid), alpha)?;
            let mut worst: f64 = 0.0;
            for (j, v) in fast.values().iter().enumerate() {
                worst = worst.max((v - oracle::fractional_laplacian_direct(&p, alpha, grid.x(j))?).abs());
            }
            report(&[("sup_diff", worst), ("sup_value", fast.sup_norm())]);
        }
        Operator::Dissipation { alpha, poly, n, index } => {
            let p = poly.polynomial();
            let grid = PeriodicGrid::torus(n)?;
            if index >= n {
                return Err(FlockError::InvalidArgument(format!("index {index} out of range for n = {n}")));
            }
            let fast = dissipation_pointwise(&p.sample(&grid), index, alpha)?;
            let slow = oracle::dissipation_direct(&p, alpha, grid.x(index))?;
            report(&[("grid_sum", fast), ("reference", slow), ("rel_diff", ((fast - slow) / slow).abs())]);
        }
        Operator::Force { variant, a, b, n } => {
            let grid = PeriodicGrid::torus(n)?;
            let profile = Profile::RaisedCosine { a, b };
            let rho = Field::from_fn(grid, |x| 1.0 + 0.5 * x.cos());
            let u = Field::from_fn(grid, f64::sin);
            let (fast, slow) = match variant {
                ForceVariant::Bounded => {
                    let k = KernelSpec::bounded(profile, grid.length())?;
                    (commutator_force(&k, &rho, &u)?, oracle::commutator_force_direct(&k, &rho, &u)?)
                }
                ForceVariant::Mt => {
                    let k = KernelSpec::motsch_tadmor(profile, grid.length())?;
                    (mt_normalized_force(&k, &rho, &u)?, oracle::mt_force_direct(&k, &rho, &u)?)
                }
            };
            report(&[("sup_diff", fast.sub(&slow)?.sup_norm()), ("sup_value", slow.sup_norm())]);
        }
        Operator::TwoBody { t, dt } => {
            let kernel = KernelSpec::bounded(Profile::Constant { value: 1.0 }, 2.0 * std::f64::consts::PI)?;
            let start = AgentState::new(vec![1.0, 2.0], vec![0.5, -0.25], kernel.length())?;
            let states = run_agents(&start, &kernel, Normalization::mean(), dt, t, t)?;
            let last = states.last().expect("final state");
            let (_, v) = oracle::two_body_constant([1.0, 2.0], [0.5, -0.25], 1.0, t);
            let err = (last.v()[0] - v[0]).abs().max((last.v()[1] - v[1]).abs());
            report(&[("v1", last.v()[0]), ("v1_exact", v[0]), ("max_abs_diff", err)]);
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Simulate { file } => {
            let scenario = Scenario::from_file(&file)?;
            let report = runner::run_scenario(&scenario)?;
            let s = &report.summary;
            match s.blow_up {
                Some(b) => println!(
                    "{}: blow-up ({:?}) at t = {} after {} steps; output in {}",
                    s.name,
                    b.reason,
                    b.t,
                    s.steps,
                    report.directory.display()
                ),
                None => println!(
                    "{}: completed t = {} in {} steps; output in {}",
                    s.name,
                    s.t_final,
                    s.steps,
                    report.directory.display()
                ),
            }
            Ok(report.exit_code() as u8)
        }
        Command::Sweep { file, axis, values } => {
            let scenario = Scenario::from_file(&file)?;
            let report = runner::run_sweep(&scenario, &axis, &values)?;
            for row in &report.rows {
                let delta = row.delta("V").map(|d| format!("{d:.6}")).unwrap_or_else(|| "-".into());
                println!("{} = {}: exit {}, delta_V {delta}", report.axis, row.value, row.summary.exit_code);
            }
            println!("aggregate written to {}", report.aggregate.display());
            Ok(0)
        }
        Command::Validate { file } => {
            let scenario = Scenario::from_file(&file)?;
            print!("{}", scenario.to_text());
            Ok(0)
        }
        Command::Oracle { operator } => oracle(operator).map(|_| 0),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
