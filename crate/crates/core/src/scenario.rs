//! Scenario files: a sectioned `key = value` format.
//!
//! ```text
//! # comment
//! [run]
//! name = bounded_alignment
//! mode = torus              # torus | line
//!
//! [grid]
//! n = 256
//! length = 2pi              # plain number, `pi`, or `<number>pi`
//!
//! [kernel]
//! variant = bounded         # bounded | motsch_tadmor (alias mt) | singular
//! profile = raised_cosine   # constant | raised_cosine | gaussian | algebraic | tabulated
//! a = 2
//! b = 1
//!
//! [initial]
//! profile = perturbed_constant
//! rho_amplitude = 0.5
//! u_amplitude = 0.1
//!
//! [step]
//! t_end = 20
//!
//! [output]
//! cadence = 0.1
//!
//! [agents]                  # optional
//! count = 2000
//! ```
//!
//! Every key the parser recognizes is listed in [`Scenario::to_text`]'s
//! output, which writes all defaults explicitly.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::agents::Normalization;
use crate::diagnostics::Mode;
use crate::dynamics::{EConvention, StepControl};
use crate::error::{FlockError, Result, ScenarioIssue};
use crate::grid::{PeriodicGrid, MIN_POINTS};
use crate::initial::{BumpShape, InitialData};
use crate::kernels::{KernelSpec, KernelVariant, Profile, DEFAULT_TRUNCATION};

/// Output settings.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub cadence: f64,
    pub directory: String,
    pub snapshots: bool,
    pub support_eps: f64,
    pub fit_window: Option<(f64, f64)>,
    pub residual_window: Option<(f64, f64)>,
    pub blowup_factor: f64,
    pub rho_floor: f64,
    pub e_convention: Option<EConvention>,
}

/// Particle cross-check settings.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub count: usize,
    pub seed: u64,
    pub mollifier_width: f64,
    pub adaptive: bool,
    pub dt: f64,
    /// Mass carried by all agents together; defaults to `∫ρ₀`.
    pub total_mass: Option<f64>,
}

/// A complete, validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    pub n: usize,
    pub length: f64,
    pub kernel: KernelVariant,
    pub initial: InitialData,
    pub step: StepControl,
    pub output: OutputConfig,
    pub agents: Option<AgentConfig>,
}

/// Environment variable that replaces the base output directory.
pub const OUTPUT_DIR_ENV: &str = "EULERFLOCK_OUTPUT_DIR";

const SECTIONS: [&str; 7] = ["run", "grid", "kernel", "initial", "step", "output", "agents"];

impl Scenario {
    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.n, self.length)
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.kernel.clone(), self.length)
    }

    /// Convention used for `min_e`/`max_e` and the `∫e` residual.
    pub fn e_convention(&self, kernel: &KernelSpec) -> EConvention {
        self.output
            .e_convention
            .unwrap_or_else(|| EConvention::default_for(kernel))
    }

    /// Decay-fit window, by default the last 80% of the run.
    pub fn fit_window(&self) -> (f64, f64) {
        self.output
            .fit_window
            .unwrap_or((0.2 * self.step.t_end, self.step.t_end))
    }

    /// Flocking-residual fit window, by default the last half of the run.
    pub fn residual_window(&self) -> (f64, f64) {
        self.output
            .residual_window
            .unwrap_or((0.5 * self.step.t_end, self.step.t_end))
    }

    /// Agent normalization resolved against the hydrodynamic mass.
    pub fn agent_normalization(&self, hydro_mass: f64) -> Option<Normalization> {
        self.agents.as_ref().map(|a| {
            if a.adaptive {
                Normalization::Adaptive
            } else {
                Normalization::Mean {
                    total_mass: a.total_mass.unwrap_or(hydro_mass),
                }
            }
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| FlockError::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses and validates, reporting every problem found.
    pub fn parse(text: &str) -> Result<Self> {
        let mut issues = Vec::new();
        let table = lex(text, &mut issues);
        let scenario = build(&table, &mut issues);
        match scenario {
            Some(s) if issues.is_empty() => Ok(s),
            _ => Err(FlockError::Scenario(issues)),
        }
    }

    /// Canonical text form; `parse(to_text(s)) == s`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let num = |v: f64| format!("{v}");
        let pair = |p: (f64, f64)| format!("{}, {}", p.0, p.1);
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ");

        let _ = writeln!(out, "[run]\nname = {}\nmode = {}\n", self.name, self.mode.name());
        let _ = writeln!(out, "[grid]\nn = {}\nlength = {}\n", self.n, num(self.length));

        out.push_str("[kernel]\n");
        match &self.kernel {
            KernelVariant::Bounded(p) | KernelVariant::MotschTadmor(p) => {
                let variant = if matches!(self.kernel, KernelVariant::Bounded(_)) {
                    "bounded"
                } else {
                    "motsch_tadmor"
                };
                let _ = writeln!(out, "variant = {variant}\nprofile = {}", p.name());
                match p {
                    Profile::Constant { value } => {
                        let _ = writeln!(out, "value = {value}");
                    }
                    Profile::RaisedCosine { a, b } => {
                        let _ = writeln!(out, "a = {a}\nb = {b}");
                    }
                    Profile::Gaussian { amplitude, sigma } => {
                        let _ = writeln!(out, "amplitude = {amplitude}\nsigma = {sigma}");
                    }
                    Profile::Algebraic {
                        amplitude,
                        scale,
                        decay,
                    } => {
                        let _ = writeln!(out, "amplitude = {amplitude}\nscale = {scale}\ndecay = {decay}");
                    }
                    Profile::Tabulated { values } => {
                        let _ = writeln!(out, "values = {}", list(values));
                    }
                }
            }
            KernelVariant::Singular { alpha, truncation } => {
                let _ = writeln!(out, "variant = singular\nalpha = {alpha}\ntruncation = {truncation}");
            }
        }
        out.push('\n');

        out.push_str("[initial]\n");
        let _ = writeln!(out, "profile = {}", self.initial.name());
        match &self.initial {
            InitialData::PerturbedConstant {
                mass,
                rho_amplitude,
                rho_phase,
                u_mean,
                u_amplitude,
                u_phase,
                wavenumber,
            } => {
                let _ = writeln!(
                    out,
                    "mass = {mass}\nrho_amplitude = {rho_amplitude}\nrho_phase = {rho_phase}\n\
                     u_mean = {u_mean}\nu_amplitude = {u_amplitude}\nu_phase = {u_phase}\n\
                     wavenumber = {wavenumber}"
                );
            }
            InitialData::Bump {
                center,
                half_width,
                height,
                background,
                velocity,
                shape,
            } => {
                let _ = writeln!(
                    out,
                    "center = {center}\nhalf_width = {half_width}\nheight = {height}\n\
                     background = {background}\nvelocity = {velocity}\nshape = {}",
                    shape.name()
                );
            }
            InitialData::TwoBump {
                centers,
                half_width,
                heights,
                velocities,
                blend_width,
                shape,
            } => {
                let _ = writeln!(
                    out,
                    "centers = {}\nhalf_width = {half_width}\nheights = {}\nvelocities = {}\n\
                     blend_width = {blend_width}\nshape = {}",
                    list(centers),
                    list(heights),
                    list(velocities),
                    shape.name()
                );
            }
            InitialData::Tabulated { rho, u } => {
                let _ = writeln!(out, "rho = {}\nu = {}", list(rho), list(u));
            }
        }
        out.push('\n');

        let s = &self.step;
        let _ = writeln!(
            out,
            "[step]\ncfl_advective = {}\ncfl_dissipative = {}\ndt_max = {}\nt_end = {}\n",
            s.cfl_advective, s.cfl_dissipative, s.dt_max, s.t_end
        );

        let o = &self.output;
        let _ = writeln!(
            out,
            "[output]\ncadence = {}\ndirectory = {}\nsnapshots = {}\nsupport_eps = {}\n\
             blowup_factor = {}\nrho_floor = {}",
            o.cadence, o.directory, o.snapshots, o.support_eps, o.blowup_factor, o.rho_floor
        );
        if let Some(w) = o.fit_window {
            let _ = writeln!(out, "fit_window = {}", pair(w));
        }
        if let Some(w) = o.residual_window {
            let _ = writeln!(out, "residual_window = {}", pair(w));
        }
        if let Some(c) = o.e_convention {
            let _ = writeln!(out, "e_convention = {}", c.name());
        }

        if let Some(a) = &self.agents {
            let _ = writeln!(
                out,
                "\n[agents]\ncount = {}\nseed = {}\nmollifier_width = {}\nnormalization = {}\ndt = {}",
                a.count,
                a.seed,
                a.mollifier_width,
                if a.adaptive { "adaptive" } else { "mean" },
                a.dt
            );
            if let Some(m) = a.total_mass {
                let _ = writeln!(out, "total_mass = {m}");
            }
        }
        out
    }

    /// A copy with one scalar parameter replaced. `axis` is `section.key`,
    /// or one of the aliases `mass`, `n`, `alpha`.
    pub fn with_override(&self, axis: &str, value: f64) -> Result<Self> {
        let (section, key) = resolve_axis(axis)?;
        let text = self.to_text();
        let mut current = None;
        let mut found = false;
        let mut lines = Vec::new();
        for line in text.lines() {
            let trimmed = line.trim();
            if trimmed.starts_with('[') {
                current = Some(trimmed.trim_matches(|c| c == '[' || c == ']').to_string());
                lines.push(line.to_string());
                continue;
            }
            if current.as_deref() == Some(section) {
                if let Some((k, v)) = trimmed.split_once('=') {
                    if k.trim() == key {
                        if parse_number(v.trim()).is_none() {
                            return Err(FlockError::invalid(format!("axis {axis} is not a numeric parameter")));
                        }
                        let formatted = if INTEGER_KEYS.contains(&key) {
                            if value.fract() != 0.0 || value < 0.0 {
                                return Err(FlockError::invalid(format!(
                                    "axis {axis} takes non-negative integers, got {value}"
                                )));
                            }
                            format!("{}", value as u64)
                        } else {
                            format!("{value}")
                        };
                        lines.push(format!("{key} = {formatted}"));
                        found = true;
                        continue;
                    }
                }
            }
            lines.push(line.to_string());
        }
        if !found {
            return Err(FlockError::invalid(format!(
                "axis {axis} is not a sweepable parameter of this scenario"
            )));
        }
        Self::parse(&lines.join("\n"))
    }
}

const INTEGER_KEYS: [&str; 5] = ["n", "truncation", "wavenumber", "count", "seed"];

fn resolve_axis(axis: &str) -> Result<(&str, &str)> {
    let full = match axis {
        "mass" => "initial.mass",
        "n" => "grid.n",
        "alpha" => "kernel.alpha",
        other => other,
    };
    match full.split_once('.') {
        Some((s, k)) if SECTIONS.contains(&s) && !k.is_empty() => Ok((s, k)),
        _ => Err(FlockError::invalid(format!(
            "unknown sweep axis {axis}; use section.key or one of mass, n, alpha"
        ))),
    }
}

/// Accepts plain decimals, `pi`, `<number>pi` and `<number>*pi`.
fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    let v = if let Some(prefix) = s.strip_suffix("pi") {
        let prefix = prefix.trim().trim_end_matches('*').trim();
        let factor = if prefix.is_empty() {
            1.0
        } else if prefix == "-" {
            -1.0
        } else {
            prefix.parse::<f64>().ok()?
        };
        factor * PI
    } else {
        s.parse::<f64>().ok()?
    };
    v.is_finite().then_some(v)
}

type Table = BTreeMap<String, Section>;

#[derive(Debug, Default)]
struct Section {
    line: usize,
    entries: BTreeMap<String, (String, usize)>,
}

fn lex(text: &str, issues: &mut Vec<ScenarioIssue>) -> Table {
    let mut table = Table::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            if !content.ends_with(']') {
                issues.push(issue(line, format!("malformed section header {content:?}")));
                current = None;
                continue;
            }
            let name = content[1..content.len() - 1].trim().to_string();
            if !SECTIONS.contains(&name.as_str()) {
                issues.push(issue(line, format!("unknown section [{name}]")));
                current = None;
                continue;
            }
            if table.contains_key(&name) {
                issues.push(issue(line, format!("duplicate section [{name}]")));
            }
            table.entry(name.clone()).or_insert_with(|| Section {
                line,
                entries: BTreeMap::new(),
            });
            current = Some(name);
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            issues.push(issue(line, format!("expected key = value, found {content:?}")));
            continue;
        };
        let Some(section) = current.as_ref() else {
            issues.push(issue(line, "key outside of a known section"));
            continue;
        };
        let key = key.trim().to_string();
        let entries = &mut table.get_mut(section).expect("section registered").entries;
        if entries.contains_key(&key) {
            issues.push(issue(line, format!("duplicate key {section}.{key}")));
            continue;
        }
        entries.insert(key, (value.trim().to_string(), line));
    }
    table
}

fn issue(line: usize, message: impl Into<String>) -> ScenarioIssue {
    ScenarioIssue {
        line: Some(line),
        message: message.into(),
    }
}

/// Typed access to one section, remembering which keys were consumed.
struct Reader<'a> {
    name: &'static str,
    section: Option<&'a Section>,
    used: HashSet<String>,
}

impl<'a> Reader<'a> {
    fn new(table: &'a Table, name: &'static str) -> Self {
        Self {
            name,
            section: table.get(name),
            used: HashSet::new(),
        }
    }

    fn raw(&mut self, key: &str) -> Option<(&'a str, usize)> {
        self.used.insert(key.to_string());
        self.section
            .and_then(|s| s.entries.get(key))
            .map(|(v, l)| (v.as_str(), *l))
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.section
            .and_then(|s| s.entries.get(key))
            .map(|(_, l)| *l)
            .or(self.section.map(|s| s.line))
    }

    fn missing(&self, key: &str, issues: &mut Vec<ScenarioIssue>) {
        issues.push(ScenarioIssue {
            line: self.section.map(|s| s.line),
            message: format!("missing required key {}.{key}", self.name),
        });
    }

    fn number(&mut self, key: &str, default: Option<f64>, issues: &mut Vec<ScenarioIssue>) -> Option<f64> {
        match self.raw(key) {
            Some((v, line)) => match parse_number(v) {
                Some(x) => Some(x),
                None => {
                    issues.push(issue(line, format!("{}.{key}: expected a number, found {v:?}", self.name)));
                    None
                }
            },
            None => {
                if default.is_none() {
                    self.missing(key, issues);
                }
                default
            }
        }
    }

    fn integer(&mut self, key: &str, default: Option<u64>, issues: &mut Vec<ScenarioIssue>) -> Option<u64> {
        match self.raw(key) {
            Some((v, line)) => match v.parse::<u64>() {
                Ok(x) => Some(x),
                Err(_) => {
                    issues.push(issue(
                        line,
                        format!("{}.{key}: expected a non-negative integer, found {v:?}", self.name),
                    ));
                    None
                }
            },
            None => {
                if default.is_none() {
                    self.missing(key, issues);
                }
                default
            }
        }
    }

    fn text(&mut self, key: &str, default: Option<&str>, issues: &mut Vec<ScenarioIssue>) -> Option<String> {
        match self.raw(key) {
            Some((v, _)) => Some(v.to_string()),
            None => {
                if default.is_none() {
                    self.missing(key, issues);
                }
                default.map(str::to_string)
            }
        }
    }

    fn list(&mut self, key: &str, required: bool, issues: &mut Vec<ScenarioIssue>) -> Option<Vec<f64>> {
        match self.raw(key) {
            Some((v, line)) => {
                let parsed: Option<Vec<f64>> = v.split(',').map(parse_number).collect();
                if parsed.is_none() {
                    issues.push(issue(line, format!("{}.{key}: expected a comma-separated list of numbers", self.name)));
                }
                parsed
            }
            None => {
                if required {
                    self.missing(key, issues);
                }
                None
            }
        }
    }

    fn pair(&mut self, key: &str, issues: &mut Vec<ScenarioIssue>) -> Option<Option<[f64; 2]>> {
        let line = self.line_of(key);
        match self.list(key, false, issues) {
            None => Some(None),
            Some(v) if v.len() == 2 => Some(Some([v[0], v[1]])),
            Some(v) => {
                issues.push(ScenarioIssue {
                    line,
                    message: format!("{}.{key}: expected two values, found {}", self.name, v.len()),
                });
                None
            }
        }
    }

    fn check(&self, key: &str, ok: bool, message: impl Into<String>, issues: &mut Vec<ScenarioIssue>) {
        if !ok {
            issues.push(ScenarioIssue {
                line: self.line_of(key),
                message: format!("{}.{key}: {}", self.name, message.into()),
            });
        }
    }

    fn finish(self, issues: &mut Vec<ScenarioIssue>) {
        if let Some(section) = self.section {
            for (key, (_, line)) in &section.entries {
                if !self.used.contains(key) {
                    issues.push(issue(*line, format!("unknown key {}.{key}", self.name)));
                }
            }
        }
    }
}

fn build(table: &Table, issues: &mut Vec<ScenarioIssue>) -> Option<Scenario> {
    for required in ["grid", "kernel", "initial", "step"] {
        if !table.contains_key(required) {
            issues.push(ScenarioIssue {
                line: None,
                message: format!("missing required section [{required}]"),
            });
        }
    }

    let mut run = Reader::new(table, "run");
    let name = run.text("name", Some("run"), issues);
    if let Some(n) = &name {
        run.check(
            "name",
            !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)),
            "name may only contain letters, digits, '-', '_' and '.'",
            issues,
        );
    }
    let mode = run.text("mode", Some("torus"), issues).and_then(|m| {
        let parsed = Mode::parse(&m);
        run.check("mode", parsed.is_some(), format!("unknown mode {m:?} (torus | line)"), issues);
        parsed
    });
    run.finish(issues);

    let mut grid = Reader::new(table, "grid");
    let n = grid.integer("n", None, issues);
    if let Some(n) = n {
        grid.check(
            "n",
            n >= MIN_POINTS as u64 && n % 2 == 0 && n <= 1 << 20,
            format!("must be even and in [{MIN_POINTS}, 2^20], got {n}"),
            issues,
        );
    }
    let length = grid.number("length", Some(2.0 * PI), issues);
    if let Some(l) = length {
        grid.check("length", l > 0.0, format!("must be positive, got {l}"), issues);
    }
    grid.finish(issues);

    let kernel = build_kernel(table, length, issues);
    let initial = build_initial(table, issues);

    let mut step = Reader::new(table, "step");
    let defaults = StepControl::default();
    let cfl_advective = step.number("cfl_advective", Some(defaults.cfl_advective), issues);
    let cfl_dissipative = step.number("cfl_dissipative", Some(defaults.cfl_dissipative), issues);
    let dt_max = step.number("dt_max", Some(defaults.dt_max), issues);
    let t_end = step.number("t_end", None, issues);
    for (key, v) in [
        ("cfl_advective", cfl_advective),
        ("cfl_dissipative", cfl_dissipative),
        ("dt_max", dt_max),
    ] {
        if let Some(v) = v {
            step.check(key, v > 0.0, format!("must be positive, got {v}"), issues);
        }
    }
    if let Some(t) = t_end {
        step.check("t_end", t >= 0.0, format!("must be non-negative, got {t}"), issues);
    }
    step.finish(issues);

    let mut out = Reader::new(table, "output");
    let cadence = out.number("cadence", Some(0.1), issues);
    if let Some(c) = cadence {
        out.check("cadence", c > 0.0, format!("must be positive, got {c}"), issues);
    }
    let default_dir = format!("out/{}", name.as_deref().unwrap_or("run"));
    let directory = out.text("directory", Some(&default_dir), issues);
    if let Some(d) = &directory {
        out.check("directory", !d.is_empty(), "must not be empty", issues);
    }
    let snapshots = out.text("snapshots", Some("true"), issues).and_then(|s| {
        let v = match s.as_str() {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        };
        out.check("snapshots", v.is_some(), format!("expected true or false, found {s:?}"), issues);
        v
    });
    let support_eps = out.number("support_eps", Some(1e-4), issues);
    if let Some(e) = support_eps {
        out.check("support_eps", e > 0.0 && e < 1.0, format!("must lie in (0, 1), got {e}"), issues);
    }
    let blowup_factor = out.number("blowup_factor", Some(1e3), issues);
    if let Some(b) = blowup_factor {
        out.check("blowup_factor", b > 1.0, format!("must exceed 1, got {b}"), issues);
    }
    let rho_floor = out.number("rho_floor", Some(1e-8), issues);
    if let Some(r) = rho_floor {
        out.check("rho_floor", r >= 0.0, format!("must be non-negative, got {r}"), issues);
    }
    let window = |key: &str, out: &mut Reader, issues: &mut Vec<ScenarioIssue>| {
        out.pair(key, issues).map(|w| {
            w.map(|[lo, hi]| {
                out.check(key, lo >= 0.0 && lo < hi, format!("needs 0 <= lo < hi, got {lo}, {hi}"), issues);
                (lo, hi)
            })
        })
    };
    let fit_window = window("fit_window", &mut out, issues);
    let residual_window = window("residual_window", &mut out, issues);
    let e_convention = match out.raw("e_convention") {
        None => Some(None),
        Some((v, line)) => match EConvention::parse(v) {
            Some(c) => {
                if c == EConvention::Convolution && matches!(kernel, Some(KernelVariant::Singular { .. })) {
                    issues.push(issue(line, "output.e_convention: convolution form needs a bounded kernel"));
                }
                Some(Some(c))
            }
            None => {
                issues.push(issue(
                    line,
                    format!("output.e_convention: unknown convention {v:?} (commutator | convolution)"),
                ));
                None
            }
        },
    };
    out.finish(issues);

    let agents = if table.contains_key("agents") {
        let mut a = Reader::new(table, "agents");
        let count = a.integer("count", None, issues);
        if let Some(c) = count {
            a.check("count", (1..=100_000).contains(&c), format!("must lie in [1, 100000], got {c}"), issues);
        }
        let seed = a.integer("seed", Some(0), issues);
        let width = a.number("mollifier_width", None, issues);
        if let (Some(w), Some(n), Some(l)) = (width, n, length) {
            let minimum = 2.0 * l / n as f64;
            a.check(
                "mollifier_width",
                w >= minimum,
                format!("{w} is under-resolved, needs at least 2 dx = {minimum}"),
                issues,
            );
        }
        let adaptive = a.text("normalization", Some("mean"), issues).and_then(|s| {
            let v = match s.as_str() {
                "mean" => Some(false),
                "adaptive" => Some(true),
                _ => None,
            };
            a.check("normalization", v.is_some(), format!("unknown normalization {s:?} (mean | adaptive)"), issues);
            v
        });
        let dt = a.number("dt", Some(0.05), issues);
        if let Some(d) = dt {
            a.check("dt", d > 0.0, format!("must be positive, got {d}"), issues);
        }
        let total_mass = match a.raw("total_mass") {
            None => Some(None),
            Some(_) => a.number("total_mass", None, issues).map(|m| {
                a.check("total_mass", m > 0.0, format!("must be positive, got {m}"), issues);
                Some(m)
            }),
        };
        if matches!(kernel, Some(KernelVariant::Singular { .. })) {
            issues.push(ScenarioIssue {
                line: table.get("agents").map(|s| s.line),
                message: "agents: the particle model needs a bounded kernel".into(),
            });
        }
        a.finish(issues);
        match (count, seed, width, adaptive, dt, total_mass) {
            (Some(count), Some(seed), Some(mollifier_width), Some(adaptive), Some(dt), Some(total_mass)) => {
                Some(Some(AgentConfig {
                    count: count as usize,
                    seed,
                    mollifier_width,
                    adaptive,
                    dt,
                    total_mass,
                }))
            }
            _ => None,
        }
    } else {
        Some(None)
    };

    // Grid-dependent checks on the initial data.
    if let (Some(init), Some(n), Some(l)) = (&initial, n, length) {
        if let Ok(g) = PeriodicGrid::new(n as usize, l) {
            if let Err(e) = init.sample(&g) {
                issues.push(ScenarioIssue {
                    line: table.get("initial").map(|s| s.line),
                    message: format!("initial: {e}"),
                });
            }
        }
    }

    Some(Scenario {
        name: name?,
        mode: mode?,
        n: n? as usize,
        length: length?,
        kernel: kernel?,
        initial: initial?,
        step: StepControl {
            cfl_advective: cfl_advective?,
            cfl_dissipative: cfl_dissipative?,
            dt_max: dt_max?,
            t_end: t_end?,
        },
        output: OutputConfig {
            cadence: cadence?,
            directory: directory?,
            snapshots: snapshots?,
            support_eps: support_eps?,
            fit_window: fit_window?,
            residual_window: residual_window?,
            blowup_factor: blowup_factor?,
            rho_floor: rho_floor?,
            e_convention: e_convention?,
        },
        agents: agents?,
    })
}

fn build_kernel(table: &Table, length: Option<f64>, issues: &mut Vec<ScenarioIssue>) -> Option<KernelVariant> {
    if !table.contains_key("kernel") {
        return None;
    }
    let mut k = Reader::new(table, "kernel");
    let variant = k.text("variant", None, issues)?;
    let result = match variant.as_str() {
        "singular" => {
            let alpha = k.number("alpha", None, issues);
            if let Some(a) = alpha {
                k.check("alpha", a > 0.0 && a < 2.0, format!("out of range (0, 2), got {a}"), issues);
            }
            let truncation = k.integer("truncation", Some(DEFAULT_TRUNCATION as u64), issues);
            if let Some(t) = truncation {
                k.check("truncation", t >= 1, "must be at least 1", issues);
            }
            Some(KernelVariant::Singular {
                alpha: alpha?,
                truncation: truncation? as usize,
            })
        }
        "bounded" | "motsch_tadmor" | "mt" => {
            let profile = build_profile(&mut k, issues);
            profile.map(|p| {
                if variant == "bounded" {
                    KernelVariant::Bounded(p)
                } else {
                    KernelVariant::MotschTadmor(p)
                }
            })
        }
        other => {
            k.check(
                "variant",
                false,
                format!("unknown kernel variant {other:?} (bounded | motsch_tadmor | singular)"),
                issues,
            );
            None
        }
    };
    if let (Some(v), Some(l)) = (&result, length) {
        if l > 0.0 && !issues.iter().any(|i| i.message.starts_with("kernel.")) {
            if let Err(e) = KernelSpec::new(v.clone(), l) {
                issues.push(ScenarioIssue {
                    line: k.line_of("variant"),
                    message: format!("kernel: {e}"),
                });
            }
        }
    }
    k.finish(issues);
    result
}

fn build_profile(k: &mut Reader, issues: &mut Vec<ScenarioIssue>) -> Option<Profile> {
    let name = k.text("profile", None, issues)?;
    match name.as_str() {
        "constant" => Some(Profile::Constant {
            value: k.number("value", None, issues)?,
        }),
        "raised_cosine" => {
            let a = k.number("a", None, issues);
            let b = k.number("b", None, issues);
            Some(Profile::RaisedCosine { a: a?, b: b? })
        }
        "gaussian" => {
            let amplitude = k.number("amplitude", Some(1.0), issues);
            let sigma = k.number("sigma", None, issues);
            Some(Profile::Gaussian {
                amplitude: amplitude?,
                sigma: sigma?,
            })
        }
        "algebraic" => {
            let amplitude = k.number("amplitude", Some(1.0), issues);
            let scale = k.number("scale", Some(1.0), issues);
            let decay = k.number("decay", None, issues);
            Some(Profile::Algebraic {
                amplitude: amplitude?,
                scale: scale?,
                decay: decay?,
            })
        }
        "tabulated" => Some(Profile::Tabulated {
            values: k.list("values", true, issues)?,
        }),
        other => {
            k.check(
                "profile",
                false,
                format!("unknown kernel profile {other:?} (constant | raised_cosine | gaussian | algebraic | tabulated)"),
                issues,
            );
            None
        }
    }
}

fn build_initial(table: &Table, issues: &mut Vec<ScenarioIssue>) -> Option<InitialData> {
    if !table.contains_key("initial") {
        return None;
    }
    let mut r = Reader::new(table, "initial");
    let name = r.text("profile", None, issues)?;
    let shape = |r: &mut Reader, issues: &mut Vec<ScenarioIssue>| {
        r.text("shape", Some("gaussian"), issues).and_then(|s| {
            let v = BumpShape::parse(&s);
            r.check("shape", v.is_some(), format!("unknown bump shape {s:?} (gaussian | compact)"), issues);
            v
        })
    };
    let two = |r: &mut Reader, key: &str, issues: &mut Vec<ScenarioIssue>| -> Option<[f64; 2]> {
        let line = r.line_of(key);
        let v = r.list(key, true, issues)?;
        if v.len() == 2 {
            Some([v[0], v[1]])
        } else {
            issues.push(ScenarioIssue {
                line,
                message: format!("initial.{key}: expected two values, found {}", v.len()),
            });
            None
        }
    };
    let data = match name.as_str() {
        "perturbed_constant" => {
            let mass = r.number("mass", Some(1.0), issues);
            let rho_amplitude = r.number("rho_amplitude", Some(0.0), issues);
            let rho_phase = r.number("rho_phase", Some(0.0), issues);
            let u_mean = r.number("u_mean", Some(0.0), issues);
            let u_amplitude = r.number("u_amplitude", Some(0.0), issues);
            let u_phase = r.number("u_phase", Some(0.0), issues);
            let wavenumber = r.integer("wavenumber", Some(1), issues);
            if let Some(m) = mass {
                r.check("mass", m > 0.0, format!("must be positive, got {m}"), issues);
            }
            if let Some(a) = rho_amplitude {
                r.check("rho_amplitude", a.abs() <= 1.0, format!("must lie in [-1, 1], got {a}"), issues);
            }
            if let Some(k) = wavenumber {
                r.check("wavenumber", (1..=u32::MAX as u64).contains(&k), "must be at least 1", issues);
            }
            Some(InitialData::PerturbedConstant {
                mass: mass?,
                rho_amplitude: rho_amplitude?,
                rho_phase: rho_phase?,
                u_mean: u_mean?,
                u_amplitude: u_amplitude?,
                u_phase: u_phase?,
                wavenumber: wavenumber? as u32,
            })
        }
        "bump" => {
            let center = r.number("center", None, issues);
            let half_width = r.number("half_width", None, issues);
            let height = r.number("height", Some(1.0), issues);
            let background = r.number("background", Some(0.0), issues);
            let velocity = r.number("velocity", Some(0.0), issues);
            let shape = shape(&mut r, issues);
            Some(InitialData::Bump {
                center: center?,
                half_width: half_width?,
                height: height?,
                background: background?,
                velocity: velocity?,
                shape: shape?,
            })
        }
        "two_bump" => {
            let centers = two(&mut r, "centers", issues);
            let half_width = r.number("half_width", None, issues);
            let heights = two(&mut r, "heights", issues);
            let velocities = two(&mut r, "velocities", issues);
            let blend_width = r.number("blend_width", None, issues);
            let shape = shape(&mut r, issues);
            Some(InitialData::TwoBump {
                centers: centers?,
                half_width: half_width?,
                heights: heights?,
                velocities: velocities?,
                blend_width: blend_width?,
                shape: shape?,
            })
        }
        "tabulated" => {
            let rho = r.list("rho", true, issues);
            let u = r.list("u", true, issues);
            Some(InitialData::Tabulated { rho: rho?, u: u? })
        }
        other => {
            r.check(
                "profile",
                false,
                format!("unknown initial profile {other:?} (perturbed_constant | bump | two_bump | tabulated)"),
                issues,
            );
            None
        }
    };
    if let Some(d) = &data {
        if let Err(e) = d.validate() {
            r.check("profile", false, e.to_string(), issues);
        }
    }
    r.finish(issues);
    data
}
