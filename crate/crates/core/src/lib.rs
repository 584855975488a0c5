//! Simulator and diagnostics for one-dimensional Euler alignment dynamics
//! on the torus, with bounded, normalized and singular fractional kernels,
//! plus a particle cross-check.

pub mod agents;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod initial;
pub mod kernels;
pub mod oracle;
pub mod quadrature;
pub mod runner;
pub mod scenario;
pub mod spectral;

pub use agents::{AgentState, Normalization};
pub use diagnostics::{DecayFit, DiagnosticsRecord, Mode, Monitor};
pub use dynamics::{BlowUp, BlowUpReason, EConvention, FieldState, StepControl, Stepper, Trajectory};
pub use error::{FlockError, Result, ScenarioIssue};
pub use grid::{Field, PeriodicGrid};
pub use initial::{BumpShape, InitialData};
pub use kernels::{KernelSpec, KernelVariant, Profile};
pub use scenario::Scenario;
pub use runner::{run_scenario, run_sweep, RunReport, RunSummary, SweepReport};
