//! Spectral simulation of cascade systems of wave equations on an interval,
//! with observability estimates and HUM control synthesis.

pub mod cascade;
pub mod coefficients;
pub mod energy;
pub mod error;
pub mod evolution;
pub mod hum;
pub mod observation;
pub mod sampling;
pub mod scenarios;
pub mod spectral;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use cascade::{validate_hypotheses, CascadeConfig, CascadeState, CascadeSystem};
pub use coefficients::Coefficient;
pub use energy::{estimate_constants, ledger, observability_ratio, EnergyLedger, ObservabilityReport};
pub use error::{Error, Hypothesis, Result};
pub use evolution::{integrate_backward, integrate_forward, SourceSpec, Trajectory};
pub use hum::{solve_hum, synthesize, ControlProblem, ControlVariant, HumSolution, SolveOptions};
pub use observation::{ObservationSpec, Observer};
pub use spectral::{assemble_multiplication, eigenvalue, MultiplicationOperator, SpectralField};
