//! JSON schemas for every subcommand.

use serde::{Deserialize, Serialize};

use cascade_core::coefficients::Coefficient;
use cascade_core::energy::InhomogeneousSource;
use cascade_core::hum::{ControlVariant, SolveOptions};
use cascade_core::sampling::{random_state, stream_rng};
use cascade_core::scenarios::{InsensitizingProblem, SimultaneousSystem};
use cascade_core::{CascadeConfig, CascadeState, CascadeSystem, ObservationSpec, SpectralField};

use crate::CliError;

/// Initial data for any system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialData {
    Zero,
    /// Seeded Gaussian data; `levels` default to the command's natural
    /// ladder, `components` (1-based) default to all.
    Random {
        #[serde(default)]
        levels: Option<Vec<i32>>,
        #[serde(default)]
        components: Option<Vec<usize>>,
        #[serde(default)]
        stream: u64,
    },
    /// Sine coefficients per component; shorter lists are zero-padded.
    Modal { positions: Vec<Vec<f64>>, velocities: Vec<Vec<f64>> },
    /// Profiles projected onto the sine basis.
    Functions { positions: Vec<Coefficient>, velocities: Vec<Coefficient> },
}

impl InitialData {
    pub fn build(&self, sys: &CascadeSystem, default_levels: &[i32], seed: u64) -> Result<CascadeState, CliError> {
        let (m, n, l) = (sys.components(), sys.modes(), sys.length());
        match self {
            Self::Zero => Ok(sys.zero_state()),
            Self::Random { levels, components, stream } => {
                let levels = levels.clone().unwrap_or_else(|| default_levels.to_vec());
                if levels.len() != m {
                    return Err(CliError::Input(format!("expected {m} levels, got {}", levels.len())));
                }
                let mut support = vec![components.is_none(); m];
                for &c in components.iter().flatten() {
                    if c == 0 || c > m {
                        return Err(CliError::Input(format!("component {c} out of range 1..={m}")));
                    }
                    support[c - 1] = true;
                }
                let mut rng = stream_rng(seed, *stream);
                Ok(random_state(&mut rng, sys, &levels, &support))
            }
            Self::Modal { positions, velocities } => {
                if positions.len() != m || velocities.len() != m {
                    return Err(CliError::Input(format!("modal data needs {m} position and velocity lists")));
                }
                let mut state = sys.zero_state();
                for i in 0..m {
                    state.positions[i] = field(&positions[i], n, l)?;
                    state.velocities[i] = field(&velocities[i], n, l)?;
                }
                Ok(state)
            }
            Self::Functions { positions, velocities } => {
                if positions.len() != m || velocities.len() != m {
                    return Err(CliError::Input(format!("function data needs {m} position and velocity profiles")));
                }
                let mut state = sys.zero_state();
                for i in 0..m {
                    state.positions[i] = SpectralField::project(|x| positions[i].value(x), n, l)?;
                    state.velocities[i] = SpectralField::project(|x| velocities[i].value(x), n, l)?;
                }
                Ok(state)
            }
        }
    }
}

/// Zero-pads `coeffs` to `modes`.
pub fn fit_modes(coeffs: &[f64], modes: usize) -> Result<Vec<f64>, CliError> {
    if coeffs.len() > modes {
        return Err(CliError::Input(format!("{} coefficients given for {modes} modes", coeffs.len())));
    }
    let mut v = coeffs.to_vec();
    v.resize(modes, 0.0);
    Ok(v)
}

fn field(coeffs: &[f64], modes: usize, length: f64) -> Result<SpectralField, CliError> {
    Ok(SpectralField::new(fit_modes(coeffs, modes)?, length)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub system: CascadeConfig,
    pub initial: InitialData,
    pub horizon: f64,
    pub dt: f64,
    /// Ledger levels per component; canonical ladder by default.
    #[serde(default)]
    pub levels: Option<Vec<Vec<i32>>>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Also write the binary trajectory snapshot.
    #[serde(default)]
    pub snapshot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserveConfig {
    pub system: CascadeConfig,
    pub observation: ObservationSpec,
    pub initial: InitialData,
    pub horizon: f64,
    pub dt: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub system: CascadeConfig,
    pub observation: ObservationSpec,
    pub horizons: Vec<f64>,
    pub samples: usize,
    pub dt: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Also run the uniform inhomogeneous check with this source.
    #[serde(default)]
    pub inhomogeneous: Option<InhomogeneousSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumConfig {
    pub system: CascadeConfig,
    pub initial: InitialData,
    pub horizon: f64,
    pub dt: f64,
    pub controls: Vec<ObservationSpec>,
    pub variant: ControlVariant,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub mode_filter: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedCoefficient {
    pub name: String,
    pub coefficient: Coefficient,
}

fn default_probe_modes() -> Vec<usize> {
    vec![16, 32, 64]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckCoeffConfig {
    #[serde(deserialize_with = "cascade_core::cascade::deserialize_length")]
    pub length: f64,
    pub coefficients: Vec<NamedCoefficient>,
    pub levels: Vec<usize>,
    #[serde(default = "default_probe_modes")]
    pub modes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimultaneousConfig {
    pub system: SimultaneousSystem,
    pub initial: InitialData,
    pub horizon: f64,
    pub dt: f64,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_directions() -> usize {
    5
}

fn default_epsilon() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsensitizeConfig {
    pub problem: InsensitizingProblem,
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Command-line overrides; each replaces the config value when present.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub modes: Option<usize>,
}

impl Overrides {
    pub fn seed(&self, config: Option<u64>) -> u64 {
        self.seed.or(config).unwrap_or(0)
    }

    pub fn dt(&self, config: f64) -> f64 {
        self.dt.unwrap_or(config)
    }

    pub fn apply_modes(&self, modes: &mut usize) {
        if let Some(m) = self.modes {
            *modes = m;
        }
    }
}
