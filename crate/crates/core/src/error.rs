use thiserror::Error;

/// Errors produced by parameter validation, the shooting solver, the policy
/// layer and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input is outside its admissible range (nonpositive volatility,
    /// utility exponent outside (0, 1), nonpositive wealth, bad tolerance...).
    #[error("range: {0}")]
    Range(String),
    /// The discount rate does not dominate the utility-weighted growth of
    /// both assets; postponing the sale forever has unbounded value and the
    /// problem degenerates.
    #[error("beta_too_small: {0}")]
    BetaTooSmall(String),
    /// The relative drift of the indivisible asset is outside the two-sided
    /// band under which the sale region is a ratio threshold.
    #[error("drift_condition: {0}")]
    DriftCondition(String),
    /// Bisection could not find two candidate boundaries failing on opposite
    /// sides; the parameters are outside the numerically supported regime.
    #[error("no_bracket: {0}")]
    NoBracket(String),
    /// The adaptive step controller stalled below its minimum step size.
    #[error("step_failure: integrator stalled at z = {z}")]
    StepFailure { z: f64 },
    /// A policy query with wealth-to-asset ratio beyond the tabulated domain.
    #[error("out_of_range: ratio {ratio} exceeds tabulated domain end {z_max}")]
    OutOfRange { ratio: f64, z_max: f64 },
    /// The simulated state left (0, inf) and resampling with halved step
    /// size did not recover.
    #[error("non_finite: {0}")]
    NonFinite(String),
    /// The located boundary moved by more than the bisection tolerance when
    /// the integration domain was doubled.
    #[error("boundary_unstable: z_hat {z_first} at base domain vs {z_doubled} at doubled domain")]
    BoundaryUnstable { z_first: f64, z_doubled: f64 },
    /// Configuration file or command-line problem.
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name, used by the CLI for exit-code mapping.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Range(_) => "range",
            Error::BetaTooSmall(_) => "beta_too_small",
            Error::DriftCondition(_) => "drift_condition",
            Error::NoBracket(_) => "no_bracket",
            Error::StepFailure { .. } => "step_failure",
            Error::OutOfRange { .. } => "out_of_range",
            Error::NonFinite(_) => "non_finite",
            Error::BoundaryUnstable { .. } => "boundary_unstable",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}
