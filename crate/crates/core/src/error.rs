use thiserror::Error;

/// Everything that can go wrong in the library.
///
/// Variants are grouped roughly by the stage that raises them; callers in the
/// CLI map the "usage" group to exit code 2 and the rest to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid exponent (p={p}, q={q}): need p > q >= 1 and p, q <= {max}", max = crate::corr::MAX_EXPONENT)]
    InvalidExponent { p: u32, q: u32 },

    #[error("invalid escape configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("z = 0 is the branch point; no univalent branch exists there")]
    BranchPoint,

    #[error("no sign change found while bracketing the escape-radius root")]
    NoSignChange,

    #[error("orbit did not close within a horizon of {horizon} steps")]
    NoClosure { horizon: usize },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("Newton iteration did not converge after {iterations} steps (|w| = {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("{what} is not minimal: a smaller value {smaller} also closes the orbit")]
    NotMinimal { what: &'static str, smaller: usize },

    #[error("critical orbit is periodic, not strictly preperiodic")]
    NotStrictlyPreperiodic,

    #[error("orbit uniqueness failed at step {step}: {survivors} surviving branches")]
    UniquenessFailed { step: usize, survivors: usize },

    #[error("orbit-engine pattern (preperiod {found_preperiod}, period {found_period}, signs {found_signs}) does not match the requested one")]
    PatternMismatch {
        found_preperiod: usize,
        found_period: usize,
        found_signs: String,
    },

    #[error("residual {residual:e} exceeds the allowed {limit:e}")]
    ResidualTooLarge { residual: f64, limit: f64 },

    #[error("cycle multiplier has modulus {modulus} <= 1; cycle is not repelling")]
    NotRepelling { modulus: f64 },

    #[error("branch continuation is ambiguous at orbit index {index}")]
    BranchJump { index: usize },

    #[error("point left the domain of the tracked branch")]
    DivergedFromDomain,

    #[error("cloud spacing {spacing:e} too coarse for scale {scale:e} (need <= {limit:e} after normalisation)")]
    ResolutionTooCoarse {
        spacing: f64,
        scale: f64,
        limit: f64,
    },

    #[error("invalid sign sequence: {0}")]
    InvalidSigns(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image encoding failed: {0}")]
    Image(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
