use thiserror::Error;

/// Crate-wide error type.
///
/// Contract violations (mismatched spaces, out-of-range levels, wrong
/// replication regime) are reported through dedicated variants so callers and
/// the CLI can surface them verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("objects are defined on different sample spaces")]
    SpaceMismatch,

    #[error("invalid probability mass: {0}")]
    InvalidMass(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("level {0} outside the open interval (0, 1)")]
    LevelOutOfRange(String),

    #[error("decision level {0} must be nonnegative")]
    NegativeLevel(String),

    #[error("quantile order {0} outside the open interval (0, 1)")]
    QuantileOrderOutOfRange(String),

    #[error("value {0} outside [0, 1]")]
    UnitIntervalViolation(String),

    #[error("loss threshold must exceed the loss of a non-rejection")]
    InvalidThreshold,

    #[error("loss function is not increasing in the decision order: {0}")]
    NonMonotoneLoss(String),

    #[error("loss not tabulated at level {0}")]
    LossNotTabulated(String),

    #[error("power mean exponent must be >= 1, got {0}")]
    InvalidPowerMeanExponent(u32),

    #[error("power mean requires a nonnegative random variable")]
    NegativePowerMeanInput,

    #[error("random variable carries an infinite value; a finite profile is required")]
    UnboundedProfile,

    #[error("profile takes a value below the non-rejection loss")]
    ProfileBelowFloor,

    #[error("wrong replication regime: expected mean {expected} threshold, found mean {found}")]
    WrongRegime { expected: &'static str, found: String },

    #[error("replication choice rejected: {0}")]
    InvalidReplicationChoice(String),

    #[error("monotonicity check precondition failed: the weaker level does not yield pointwise weaker decisions")]
    DominanceViolation,

    #[error("family has interior randomization (rejection probability strictly between 0 and 1 at {0}); family evidence is only defined for pointwise families")]
    InteriorRandomization(String),

    #[error("atom count {0} must be a positive multiple of 100")]
    InvalidAtomCount(usize),

    #[error("cannot parse number: {0}")]
    NumberParse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
