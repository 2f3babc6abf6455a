use thiserror::Error;

/// Errors raised across the gait and shaping pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid control polygon: {0}")]
    InvalidPolygon(String),
    #[error("curve parameter {0} outside [0, 1]")]
    InvalidParameter(f64),
    #[error("turning radius {radius} m is tighter than the minimum {r_min} m")]
    RadiusOutOfRange { radius: f64, r_min: f64 },
    #[error("stride {stride} m exceeds the workspace; max feasible stride is {max} m")]
    StrideTooLarge { stride: f64, max: f64 },
    #[error("unreachable configuration: {0}")]
    Unreachable(String),
    #[error("foot outside workspace: {0}")]
    OutsideWorkspace(String),
    #[error("singular configuration (det = {0:e})")]
    Singular(f64),
    #[error("inverse kinematics failed at phase {phase:.4} for leg {leg}: {source}")]
    TrajectoryIk {
        phase: f64,
        leg: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("attitude undefined with {0} contact(s)")]
    AttitudeUndefined(usize),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("non-finite objective value: {0}")]
    NonFinite(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
