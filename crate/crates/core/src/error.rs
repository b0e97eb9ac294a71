use thiserror::Error;

/// Errors raised by the operators and the experiment harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension must be 1 or 2, got {0}")]
    Dimension(usize),
    #[error("grid log-side {log_side} out of range for dimension {dim}")]
    GridSize { dim: usize, log_side: u32 },
    #[error("dyadic level {level} out of range 0..={max}")]
    LevelOutOfRange { level: i64, max: u32 },
    #[error("radius {radius} out of range (0, {max}]")]
    RadiusOutOfRange { radius: f64, max: f64 },
    #[error("field has {got} values, grid expects {expected}")]
    FieldLength { expected: usize, got: usize },
    #[error("field contains non-finite value at index {0}")]
    NonFinite(usize),
    #[error("family size mismatch: {0} vs {1}")]
    FamilyMismatch(usize, usize),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("exponent must satisfy {constraint}, got {value}")]
    Exponent { constraint: &'static str, value: f64 },
    #[error("threshold must be positive, got {0}")]
    Threshold(f64),
    #[error("path is empty")]
    EmptyPath,
    #[error("path times must be strictly increasing (violated at index {0})")]
    UnorderedTimes(usize),
    #[error("path of length {len} exceeds brute-force limit {limit}")]
    PathTooLong { len: usize, limit: usize },
    #[error("sign field is not constant on level-{level} cube at corner {corner:?}")]
    SignNotCubeConstant { level: u32, corner: [usize; 2] },
    #[error("sign field is malformed: {0}")]
    SignShape(String),
    #[error("weight must be strictly positive (min {0})")]
    NonPositiveWeight(f64),
    #[error("invalid scale set: {0}")]
    Scales(String),
    #[error("level {0} is not covered by the scale set")]
    LevelNotInScales(u32),
    #[error("total mass exceeds the decomposition threshold on the whole torus (mean {mean} > {threshold})")]
    MassTooLarge { mean: f64, threshold: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
