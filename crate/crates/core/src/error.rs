use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid dimension {0}: only odd dimensions are allowed")]
    InvalidDimension(u32),
    #[error("unsupported dimension {0} for this operation")]
    UnsupportedDimension(u32),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("vanishing order undetermined up to k = {0}")]
    OrderUndetermined(usize),
    #[error("profile has nonzero mean {0:e}; no compactly supported antiderivative")]
    NoCompactAntiderivative(f64),
    #[error("profile parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("potential support [{lo}, {hi}] exceeds matching half-width {half_width}")]
    InvalidDomain { lo: f64, hi: f64, half_width: f64 },
    #[error("frequency {0} outside the validated working box")]
    OutsideWorkingBox(String),
    #[error("integrator accuracy failure: {0}")]
    Accuracy(String),
    #[error("contour accuracy failure: {0}")]
    ContourAccuracy(String),
    #[error("resonance is not simple (winding {0})")]
    NotSimple(i64),
    #[error("contour around {0} encloses another resonance")]
    ContourConflict(String),
    #[error("characteristic series not in the perturbative regime: {0}")]
    NotInRegime(String),
    #[error("capability not supported: {0}")]
    Capability(String),
    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),
    #[error("divergent integral: {0}")]
    DivergentIntegral(String),
    #[error("inapplicable: {0}")]
    Inapplicable(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code convention of the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Accuracy(_)
            | Error::ContourAccuracy(_)
            | Error::NumericalInconsistency(_)
            | Error::NotInRegime(_) => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
