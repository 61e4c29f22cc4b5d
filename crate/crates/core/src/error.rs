use thiserror::Error;

pub type Result<T> = std::result::Result<T, SacError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SacError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stability violation: {0}")]
    Stability(String),
    #[error("blowup at step {step} (t = {time}): {reason}")]
    Blowup {
        step: usize,
        time: f64,
        reason: String,
    },
    #[error("degenerate flow at step {step}: det Dφ = {det}")]
    DegenerateFlow { step: usize, det: f64 },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("sample {sample} (seed {seed:#018x}) failed: {source}")]
    SampleFailed {
        sample: usize,
        seed: u64,
        #[source]
        source: Box<SacError>,
    },
}

impl From<std::io::Error> for SacError {
    fn from(e: std::io::Error) -> Self {
        SacError::Io(e.to_string())
    }
}
