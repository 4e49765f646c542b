use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("brute-force oracle accepts at most {limit} points, got {got}")]
    SizeLimit { limit: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("evaluation point {point} outside the truncation margin [-{margin}, {margin}]")]
    TruncationMargin { point: f64, margin: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("argument {value} outside the domain {domain}")]
    Domain { value: f64, domain: String },

    #[error("level {level} outside the open range ({lo}, {hi})")]
    LevelRange { level: f64, lo: f64, hi: f64 },

    #[error("rescaled point {point} leaves the window (0, 1)")]
    Window { point: f64 },

    /// A configuration violates one of the model assumptions.
    #[error("assumption \"{assumption}\" violated: {detail}")]
    Assumption {
        assumption: &'static str,
        detail: String,
    },

    #[error("quadrature did not converge on [{lo}, {hi}]: estimate {estimate}, error {error_estimate}")]
    Quadrature {
        lo: f64,
        hi: f64,
        estimate: f64,
        error_estimate: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of numerical procedures rather than of the input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Quadrature { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
