use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed channel document: {0}")]
    Malformed(String),

    #[error("row {row} of the {side} channel sums to {sum}")]
    RowSum { side: &'static str, row: String, sum: f64 },

    #[error("negative probability {value} in row {row} of the {side} channel")]
    NegativeProbability { side: &'static str, row: String, value: f64 },

    #[error("expected {expected} rows for the {side} channel, found {found}")]
    RowCount { side: &'static str, expected: usize, found: usize },

    #[error("invalid probability vector: {0}")]
    InvalidPmf(String),

    #[error("alphabet size mismatch: {0} vs {1}")]
    AlphabetMismatch(usize, usize),

    #[error("subset {subset} out of range for {users} users")]
    SubsetOutOfRange { subset: usize, users: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("absolute continuity violated at output symbol {symbol}")]
    AbsoluteContinuity { symbol: usize },

    #[error("degenerate direction: chi(rho) = 0, the warden is blind to this input mix")]
    Degenerate,

    #[error("alpha_n = {0} exceeds 1")]
    AlphaTooLarge(f64),

    #[error("no channel satisfying the assumptions after {0} attempts")]
    ResampleCap(usize),

    #[error("feasibility cap exceeded: {what} = {value} > {cap}")]
    CapExceeded { what: &'static str, value: f64, cap: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CapExceeded { .. } => 3,
            Error::Io(_) => 4,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Malformed(_) | Error::Json(_) => "malformed",
            Error::RowSum { .. } => "row_sum",
            Error::NegativeProbability { .. } => "negative_probability",
            Error::RowCount { .. } => "row_count",
            Error::InvalidPmf(_) => "invalid_pmf",
            Error::AlphabetMismatch(..) => "alphabet_mismatch",
            Error::SubsetOutOfRange { .. } => "subset_out_of_range",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::AbsoluteContinuity { .. } => "absolute_continuity",
            Error::Degenerate => "degenerate",
            Error::AlphaTooLarge(_) => "alpha_too_large",
            Error::ResampleCap(_) => "resample_cap",
            Error::CapExceeded { .. } => "cap_exceeded",
            Error::Io(_) => "io",
        }
    }
}
