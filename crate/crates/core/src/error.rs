use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("missing column `{0}` in track file")]
    MissingColumn(String),

    #[error("track `{track_id}`: frame {found} follows frame {previous} (gaps are not allowed)")]
    FrameGap {
        track_id: String,
        previous: i64,
        found: i64,
    },

    #[error("line {line}: cannot parse `{value}` as a number")]
    NonNumeric { line: u64, value: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("quadrature did not reach tolerance {tol:e} (achieved {achieved:e})")]
    Quadrature { tol: f64, achieved: f64 },

    #[error("covariance matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("circulant embedding has negative eigenvalue {value:e} at size 2^{exponent}")]
    NegativeEigenvalue { value: f64, exponent: u32 },

    #[error("wavelet filter at scale {scale} has truncation magnitude {magnitude:e} above {threshold:e}")]
    Truncation {
        scale: usize,
        magnitude: f64,
        threshold: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("replicate {replicate} (seed {seed}) failed: {source}")]
    Replicate {
        replicate: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Process exit code: 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Quadrature { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::NegativeEigenvalue { .. }
            | Error::Truncation { .. }
            | Error::Numerical(_) => 3,
            Error::Replicate { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
