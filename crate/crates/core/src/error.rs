use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state is not normalized: norm² = {norm_sq}")]
    NotNormalized { norm_sq: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("state is mixed (purity {purity}); a pure state is required")]
    MixedState { purity: f64 },

    #[error("correlation matrix violates the ideal-family structure: {0}")]
    StructureViolation(String),

    #[error("nonphysical value: {0}")]
    NonPhysical(String),

    #[error("empty grid")]
    EmptyGrid,

    #[error("sample too small: {got} events, need at least {need}")]
    SampleTooSmall { got: usize, need: usize },

    #[error("undefined acoplanarity: both transverse projections vanish")]
    UndefinedPlane,

    #[error("likelihood fit failed: {0}")]
    FitFailed(String),

    #[error("too many degenerate sub-samples: {excluded} of {total}")]
    TooManyExclusions { excluded: usize, total: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
