use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("resilience condition violated: {0}")]
    Resilience(String),

    #[error("unsupported dimension {0} (exact oracle supports 1 or 2)")]
    UnsupportedDimension(usize),

    #[error("subset enumeration cap exceeded: {subsets} leave-f-out subsets > cap {cap}; use coordinate-wise mode")]
    SubsetCap { subsets: u128, cap: usize },

    #[error("aggregation mode `{0}` does not report convex weights")]
    UnsupportedMode(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("ambiguous label: output-bias gradient component is exactly zero")]
    AmbiguousLabel,

    #[error("internal solver error: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
