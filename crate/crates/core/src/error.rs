use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid ring: {0}")]
    InvalidRing(String),
    #[error("ring order {order} exceeds the configured bound {bound}")]
    OrderBound { order: usize, bound: usize },
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("chain is not irreducible")]
    Reducible,
    #[error("singular system: {0}")]
    Singular(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("labeling is not lumpable for this chain")]
    NotLumpable,
    #[error("invalid labeling: {0}")]
    InvalidLabeling(String),
    #[error("depth {depth} exceeds the cap: {reason}")]
    DepthCap { depth: usize, reason: String },
    #[error("invalid typicality input: {0}")]
    Typicality(String),
    #[error("invalid presentation: {0}")]
    InvalidPresentation(String),
    #[error("enumeration of {size} items exceeds the budget {budget}")]
    Budget { size: f64, budget: f64 },
    #[error("numeric check failed: {0}")]
    Numeric(String),
    #[error("invalid document: {0}")]
    Document(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
