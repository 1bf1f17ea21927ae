use thiserror::Error;

/// Errors raised by the model, measure and operator layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rank k = {0} must be at least 2")]
    InvalidRank(usize),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("letter code {code} is outside the alphabet of F_{k}")]
    LetterOutOfRange { code: usize, k: usize },

    #[error("word is not reduced: letters {0} and {1} cancel")]
    NotReduced(usize, usize),

    #[error("cannot parse word: {0}")]
    Parse(String),

    #[error("invalid boundary point: {0}")]
    InvalidBoundaryPoint(String),

    #[error("enumeration too large: {requested} elements exceeds cap {cap}")]
    EnumerationTooLarge { requested: u128, cap: u128 },

    #[error("cylinder too coarse: depth {depth} does not determine the Busemann cocycle (need {required})")]
    CylinderTooCoarse { depth: usize, required: usize },

    #[error("divergent Poincaré exponent: t = {t} must exceed delta = {delta}")]
    DivergentExponent { t: f64, delta: f64 },

    #[error("below critical line s = 1/2: kernel is not integrable for s = {0}")]
    BelowCriticalLine(f64),

    #[error("cannot refine from depth {current} down to depth {requested}")]
    DepthDecrease { current: usize, requested: usize },

    #[error("depth {depth} needs {cells} cells, above the cap of {cap}")]
    CellCap { depth: usize, cells: u128, cap: u128 },

    #[error("operands live on different models (k = {0} vs k = {1})")]
    RankMismatch(usize, usize),

    #[error("function must have zero mean, got {0:e}")]
    NonZeroMean(f64),

    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),

    #[error("step distribution is not admissible: {0}")]
    InadmissibleStep(String),

    #[error("cover construction failed: {0}")]
    CoverConstruction(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
