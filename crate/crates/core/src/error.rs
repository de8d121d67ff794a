use thiserror::Error;

#[derive(Debug, Error)]
pub enum GdError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sqrt is only allowed in curve coordinates, not in implicit equations")]
    SqrtInImplicit,

    #[error("invalid set description: {0}")]
    Validation(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalog(String),

    #[error("catalog entry `{name}` does not admit n = {n}")]
    InadmissibleDimension { name: String, n: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported node for this operation: {0}")]
    Unsupported(String),

    #[error("sampling starvation in band {band} (scale {scale:e}): {accepted} of {quota} points")]
    Starvation { band: usize, scale: f64, accepted: usize, quota: usize },

    #[error("projection did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("singular jacobian during projection")]
    SingularJacobian,

    #[error("empty cone")]
    EmptyCone,

    #[error("non-unit direction (norm {0})")]
    NonUnit(f64),

    #[error("net resolution mismatch: {0} vs {1} degrees")]
    ResolutionMismatch(f64, f64),

    #[error("not enough bands: {have} nonempty, {need} required")]
    NotEnoughBands { have: usize, need: usize },

    #[error("origin is not a valid basepoint; use the origin direction set")]
    OriginBasepoint,

    #[error("all points have undetermined local dimension")]
    AllUndetermined,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no oracle entry for ({name}, n = {n}, power = {power})")]
    UnknownOracle { name: String, n: usize, power: usize },

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GdError>;
