use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },

    #[error("parameter `{name}` = {value} outside [{lower}, {upper}]")]
    ParamOutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("meshing failure: {0}")]
    MeshingFailure(String),

    #[error("no boundary face within tolerance of any `{0}` anchor")]
    NoFaceMatched(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("result field is empty")]
    EmptyField,

    #[error("missing prompt template: {0}")]
    MissingTemplate(String),

    #[error("need at least two registered categories with one held out, found {0}")]
    InsufficientCategories(usize),

    #[error("task and log sets do not match: {0}")]
    MismatchedSets(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
