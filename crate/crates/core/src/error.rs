use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("side count {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("mollification scale {epsilon} is below the mesh {mesh}")]
    UnderResolved { epsilon: f64, mesh: f64 },

    #[error("field has no vertices within one mesh of the unit circle")]
    NoUnitCircle,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("field provenance {0} cannot be used here")]
    WrongProvenance(String),

    #[error("weight overflow at {} vertices (first: {:?})", .vertices.len(), .vertices.first())]
    WeightOverflow { vertices: Vec<usize> },

    #[error("vertex {0} out of range")]
    VertexOutOfRange(usize),

    #[error("vertex {0} is not in the region")]
    NotInRegion(usize),

    #[error("target {0} was not reached")]
    Unreached(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("paths do not share endpoints")]
    EndpointMismatch,

    #[error("rejection sampler acceptance rate {0:e} is below 1e-6")]
    DegenerateRejection(f64),

    #[error("radicand {0} is negative; (V, E) is outside the bound's domain")]
    NegativeRadicand(f64),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
