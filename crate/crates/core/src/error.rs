use thiserror::Error;

/// Which mesh-resolution assumption on the interface was violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// A face is crossed by the interface more than once.
    SingleFaceCrossing,
    /// A cut element has no interior Moore neighbour on one of the sides.
    InteriorNeighbour,
}

impl std::fmt::Display for Assumption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Assumption::SingleFaceCrossing => write!(f, "1 (single face crossing)"),
            Assumption::InteriorNeighbour => write!(f, "2 (interior Moore neighbour)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mesh format error on line {line}: {message}")]
    MeshFormat { line: usize, message: String },

    #[error("assumption {which} violated: {detail}")]
    AssumptionViolation { which: Assumption, detail: String },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("empty region: element {element}, side {side}")]
    EmptyRegion { element: usize, side: usize },

    #[error("degenerate level-set gradient at ({x}, {y})")]
    DegenerateGradient { x: f64, y: f64 },

    #[error("patch too small: side {side} has {available} interior elements, need {required}")]
    PatchTooSmall {
        side: usize,
        available: usize,
        required: usize,
    },

    #[error("rank-deficient least-squares patch for element {element}, side {side}")]
    RankDeficient { element: usize, side: usize },

    #[error("matrix is not positive definite (non-positive pivot at index {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("mesh sizes are not strictly decreasing")]
    NonMonotoneH,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
