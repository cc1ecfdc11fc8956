use thiserror::Error;

#[derive(Debug, Error)]
pub enum NomaError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate composite constellation: minimum pairwise distance {min_distance:.3e}")]
    DegenerateConstellation { min_distance: f64 },

    #[error("point set is not a Cartesian grid, decision regions are not rectangular")]
    NonRectangularRegions,

    #[error("constellation is not quadrant symmetric: point {index} lies on an axis")]
    SymmetryViolation { index: usize },

    #[error("exhaustive search over {users} users exceeds the cost guard of {limit}")]
    CostGuard { users: usize, limit: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NomaError>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(NomaError::Parameter(msg.into()))
}
