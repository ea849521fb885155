use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid predicate: {0}")]
    Predicate(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("matrix not positive definite: pivot {pivot} has value {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("singular covariance (min eigenvalue {0:e}); apply a noise shift first")]
    Singular(f64),
    #[error("size budget exceeded: need {required}, budget {budget}")]
    Budget { required: u128, budget: u128 },
    #[error("distribution not supported on satisfying set: assignment {0}")]
    Unsupported(String),
    #[error("predicate is not symmetric")]
    NotSymmetric,
    #[error("ball around {subset:?} is not a forest")]
    NotForest { subset: Vec<usize> },
    #[error("subset {subset:?} too large for girth {girth} and degree {degree}")]
    SubsetTooLarge { subset: Vec<usize>, girth: usize, degree: usize },
    #[error("missing subset {0:?}")]
    MissingSubset(Vec<usize>),
    #[error("target bias {0} unreachable")]
    Unreachable(String),
    #[error("rejection cap exceeded: accepted {accepted} of {attempts} attempts")]
    RejectionCap { accepted: usize, attempts: usize },
    #[error("linear program {0}")]
    Lp(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
