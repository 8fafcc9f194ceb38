use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("inner product is degenerate: eigenvalue {eigenvalue:e} within tolerance {tol:e}")]
    Degenerate { eigenvalue: f64, tol: f64 },
    #[error("subspace is degenerate: restricted Gram eigenvalue {eigenvalue:e} within tolerance {tol:e}")]
    DegenerateSubspace { eigenvalue: f64, tol: f64 },
    #[error("frame vectors are linearly dependent (rank {rank} of {count})")]
    RankDeficient { rank: usize, count: usize },
    #[error("operator is not nilpotent: |A^2| = {square_norm:e}, bound {bound:e}")]
    NotNilpotent { square_norm: f64, bound: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("gram matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("metric is ill-conditioned at stencil point {point:?}")]
    IllConditioned { point: Vec<f64> },
    #[error("frame is not orthonormal: defect {defect:e} exceeds {tol:e}")]
    FrameNotOrthonormal { defect: f64, tol: f64 },
    #[error("type ({timelike},{spacelike}) is not admissible in signature ({neg},{pos})")]
    NotAdmissible {
        timelike: usize,
        spacelike: usize,
        neg: usize,
        pos: usize,
    },
    #[error("sampling exhausted after {rejects} rejected draws")]
    SamplingExhausted { rejects: usize },
    #[error("no degenerate parameter found along the search path: {0}")]
    SearchFailed(String),
    #[error("flat factor capacity exceeded: requested ({a},{b}), available ({u},{v})")]
    CapacityExceeded { a: usize, b: usize, u: usize, v: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
