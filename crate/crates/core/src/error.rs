use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 3, got {0}")]
    Dimension(usize),
    #[error("squircle kernel is only defined for d = 3, got d = {0}")]
    KernelDimension(usize),
    #[error("point length {got} does not match expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("point lies outside the square Q (max-norm {0})")]
    OutsideSquare(f64),
    #[error("not a unit vector (norm {0})")]
    NotUnit(f64),
    #[error("point lies below the equator (last coordinate {0})")]
    BelowEquator(f64),
    #[error("grid too coarse: {got} points per axis, need at least {min}")]
    GridTooCoarse { got: usize, min: usize },
    #[error("lattice index {0:?} is not in S (coordinate sum is odd)")]
    NotInS(Vec<i64>),
    #[error("height {0} is above the overflow limit")]
    Overflow(f64),
    #[error("point height {height} is below M = {m_upper}")]
    BelowM { height: f64, m_upper: f64 },
    #[error("singular Jacobian block")]
    Singular,
    #[error("infeasible calibration: {0}")]
    Infeasible(String),
    #[error("fixed-point iteration did not converge in {0} steps")]
    NoConvergence(usize),
    #[error("negative argument {0} for the reference function")]
    NegativeTime(f64),
    #[error("level {level} beyond ladder cap {cap}")]
    LadderCap { level: usize, cap: usize },
    #[error("log-shift base must exceed 1, got {0}")]
    ShiftBase(f64),
    #[error("horizon {0} too short, need at least 8")]
    Horizon(usize),
    #[error("malformed address: {0}")]
    Address(String),
    #[error("descent produced negative height offset {delta} at level {level}")]
    NegativeOffset { level: usize, delta: f64 },
    #[error("hair approximant at level {0} is not representable in double precision")]
    Unrepresentable(usize),
    #[error("too few rows for a rate fit: {0}")]
    TooFewRows(usize),
    #[error("degenerate slice plane: {0}")]
    Plane(String),
    #[error("invalid ledger: {0}")]
    Ledger(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}
