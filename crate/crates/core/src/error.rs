use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("inadmissible profile: {0}")]
    InadmissibleProfile(String),

    #[error("arclength {s} outside [0, {half_length}]")]
    OutOfRange { s: f64, half_length: f64 },

    #[error("pole approach at s = {s} (r = {r:.3e})")]
    PoleApproach { s: f64, r: f64 },

    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),

    #[error("no section crossing within horizon {0}")]
    NoCrossing(f64),

    #[error(
        "quadrature did not converge: estimated error {error:.3e} after {intervals} intervals"
    )]
    Quadrature { error: f64, intervals: usize },

    #[error("bracket search failed: {0}")]
    Bracket(String),

    #[error("table does not cover eta = {0}")]
    TableCoverage(f64),

    #[error("escaped the open annulus: eta = {0}")]
    AnnulusEscape(f64),

    #[error("degenerate endpoint: det(Psi(1) - I) = {0:.3e}")]
    DegenerateEndpoint(f64),

    #[error("unresolvable crossing near t = {0}")]
    UnresolvableCrossing(f64),

    #[error("path is not a loop: |Psi(1) - Psi(0)| = {0:.3e}")]
    NotALoop(f64),

    #[error("curves too close: minimum distance {0:.3e}")]
    CurvesTooClose(f64),

    #[error("linking sum not near an integer: residual {0:.3e}")]
    LinkingResidual(f64),

    #[error("boundary squares to a nonzero map in degree {0}")]
    BoundarySquare(i32),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("linking table mismatch: {0}")]
    LinkTable(String),

    #[error("closure check failed: {0}")]
    Closure(String),

    #[error("not enough points for a fit: {0}")]
    InsufficientPoints(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
