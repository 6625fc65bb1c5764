use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("surface dimension must be at least 1, got {0}")]
    InvalidDimension(usize),
    #[error("grid needs at least 8 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("expected {expected} node values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("spectrum has {got} coefficients but the grid resolves only {max}")]
    DegreeOverflow { got: usize, max: usize },
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("graph lost star-shapedness at node {0}")]
    NotStarShaped(usize),
    #[error("initial surface is not strictly convex (min principal curvature {0:e})")]
    NonConvexInput(f64),
    #[error("convexity lost at time {time} (min principal curvature {margin:e})")]
    ConvexityLost { time: f64, margin: f64 },
    #[error("step of size {dt:e} rejected: error norm {err:.3} exceeds tolerance")]
    StepRejected { dt: f64, err: f64 },
    #[error("minimum radius {r_min:e} fell below the resolution floor {floor:e} at time {time}")]
    Blowup { time: f64, r_min: f64, floor: f64 },
    #[error("rescaled mean radius {mean:e} left the admissible band at s = {time}")]
    Diverged { time: f64, mean: f64 },
    #[error("step budget of {0} exhausted")]
    MaxSteps(usize),
    #[error("step size underflow at time {0}")]
    StepUnderflow(f64),
    #[error("operation requires the {expected} frame")]
    FrameMismatch { expected: &'static str },
    #[error("extinction time {t_ext} is not beyond snapshot time {t}")]
    InconsistentT { t_ext: f64, t: f64 },
    #[error("shift of {0:e} is too large to re-sample the graph")]
    ShiftTooLarge(f64),
    #[error("series changes sign inside the fit window")]
    SignChange,
    #[error("fit window holds {0} points, need at least 10")]
    WindowTooShort(usize),
    #[error("series contains a zero value inside the fit window")]
    NonPositive,
    #[error("fitted slope {fitted} deviates from expected {expected} by more than 10%")]
    SlopeMismatch { fitted: f64, expected: f64 },
    #[error("mean curvature is not positive at node {0}")]
    NonPositiveH(usize),
    #[error("radius along direction {0} is not strictly decreasing in time")]
    NonMonotoneRadius(usize),
    #[error("radius {rho:e} is outside the sampled range along direction {direction}")]
    DirectionOutOfGraph { direction: usize, rho: f64 },
    #[error("ray samples reach only {rho_min:e}, need {needed:e} or smaller")]
    InsufficientResolution { rho_min: f64, needed: f64 },
    #[error("residual is indistinguishable from the noise floor ({points} radii above 10x noise)")]
    NoiseFloor { points: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
