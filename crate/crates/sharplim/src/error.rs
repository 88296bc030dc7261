use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("nonlinearity is not bistable: {0}")]
    NonBistable(String),
    #[error("potential is not balanced: residual {0:e}")]
    UnbalancedPotential(f64),
    #[error("negative potential gap {gap:e} at u = {u}")]
    QuadratureSingularity { u: f64, gap: f64 },
    #[error("solvability condition violated: residual {residual:e}")]
    SolvabilityViolation { residual: f64 },
    #[error("inner integral does not converge at the tails ({0:e})")]
    TailDivergence(f64),
    #[error("argument {xi} outside the admissible box (-{bound}, {bound})")]
    OutOfBox { xi: f64, bound: f64 },
    #[error("flow crossed the zero {zero} of f_delta")]
    BranchCross { zero: f64 },
    #[error("xi = {0} is a zero of f_delta")]
    AtEquilibrium(f64),
    #[error("time step {dt:e} exceeds the explicit limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("grid too coarse: eps = {eps}, h = {h} (need eps >= 4h)")]
    GridTooCoarse { eps: f64, h: f64 },
    #[error("non-finite value produced at t = {0}")]
    NonFinite(f64),
    #[error("no interface: the field does not cross the level")]
    InterfaceLost,
    #[error("radius reached zero at t = {0}")]
    NonPositiveRadius(f64),
    #[error("redistancing failed: {0}")]
    ReinitDiverged(String),
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),
    #[error("no admissible tuning: {0}")]
    DegenerateTuning(String),
    #[error("interface never generated before t = {0}")]
    NeverGenerated(f64),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
