use thiserror::Error;

pub type Result<T> = std::result::Result<T, TunnelError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TunnelError {
    #[error("invalid potential specification: {0}")]
    InvalidSpec(String),

    #[error("x = {x} lies outside the tabulated domain [{x_min}, {x_max}]")]
    Domain { x: f64, x_min: f64, x_max: f64 },

    #[error("potential is not differentiable at breakpoint x = {x}")]
    NonDifferentiable { x: f64 },

    #[error("region mismatch: {0}")]
    RegionMismatch(String),

    #[error("no region of the requested kind is bounded by two simple turning points")]
    NoBoundedRegion,

    #[error("energy drift {drift:e} exceeds {limit:e}; reduce dt")]
    StepSize { drift: f64, limit: f64 },

    #[error("tangential turning point at x = {x}: the period diverges")]
    DivergentPeriod { x: f64 },

    #[error("sample x = {x} is within {dist_min:e} of a turning point where WKB diverges")]
    TurningPointDivergence { x: f64, dist_min: f64 },

    #[error("no barrier at E = {energy}: {reason}")]
    NoBarrier { energy: f64, reason: String },

    #[error("E = {energy} is not above the asymptotic level {asymptote}: no propagating channel")]
    NoPropagatingChannel { energy: f64, asymptote: f64 },

    #[error("potential is not flat over the outer 5% of the domain (deviation {deviation:e}); widen the domain")]
    DomainPadding { deviation: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("dynamic range exceeded at x = {x} even with segment-wise renormalization")]
    DynamicRange { x: f64 },

    #[error("test function does not vanish at the grid boundary (|f| = {value:e})")]
    BoundaryCondition { value: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("|v| = {v} is not below c = {c}")]
    Superluminal { v: f64, c: f64 },
}

impl TunnelError {
    /// Stable kebab-case name printed by the CLI on the diagnostic stream.
    pub fn name(&self) -> &'static str {
        match self {
            Self::InvalidSpec(_) => "invalid-spec",
            Self::Domain { .. } => "domain",
            Self::NonDifferentiable { .. } => "non-differentiable",
            Self::RegionMismatch(_) => "region-mismatch",
            Self::NoBoundedRegion => "no-bounded-region",
            Self::StepSize { .. } => "step-size",
            Self::DivergentPeriod { .. } => "divergent-period",
            Self::TurningPointDivergence { .. } => "turning-point-divergence",
            Self::NoBarrier { .. } => "no-barrier",
            Self::NoPropagatingChannel { .. } => "no-propagating-channel",
            Self::DomainPadding { .. } => "domain-padding",
            Self::NumericalFailure(_) => "numerical-failure",
            Self::DynamicRange { .. } => "dynamic-range",
            Self::BoundaryCondition { .. } => "boundary-condition",
            Self::InvalidGrid(_) => "invalid-grid",
            Self::Superluminal { .. } => "domain",
        }
    }
}
