use thiserror::Error;

/// Why an allocation LP has no feasible point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibilityCause {
    /// Sum of the per-resource upper bounds cannot reach the aggregate target.
    Capacity,
    /// Sum of the per-resource lower bounds already exceeds the aggregate target.
    Bounds,
    /// Box bounds are compatible with the targets but injection limits are not.
    InjectionLimits,
}

impl std::fmt::Display for InfeasibilityCause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Capacity => "capacity",
            Self::Bounds => "bounds",
            Self::InjectionLimits => "injection limits",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("overdamped regime (zeta = {zeta}); closed-form response requires 0 < zeta < 1")]
    OverdampedRegime { zeta: f64 },

    #[error("scenario has {found} periods but forecast has {expected}")]
    ScenarioMismatch { expected: usize, found: usize },

    #[error("scenario count {count} exceeds cap {cap}")]
    CombinatorialOverflow { count: f64, cap: usize },

    #[error("integration step {dt} exceeds T_sg/100 = {max}")]
    StepTooLarge { dt: f64, max: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("feasible region is empty")]
    EmptyRegion,

    #[error("no feasible inertia at damping {d}")]
    EmptyColumn { d: f64 },

    #[error("allocation infeasible ({cause})")]
    AllocationInfeasible { cause: InfeasibilityCause },

    #[error("linear program infeasible")]
    LpInfeasible,

    #[error("linear program unbounded")]
    LpUnbounded,

    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
