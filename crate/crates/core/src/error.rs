use thiserror::Error;

/// A vertex was fractional in the branching variable.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("vertex has fractional value {value} in branching variable {var}")]
pub struct SplitError {
    pub var: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LmoError {
    #[error("node bounds cross on variable {var}")]
    NodeInfeasible { var: usize },
    #[error("no perfect assignment avoids the forbidden entries")]
    AssignmentInfeasible,
    #[error("budget {budget} cannot be met within bounds (sum of lower {lower_sum}, sum of upper {upper_sum})")]
    BudgetInfeasible {
        budget: f64,
        lower_sum: f64,
        upper_sum: f64,
    },
    #[error("no path from node {source_node} to node {dest}")]
    UnreachableDemand { source_node: usize, dest: usize },
    #[error("direction has a non-finite entry at {index}")]
    InvalidDirection { index: usize },
    #[error("{0} is not provided by this oracle")]
    Unsupported(&'static str),
    #[error("assignment dimension {0} exceeds the supported maximum")]
    DimensionTooLarge(usize),
    #[error("bound value {value} is not allowed for variable {var}")]
    InvalidBound { var: usize, value: f64 },
    #[error("oracle reported infeasibility: {0}")]
    Infeasible(String),
}

impl LmoError {
    /// Errors that mean "this node's region is empty" rather than a bug.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            LmoError::NodeInfeasible { .. }
                | LmoError::AssignmentInfeasible
                | LmoError::BudgetInfeasible { .. }
                | LmoError::Infeasible(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FwError {
    #[error(transparent)]
    Lmo(#[from] LmoError),
    #[error("iterate left the objective domain")]
    DomainFailure,
    #[error("line search direction is not a descent direction (slope {0})")]
    NonDescentDirection(f64),
    #[error("projection never reached the objective domain")]
    WarmStartFailure,
    #[error("the decomposition-invariant variant needs in-face and max-step oracles")]
    MissingInFaceOracle,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("the root problem is infeasible")]
    Infeasible,
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("callback aborted the solve: {0}")]
    Callback(String),
    #[error(transparent)]
    Lmo(#[from] LmoError),
    #[error(transparent)]
    Fw(#[from] FwError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("information matrix is not positive definite")]
    DomainViolation,
    #[error("experiment matrix has rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("warm start failed: {0}")]
    WarmStart(#[from] FwError),
}
