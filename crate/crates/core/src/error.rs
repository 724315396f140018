use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid prefix: {0}")]
    InvalidPrefix(String),

    #[error("transcript is complete, there is no next round")]
    NoNextRound,

    #[error("node budget of {budget} exceeded; use Monte Carlo mode for this protocol")]
    BudgetExceeded { budget: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("utility is not centered: mean is {mean:e}")]
    InvalidUtility { mean: f64 },

    #[error("utility value {value} is below -1/alpha = {bound}")]
    InvalidBias { value: f64, bound: f64 },

    #[error("attack infeasible at round {round}: {reason}")]
    AttackInfeasible { round: usize, reason: String },

    #[error("posterior undefined: {0} has not spoken in the given prefix")]
    UndefinedPosterior(String),

    #[error("composition requires a deterministic inner adversary, got {0}")]
    CompositionContract(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
}
