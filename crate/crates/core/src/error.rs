//! Crate-wide error type.
//!
//! Estimation pipelines cross module boundaries freely (a backtest runs
//! simulators, payoff evaluation and LP solves per window), so a single
//! error enum keeps propagation simple. Variants correspond to the
//! distinct failure classes surfaced by the library API.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An operation that requires at least one observation got none.
    #[error("empty sample: {0}")]
    EmptySample(String),

    /// A return or atom coordinate outside the nonnegative domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A distance or quantile operation was asked for in dimension > 1.
    #[error("unsupported dimension {dim}: {context}")]
    UnsupportedDimension { dim: usize, context: String },

    /// An AV@R or quantile level outside its valid range.
    #[error("level error: {0}")]
    Level(String),

    /// An invalid schedule, payoff or model parameter.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Matrix/vector length mismatch in a linear program.
    #[error("shape error: {0}")]
    Shape(String),

    /// The simplex solver hit its pivot cap without converging.
    #[error("solver stall after {iterations} pivots: {context}")]
    SolverStall { iterations: usize, context: String },

    /// The data admit an arbitrage; the separating strategy is attached
    /// so the offending observations can be audited.
    #[error("arbitrage detected: {context}")]
    ArbitrageDetected { strategy: Vec<f64>, context: String },

    /// A dual pricing routine was invoked on a measure without a
    /// martingale measure equivalent to it.
    #[error("no-arbitrage violation: {0}")]
    NaViolation(String),

    /// Quoted option prices are inconsistent with the return support.
    #[error("quote arbitrage: {0}")]
    QuoteArbitrage(String),

    /// Payoff evaluation failed; carries the offending subexpression.
    #[error("evaluation error in `{subexpr}`: {context}")]
    Eval { subexpr: String, context: String },

    /// Payoff parsing failed.
    #[error("parse error at position {position}: {context}")]
    Parse { position: usize, context: String },

    /// Invalid study, grid or run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A multiperiod problem too large to enumerate.
    #[error("size error: {0}")]
    Size(String),

    /// GARCH parameters violate the stationarity condition.
    #[error("stationarity error: {0}")]
    Stationarity(String),

    /// An estimator was asked to certify a payoff without a Lipschitz
    /// constant. Discontinuous bounded payoffs belong to the penalty
    /// estimator instead.
    #[error("lipschitz audit failed: {0}")]
    LipschitzAudit(String),

    /// I/O failure reading or writing data files.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
