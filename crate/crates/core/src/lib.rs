// Validation predicates are written `!(x > 0.0)` on purpose: the
// negation also rejects NaN, which `x <= 0.0` lets through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Superhedging price and hedged risk-measure estimation from
//! historical return samples.
//!
//! The library prices an option payoff `g` directly from observed gross
//! returns without fitting a parametric model. The plugin estimator
//! prices under the empirical measure (a concave-envelope / LP
//! computation); the Wasserstein-ball, penalty and support-fattening
//! estimators enlarge the empirical measure to deliver conservative
//! estimates with statistical guarantees. Simulators, convergence-rate
//! studies and a rolling backtest harness reproduce the behaviour of
//! the estimators on synthetic and historical data.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod measures;
pub mod multiperiod;
pub mod payoff;
pub mod penalty;
pub mod pricing;
pub mod simplex;
pub mod simulate;
pub mod wasserstein;
pub mod winf;

pub use error::{Error, Result};
