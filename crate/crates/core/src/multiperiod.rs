//! Multiperiod plugin price by backward concatenation of concave
//! envelopes over a shared per-period sample support.
//!
//! For i.i.d. observations the T-period price is computed by dynamic
//! programming: at the last period, each path prefix prices its payoff
//! section with the one-period envelope at 1; the resulting values form
//! the next section one level up. `brute_force_oracle` solves one LP
//! over path probabilities with conditional-martingale constraints per
//! prefix, which must agree with the recursion.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::payoff::PayoffExpr;
use crate::pricing::{check_na, envelope_at_one};
use crate::simplex::{solve_lp, LinearProgram, LpStatus, Sense};

const RECURSION_PATH_CAP: usize = 1_000_000;
const ORACLE_PATH_CAP: usize = 10_000;

/// A T-period pricing problem over a shared one-dimensional support.
#[derive(Debug, Clone)]
pub struct MultiperiodProblem {
    pub periods: usize,
    pub samples: DiscreteMeasure,
    pub payoff: PayoffExpr,
}

impl MultiperiodProblem {
    pub fn new(periods: usize, samples: DiscreteMeasure, payoff: PayoffExpr) -> Result<Self> {
        if periods == 0 {
            return Err(Error::Parameter("periods must be >= 1".into()));
        }
        if samples.dim() != 1 {
            return Err(Error::UnsupportedDimension {
                dim: samples.dim(),
                context: "multiperiod recursion".into(),
            });
        }
        if payoff.arity() != periods {
            return Err(Error::Shape(format!(
                "payoff over {} coordinates, problem has {periods} periods",
                payoff.arity()
            )));
        }
        Ok(Self { periods, samples, payoff })
    }

    fn path_count(&self, cap: usize) -> Result<usize> {
        let n = self.samples.len();
        let mut total = 1usize;
        for _ in 0..self.periods {
            total = total.checked_mul(n).filter(|t| *t <= cap).ok_or_else(|| {
                Error::Size(format!(
                    "{n}^{} paths exceed the cap {cap}; coarsen the support",
                    self.periods
                ))
            })?;
        }
        Ok(total)
    }
}

/// T-period plugin price by backward envelope recursion.
pub fn multiperiod_plugin(problem: &MultiperiodProblem) -> Result<f64> {
    let na = check_na(&problem.samples)?;
    if !na.arbitrage_free {
        return Err(Error::ArbitrageDetected {
            strategy: Vec::new(),
            context: "sample support admits arbitrage".into(),
        });
    }
    problem.path_count(RECURSION_PATH_CAP)?;
    let xs = problem.samples.scalar_atoms()?;
    let n = xs.len();
    let t = problem.periods;

    // values over all prefixes of length t, lexicographic path order
    let mut level: Vec<f64> = {
        // deepest level: evaluate the payoff on full paths
        let count = n.pow(t as u32);
        let mut point = vec![0.0; t];
        let mut out = Vec::with_capacity(count);
        for idx in 0..count {
            let mut rem = idx;
            for slot in (0..t).rev() {
                point[slot] = xs[rem % n];
                rem /= n;
            }
            out.push(problem.payoff.eval(&point)?);
        }
        out
    };

    // roll back: each group of n consecutive values is a section priced
    // by the envelope at 1
    for _depth in (0..t).rev() {
        level = level
            .par_chunks(n)
            .map(|section| envelope_at_one(&xs, section).map(|(v, _, _)| v))
            .collect::<Result<Vec<f64>>>()?;
    }
    debug_assert_eq!(level.len(), 1);
    Ok(level[0])
}

/// Single-LP oracle: maximise the expected payoff over path
/// probabilities with Sum q = 1 and one conditional-martingale
/// constraint per prefix.
pub fn brute_force_oracle(problem: &MultiperiodProblem) -> Result<f64> {
    let total = problem.path_count(ORACLE_PATH_CAP)?;
    let xs = problem.samples.scalar_atoms()?;
    let n = xs.len();
    let t = problem.periods;

    let mut values = Vec::with_capacity(total);
    let mut point = vec![0.0; t];
    for idx in 0..total {
        let mut rem = idx;
        for slot in (0..t).rev() {
            point[slot] = xs[rem % n];
            rem /= n;
        }
        values.push(problem.payoff.eval(&point)?);
    }

    let mut lp = LinearProgram::new(Sense::Maximize, values);
    for j in 0..total {
        lp.set_bounds(j, 0.0, f64::INFINITY);
    }
    lp.add_eq(vec![1.0; total], 1.0);
    // E[r_level - 1 | prefix] = 0: paths sharing a prefix of length
    // `level` are grouped; the coefficient is r_{level+1} - 1
    for level in 0..t {
        let prefixes = n.pow(level as u32);
        let block = total / prefixes; // paths per prefix
        let sub = block / n; // paths per (prefix, next value)
        for p in 0..prefixes {
            let mut row = vec![0.0; total];
            for (j, x) in xs.iter().enumerate() {
                let start = p * block + j * sub;
                for v in row.iter_mut().skip(start).take(sub) {
                    *v = x - 1.0;
                }
            }
            lp.add_eq(row, 0.0);
        }
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        LpStatus::Infeasible => Err(Error::ArbitrageDetected {
            strategy: Vec::new(),
            context: "no conditional-martingale law on the path grid".into(),
        }),
        LpStatus::Unbounded => Err(Error::NaViolation("path LP unbounded".into())),
    }
}
