//! One-period plugin superhedging: primal hedge LP, dual martingale LP,
//! exact 1-D concave envelope, no-arbitrage check, options-enlarged
//! markets and strategy verification.
//!
//! The primal program prices `g` as the least capital `x` such that
//! some static position `H` satisfies `x + H.(e(r)-1) >= g(r)` on every
//! atom, where `e` appends normalised option payoffs to the returns.
//! Its LP dual is the maximal expectation of `g` over martingale
//! measures on the atoms (consistent with quoted option prices), and in
//! dimension 1 both equal the upper concave envelope of the sampled
//! payoff evaluated at 1.

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::payoff::PayoffExpr;
use crate::simplex::{solve_lp, Ineq, LinearProgram, LpStatus, Sense};

/// Positivity threshold deciding no-arbitrage from the max-min-weight LP.
const NA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceRoute {
    Primal,
    Dual,
    Envelope,
}

/// A superhedging price with its strategy and dual weights.
#[derive(Debug, Clone)]
pub struct HedgePlan {
    /// Price in numeraire units.
    pub price: f64,
    /// Holdings per asset (plus one entry per quoted option, if any).
    pub strategy: Vec<f64>,
    /// Martingale weights over the atoms certifying optimality.
    pub dual_weights: Vec<f64>,
    pub route: PriceRoute,
}

/// A hedging instrument quoted in the market: payoff and positive price.
#[derive(Debug, Clone)]
pub struct OptionQuote {
    pub payoff: PayoffExpr,
    pub price: f64,
}

impl OptionQuote {
    pub fn new(payoff: PayoffExpr, price: f64) -> Result<Self> {
        if !(price > 0.0) {
            return Err(Error::Parameter(format!("option price {price} must be positive")));
        }
        Ok(Self { payoff, price })
    }
}

#[derive(Debug, Clone)]
pub enum NaWitness {
    /// Strictly positive martingale measure over the atoms.
    MartingaleMeasure(Vec<f64>),
    /// Strategy with H.(r-1) >= 0 on all atoms, > 0 on some.
    ArbitrageDirection(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct NaCheck {
    pub arbitrage_free: bool,
    pub witness: NaWitness,
}

/// Evaluated returns, extended by `f_j(r)/f0_j` per option quote.
fn evaluated_returns(mu: &DiscreteMeasure, options: &[OptionQuote]) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::with_capacity(mu.len());
    for atom in mu.atoms() {
        let mut row = atom.clone();
        for q in options {
            row.push(q.payoff.eval(atom)? / q.price);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Decides NA by maximising the minimal martingale weight: solves
/// `max tau s.t. sum q = 1, sum q.r = 1, q_i >= tau` and reports
/// arbitrage-free iff the optimum is strictly positive. On failure the
/// witness is a separating strategy found by a second LP.
pub fn check_na(mu: &DiscreteMeasure) -> Result<NaCheck> {
    let n = mu.len();
    let d = mu.dim();
    // variables: q_1..q_n, tau
    let mut obj = vec![0.0; n + 1];
    obj[n] = 1.0;
    let mut lp = LinearProgram::new(Sense::Maximize, obj);
    for j in 0..n {
        lp.set_bounds(j, 0.0, f64::INFINITY);
    }
    lp.set_bounds(n, f64::NEG_INFINITY, 1.0);
    let mut ones = vec![1.0; n];
    ones.push(0.0);
    lp.add_eq(ones, 1.0);
    for k in 0..d {
        let mut row: Vec<f64> = mu.atoms().iter().map(|a| a[k]).collect();
        row.push(0.0);
        lp.add_eq(row, 1.0);
    }
    for i in 0..n {
        let mut row = vec![0.0; n + 1];
        row[i] = 1.0;
        row[n] = -1.0;
        lp.add_ineq(row, Ineq::Ge, 0.0);
    }
    let sol = solve_lp(&lp)?;
    if sol.status == LpStatus::Optimal && sol.objective > NA_TOL {
        let q = sol.primal[..n].to_vec();
        return Ok(NaCheck { arbitrage_free: true, witness: NaWitness::MartingaleMeasure(q) });
    }
    Ok(NaCheck {
        arbitrage_free: false,
        witness: NaWitness::ArbitrageDirection(arbitrage_direction(mu)?),
    })
}

/// Finds H with H.(r-1) >= 0 on all atoms and > 0 somewhere, via
/// `max sum s_i s.t. H.(r_i - 1) >= s_i, 0 <= s_i <= 1, |H_j| <= 1`.
fn arbitrage_direction(mu: &DiscreteMeasure) -> Result<Vec<f64>> {
    let n = mu.len();
    let d = mu.dim();
    // variables: H_1..H_d, s_1..s_n
    let mut obj = vec![0.0; d + n];
    for s in obj.iter_mut().skip(d) {
        *s = 1.0;
    }
    let mut lp = LinearProgram::new(Sense::Maximize, obj);
    for j in 0..d {
        lp.set_bounds(j, -1.0, 1.0);
    }
    for i in 0..n {
        lp.set_bounds(d + i, 0.0, 1.0);
    }
    for (i, atom) in mu.atoms().iter().enumerate() {
        let mut row = vec![0.0; d + n];
        for (j, r) in atom.iter().enumerate() {
            row[j] = r - 1.0;
        }
        row[d + i] = -1.0;
        lp.add_ineq(row, Ineq::Ge, 0.0);
    }
    let sol = solve_lp(&lp)?;
    Ok(sol.primal[..d].to_vec())
}

/// Plugin price via the primal hedge LP. Among the optimal strategies
/// the l1-minimal one is returned (a secondary LP at the fixed optimal
/// price). An unbounded-below program means 1 lies outside the convex
/// hull of evaluated returns and is reported as arbitrage.
pub fn price_primal(
    mu: &DiscreteMeasure,
    g: &PayoffExpr,
    options: &[OptionQuote],
) -> Result<HedgePlan> {
    let rows = evaluated_returns(mu, options)?;
    let values: Result<Vec<f64>> = mu.atoms().iter().map(|a| g.eval(a)).collect();
    let values = values?;
    let m = rows[0].len(); // d + number of options

    // variables: x, H_1..H_m
    let mut lp = LinearProgram::new(Sense::Minimize, {
        let mut c = vec![0.0; 1 + m];
        c[0] = 1.0;
        c
    });
    for (row, gi) in rows.iter().zip(&values) {
        let mut r = Vec::with_capacity(1 + m);
        r.push(1.0);
        r.extend(row.iter().map(|e| e - 1.0));
        lp.add_ineq(r, Ineq::Ge, *gi);
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Unbounded => {
            let ray = sol.ray.unwrap_or_default();
            return Err(Error::ArbitrageDetected {
                strategy: ray.get(1..).map(|h| h.to_vec()).unwrap_or_default(),
                context: "hedge cost unbounded below: 1 is outside the convex hull of evaluated returns"
                    .into(),
            });
        }
        LpStatus::Infeasible => {
            return Err(Error::QuoteArbitrage(
                "primal hedge program infeasible".into(),
            ))
        }
        LpStatus::Optimal => {}
    }
    let price = sol.objective;
    let dual_weights = sol.dual_ineq.clone();

    // secondary LP: minimise sum |H_j| among optimal strategies, with
    // H = Hp - Hn split
    let mut lp2 = LinearProgram::new(Sense::Minimize, vec![1.0; 2 * m]);
    for j in 0..2 * m {
        lp2.set_bounds(j, 0.0, f64::INFINITY);
    }
    for (row, gi) in rows.iter().zip(&values) {
        let mut r = Vec::with_capacity(2 * m);
        for e in row {
            r.push(e - 1.0);
        }
        for e in row {
            r.push(-(e - 1.0));
        }
        lp2.add_ineq(r, Ineq::Ge, gi - price);
    }
    let sol2 = solve_lp(&lp2)?;
    let strategy = match sol2.status {
        LpStatus::Optimal => (0..m)
            .map(|j| sol2.primal[j] - sol2.primal[m + j])
            .collect(),
        // price solved but the re-anchored program is borderline
        // infeasible from float drift; keep the first-stage strategy
        _ => sol.primal[1..].to_vec(),
    };

    Ok(HedgePlan { price, strategy, dual_weights, route: PriceRoute::Primal })
}

/// Plugin price via the dual martingale LP
/// `max sum q_i g(r_i) s.t. q >= 0, sum q = 1, sum q_i e(r_i) = 1`.
/// Requires NA; option constraints may make the program infeasible,
/// which is reported as quote arbitrage.
pub fn price_dual(
    mu: &DiscreteMeasure,
    g: &PayoffExpr,
    options: &[OptionQuote],
) -> Result<HedgePlan> {
    let na = check_na(mu)?;
    if !na.arbitrage_free {
        let h = match na.witness {
            NaWitness::ArbitrageDirection(h) => h,
            NaWitness::MartingaleMeasure(_) => Vec::new(),
        };
        return Err(Error::NaViolation(format!(
            "no equivalent martingale measure on the sample; arbitrage direction {h:?}"
        )));
    }
    let rows = evaluated_returns(mu, options)?;
    let values: Result<Vec<f64>> = mu.atoms().iter().map(|a| g.eval(a)).collect();
    let values = values?;
    let n = mu.len();
    let m = rows[0].len();

    let mut lp = LinearProgram::new(Sense::Maximize, values);
    for j in 0..n {
        lp.set_bounds(j, 0.0, f64::INFINITY);
    }
    lp.add_eq(vec![1.0; n], 1.0);
    for k in 0..m {
        lp.add_eq(rows.iter().map(|r| r[k]).collect(), 1.0);
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Infeasible => {
            return Err(Error::QuoteArbitrage(
                "no martingale measure consistent with the quoted option prices".into(),
            ))
        }
        LpStatus::Unbounded => {
            return Err(Error::NaViolation("dual program unbounded".into()))
        }
        LpStatus::Optimal => {}
    }
    // duals of the martingale rows are the hedge; the cash row dual and
    // the hedge absorb into price = x0 + sum H_k
    let strategy = sol.dual_eq[1..].to_vec();
    Ok(HedgePlan {
        price: sol.objective,
        strategy,
        dual_weights: sol.primal,
        route: PriceRoute::Dual,
    })
}

/// Exact plugin price in dimension 1: upper concave envelope of the
/// sampled payoff by monotone-chain upper hull, evaluated at 1. The
/// supporting slope is the strategy and the bracketing hull vertices
/// give the dual weights.
pub fn envelope_price_1d(mu: &DiscreteMeasure, g: &PayoffExpr) -> Result<HedgePlan> {
    if mu.dim() != 1 {
        return Err(Error::UnsupportedDimension { dim: mu.dim(), context: "envelope_price_1d".into() });
    }
    let xs = mu.scalar_atoms()?; // sorted ascending by canonical form
    let values: Result<Vec<f64>> = mu.atoms().iter().map(|a| g.eval(a)).collect();
    let values = values?;
    envelope_at_one(&xs, &values).map(|(price, slope, weights)| HedgePlan {
        price,
        strategy: vec![slope],
        dual_weights: weights,
        route: PriceRoute::Envelope,
    })
}

/// Upper concave envelope of the points (xs, values) at the spot 1.
/// `xs` must be sorted ascending and distinct. Returns (value, slope,
/// per-point dual weights).
pub(crate) fn envelope_at_one(xs: &[f64], values: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    let n = xs.len();
    if n == 0 {
        return Err(Error::EmptySample("envelope of no points".into()));
    }
    if !(xs[0] <= 1.0 && 1.0 <= xs[n - 1]) {
        // direction of the arbitrage: long if all returns above 1
        let h = if xs[0] > 1.0 { 1.0 } else { -1.0 };
        return Err(Error::ArbitrageDetected {
            strategy: vec![h],
            context: format!("1 outside the sample range [{}, {}]", xs[0], xs[n - 1]),
        });
    }
    // Andrew monotone chain, upper hull: scan left to right, keep turns
    // clockwise (cross >= 0 pops).
    let mut hull: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (xs[b] - xs[a]) * (values[i] - values[a])
                - (values[b] - values[a]) * (xs[i] - xs[a]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    // locate the hull segment containing 1
    let mut weights = vec![0.0; n];
    let pos = hull.partition_point(|&i| xs[i] < 1.0);
    if pos < hull.len() && xs[hull[pos]] == 1.0 {
        let v = hull[pos];
        weights[v] = 1.0;
        // supporting slope: prefer the right segment, fall back to left
        let slope = if pos + 1 < hull.len() {
            segment_slope(xs, values, hull[pos], hull[pos + 1])
        } else if pos > 0 {
            segment_slope(xs, values, hull[pos - 1], hull[pos])
        } else {
            0.0
        };
        return Ok((values[v], slope, weights));
    }
    let (a, b) = (hull[pos - 1], hull[pos]);
    let slope = segment_slope(xs, values, a, b);
    let price = values[a] + slope * (1.0 - xs[a]);
    let wb = (1.0 - xs[a]) / (xs[b] - xs[a]);
    weights[a] = 1.0 - wb;
    weights[b] = wb;
    Ok((price, slope, weights))
}

fn segment_slope(xs: &[f64], values: &[f64], a: usize, b: usize) -> f64 {
    (values[b] - values[a]) / (xs[b] - xs[a])
}

/// Checks `x + H.(e(r_i)-1) >= g(r_i) - tol` on every atom; returns
/// whether the plan superhedges and the minimal slack (negative slack
/// is the worst violation).
pub fn verify_superhedge(
    plan: &HedgePlan,
    mu: &DiscreteMeasure,
    g: &PayoffExpr,
    options: &[OptionQuote],
    tol: f64,
) -> Result<(bool, f64)> {
    let rows = evaluated_returns(mu, options)?;
    let mut min_slack = f64::INFINITY;
    for (row, atom) in rows.iter().zip(mu.atoms()) {
        let hedge: f64 = plan
            .strategy
            .iter()
            .zip(row)
            .map(|(h, e)| h * (e - 1.0))
            .sum();
        let slack = plan.price + hedge - g.eval(atom)?;
        min_slack = min_slack.min(slack);
    }
    Ok((min_slack >= -tol, min_slack))
}
