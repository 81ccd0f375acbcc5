//! Wasserstein-ball estimator: AV@R-hedged bounds with radius and
//! density-bound schedules, plus Kusuoka-mixture risk estimation.
//!
//! The availability of a conservative estimate rests on hedged AV@R:
//! `inf_H AV@R_{1/k}(g - H(r-1))` computed under the empirical measure
//! is a lower bound for the ball estimator, and the box-restricted
//! variant plus the transport correction `2 L k eps` an upper bound.
//! Both sides are Rockafellar-Uryasev linear programs.
//!
//! Payoffs must carry a Lipschitz constant, either certified by the
//! payoff audit or declared by the caller. Without one the bounds are
//! refused: quadratic payoffs can push the ball estimator to infinity
//! and discontinuous indicators converge to the wrong value, so a
//! silent number would be meaningless. Bounded discontinuous payoffs
//! belong to the penalty estimator.

use crate::error::{Error, Result};
use crate::measures::{
    epsilon_schedule, DiscreteMeasure, ScheduleBranch, ScheduleParams,
};
use crate::payoff::PayoffExpr;
use crate::simplex::{solve_lp, Ineq, LinearProgram, LpStatus, Sense};

/// Rule generating the confidence sequence beta_N.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaRule {
    /// beta_N = exp(-sqrt(N)); summable, so almost-sure consistency.
    ExpSqrtN,
    Fixed(f64),
    /// Explicit sequence; the last entry repeats beyond its length.
    Custom(Vec<f64>),
}

impl BetaRule {
    pub fn beta(&self, n: usize) -> Result<f64> {
        let b = match self {
            BetaRule::ExpSqrtN => (-(n as f64).sqrt()).exp(),
            BetaRule::Fixed(b) => *b,
            BetaRule::Custom(seq) => {
                if seq.is_empty() {
                    return Err(Error::Parameter("empty custom beta sequence".into()));
                }
                seq[(n - 1).min(seq.len() - 1)]
            }
        };
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::Parameter(format!("beta_N = {b} outside (0, 1)")));
        }
        Ok(b)
    }
}

/// Rule mapping the radius to the density bound k_N.
#[derive(Debug, Clone, PartialEq)]
pub enum KRule {
    /// k = eps^{-gamma}; with gamma in (0, 1) the product k eps =
    /// eps^{1-gamma} vanishes along any shrinking radius schedule.
    Power { gamma: f64 },
    Fixed(f64),
    Custom(Vec<f64>),
}

/// Maps a radius to the density bound, capping at `cap` (1/min-weight)
/// so the AV@R level 1/k stays meaningful on the empirical measure.
pub fn k_schedule(epsilon: f64, rule: &KRule, cap: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!("k_schedule needs epsilon > 0, got {epsilon}")));
    }
    let k = match rule {
        KRule::Power { gamma } => {
            if !(*gamma > 0.0 && *gamma < 1.0) {
                return Err(Error::Parameter(format!("gamma = {gamma} outside (0, 1)")));
            }
            epsilon.powf(-gamma)
        }
        KRule::Fixed(k) => *k,
        KRule::Custom(seq) => {
            if seq.is_empty() {
                return Err(Error::Parameter("empty custom k sequence".into()));
            }
            *seq.last().unwrap()
        }
    };
    if !(k >= 1.0) {
        return Err(Error::Parameter(format!("density bound k = {k} < 1")));
    }
    Ok(k.min(cap))
}

/// Configuration of the ball estimator.
#[derive(Debug, Clone)]
pub struct WassersteinConfig {
    pub p: f64,
    pub schedule: ScheduleParams,
    pub branch: ScheduleBranch,
    pub beta_rule: BetaRule,
    pub k_rule: KRule,
    /// Additional fixed radius for superhedging under model
    /// uncertainty: the ball keeps radius eps + eps_N in the limit.
    pub fixed_radius: f64,
    /// l1 bound B on the strategy in the upper estimate.
    pub strategy_box: f64,
}

impl Default for WassersteinConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            schedule: ScheduleParams::default(),
            branch: ScheduleBranch::Iid,
            beta_rule: BetaRule::ExpSqrtN,
            k_rule: KRule::Power { gamma: 0.5 },
            fixed_radius: 0.0,
            strategy_box: 1.0,
        }
    }
}

impl WassersteinConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) {
            return Err(Error::Parameter(format!("p = {} < 1", self.p)));
        }
        if !(self.fixed_radius >= 0.0) {
            return Err(Error::Parameter("fixed_radius must be nonnegative".into()));
        }
        if !(self.strategy_box > 0.0) {
            return Err(Error::Parameter("strategy_box must be positive".into()));
        }
        if let KRule::Power { gamma } = self.k_rule {
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(Error::Parameter(format!("gamma = {gamma} outside (0, 1)")));
            }
        }
        Ok(())
    }

    /// Verifies k_N * eps_N(beta_N) is nonincreasing (toward 0) over an
    /// N range; the consistency proof needs the product to vanish.
    pub fn check_vanishing_product(&self, n_range: std::ops::RangeInclusive<usize>) -> Result<()> {
        self.validate()?;
        let mut prev = f64::INFINITY;
        for n in n_range {
            let beta = self.beta_rule.beta(n)?;
            let eps = epsilon_schedule(n, beta, &self.schedule, self.branch)?;
            let k = k_schedule(eps, &self.k_rule, f64::INFINITY)?;
            let prod = k * eps;
            if prod > prev + 1e-12 {
                return Err(Error::Parameter(format!(
                    "k_N * eps_N increases at N = {n} ({prev} -> {prod}); the schedule is inconsistent"
                )));
            }
            prev = prod;
        }
        Ok(())
    }
}

/// Result of the hedged AV@R program.
#[derive(Debug, Clone)]
pub struct HedgedAvar {
    pub value: f64,
    pub strategy: Vec<f64>,
}

/// Solves `inf over (x, H) of x + (1/alpha) E[(g(r) - H.(r-1) - x)+]`,
/// the Rockafellar-Uryasev form of `inf_H AV@R_alpha(g - H(r-1))`.
/// `strategy_box` adds `sum |H_j| <= B` via split variables.
pub fn avar_hedged(
    mu: &DiscreteMeasure,
    g: &PayoffExpr,
    alpha: f64,
    strategy_box: Option<f64>,
) -> Result<HedgedAvar> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Level(format!("AV@R level alpha = {alpha} outside (0, 1]")));
    }
    let n = mu.len();
    let d = mu.dim();
    let values: Result<Vec<f64>> = mu.atoms().iter().map(|a| g.eval(a)).collect();
    let values = values?;

    // variables: x, Hp_1..Hp_d, Hn_1..Hn_d, u_1..u_n
    let nv = 1 + 2 * d + n;
    let mut obj = vec![0.0; nv];
    obj[0] = 1.0;
    for (i, w) in mu.weights().iter().enumerate() {
        obj[1 + 2 * d + i] = w / alpha;
    }
    let mut lp = LinearProgram::new(Sense::Minimize, obj);
    for j in 0..2 * d {
        lp.set_bounds(1 + j, 0.0, f64::INFINITY);
    }
    for i in 0..n {
        lp.set_bounds(1 + 2 * d + i, 0.0, f64::INFINITY);
    }
    // x + H.(r_i - 1) + u_i >= g_i
    for (i, (atom, gi)) in mu.atoms().iter().zip(&values).enumerate() {
        let mut row = vec![0.0; nv];
        row[0] = 1.0;
        for (j, r) in atom.iter().enumerate() {
            row[1 + j] = r - 1.0;
            row[1 + d + j] = -(r - 1.0);
        }
        row[1 + 2 * d + i] = 1.0;
        lp.add_ineq(row, Ineq::Ge, *gi);
    }
    if let Some(b) = strategy_box {
        if !(b > 0.0) {
            return Err(Error::Parameter(format!("strategy box {b} must be positive")));
        }
        let mut row = vec![0.0; nv];
        for j in 0..2 * d {
            row[1 + j] = 1.0;
        }
        lp.add_ineq(row, Ineq::Le, b);
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Unbounded => {
            let ray = sol.ray.unwrap_or_default();
            let dir: Vec<f64> = (0..d).map(|j| ray.get(1 + j).unwrap_or(&0.0) - ray.get(1 + d + j).unwrap_or(&0.0)).collect();
            return Err(Error::ArbitrageDetected {
                strategy: dir,
                context: "hedged AV@R unbounded below (alpha = 1 with off-martingale barycenter, or structural)".into(),
            });
        }
        LpStatus::Infeasible => {
            return Err(Error::Parameter("hedged AV@R program infeasible".into()))
        }
    }
    let strategy: Vec<f64> = (0..d)
        .map(|j| sol.primal[1 + j] - sol.primal[1 + d + j])
        .collect();
    Ok(HedgedAvar { value: sol.objective, strategy })
}

/// Output of [`estimate_bounds`].
#[derive(Debug, Clone)]
pub struct BallBounds {
    pub lower: f64,
    pub upper: f64,
    pub epsilon: f64,
    pub k: f64,
    pub strategy: Vec<f64>,
}

/// Resolves the payoff's Lipschitz constant: explicit declaration wins,
/// then the audit; payoffs outside the auditable fragment without a
/// declared constant are refused.
pub fn resolve_lipschitz(g: &PayoffExpr, declared: Option<f64>) -> Result<f64> {
    if let Some(l) = declared {
        if !(l > 0.0) {
            return Err(Error::Parameter(format!("lipschitz constant {l} must be positive")));
        }
        return Ok(l);
    }
    g.lipschitz_bound().ok_or_else(|| {
        Error::LipschitzAudit(format!(
            "payoff `{}` is outside the auditable Lipschitz fragment and no constant was declared; \
             for bounded discontinuous payoffs use the penalty estimator",
            g.pretty()
        ))
    })
}

/// Two-sided estimate of the ball price: `lower = inf_H AV@R_{1/k}` on
/// the sample, `upper = box-restricted hedged AV@R + 2 L k eps`, with
/// eps from the concentration schedule plus any fixed model-uncertainty
/// radius and k from the k-rule capped at 1/min-weight.
pub fn estimate_bounds(
    mu: &DiscreteMeasure,
    g: &PayoffExpr,
    lipschitz: Option<f64>,
    cfg: &WassersteinConfig,
    n: usize,
) -> Result<BallBounds> {
    cfg.validate()?;
    let lip = resolve_lipschitz(g, lipschitz)?;
    let beta = cfg.beta_rule.beta(n)?;
    let epsilon = epsilon_schedule(n, beta, &cfg.schedule, cfg.branch)? + cfg.fixed_radius;
    let cap = 1.0 / mu.min_weight();
    let k = if epsilon > 0.0 {
        k_schedule(epsilon, &cfg.k_rule, cap)?
    } else {
        cap
    };
    let alpha = 1.0 / k;
    let lower = avar_hedged(mu, g, alpha, None)?;
    let boxed = avar_hedged(mu, g, alpha, Some(cfg.strategy_box))?;
    let upper = boxed.value + 2.0 * lip * k * epsilon;
    Ok(BallBounds { lower: lower.value, upper, epsilon, k, strategy: lower.strategy })
}

/// Finite mixture of AV@R levels representing a coherent risk measure.
#[derive(Debug, Clone, PartialEq)]
pub struct KusuokaMixture {
    pub levels: Vec<f64>,
    pub weights: Vec<f64>,
}

impl KusuokaMixture {
    pub fn new(levels: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if levels.is_empty() || levels.len() != weights.len() {
            return Err(Error::Parameter("mixture needs matching nonempty levels/weights".into()));
        }
        for a in &levels {
            if !(*a > 0.0 && *a <= 1.0) {
                return Err(Error::Level(format!("mixture level {a} outside (0, 1]")));
            }
        }
        for i in 0..levels.len() {
            for j in i + 1..levels.len() {
                if (levels[i] - levels[j]).abs() < 1e-12 {
                    return Err(Error::Parameter("mixture levels must be distinct".into()));
                }
            }
        }
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Parameter("mixture weights must be nonnegative".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("mixture weights sum to {s}, expected 1")));
        }
        Ok(Self { levels, weights })
    }
}

#[derive(Debug, Clone)]
pub struct KusuokaEstimate {
    pub lower: f64,
    pub upper: f64,
    pub strategy: Vec<f64>,
}

/// Risk estimate for a Kusuoka mixture with trading: one joint LP over
/// (H, per-level VaR anchors, per-level excesses) minimising
/// `sum_j w_j AV@R_{alpha_j}(g - H(r-1))`. Upper bound adds the
/// per-level worst-case transport correction `eps L sum_j w_j /
/// alpha_j` on the box-restricted strategy.
pub fn kusuoka_rho_estimate(
    mu: &DiscreteMeasure,
    g: &PayoffExpr,
    mixture: &KusuokaMixture,
    lipschitz: Option<f64>,
    cfg: &WassersteinConfig,
    n: usize,
) -> Result<KusuokaEstimate> {
    cfg.validate()?;
    let lip = resolve_lipschitz(g, lipschitz)?;
    let beta = cfg.beta_rule.beta(n)?;
    let epsilon = epsilon_schedule(n, beta, &cfg.schedule, cfg.branch)? + cfg.fixed_radius;

    let lower = kusuoka_joint_lp(mu, g, mixture, None)?;
    let boxed = kusuoka_joint_lp(mu, g, mixture, Some(cfg.strategy_box))?;
    let correction: f64 = mixture
        .levels
        .iter()
        .zip(&mixture.weights)
        .map(|(a, w)| w / a)
        .sum::<f64>()
        * epsilon
        * lip;
    Ok(KusuokaEstimate {
        lower: lower.value,
        upper: boxed.value + correction,
        strategy: lower.strategy,
    })
}

fn kusuoka_joint_lp(
    mu: &DiscreteMeasure,
    g: &PayoffExpr,
    mixture: &KusuokaMixture,
    strategy_box: Option<f64>,
) -> Result<HedgedAvar> {
    let n = mu.len();
    let d = mu.dim();
    let m = mixture.levels.len();
    let values: Result<Vec<f64>> = mu.atoms().iter().map(|a| g.eval(a)).collect();
    let values = values?;

    // variables: Hp_1..Hp_d, Hn_1..Hn_d, then per level j: x_j,
    // u_{j,1}..u_{j,n}
    let nv = 2 * d + m * (1 + n);
    let x_at = |j: usize| 2 * d + j * (1 + n);
    let u_at = |j: usize, i: usize| 2 * d + j * (1 + n) + 1 + i;
    let mut obj = vec![0.0; nv];
    for (j, (alpha, w)) in mixture.levels.iter().zip(&mixture.weights).enumerate() {
        obj[x_at(j)] = *w;
        for (i, wi) in mu.weights().iter().enumerate() {
            obj[u_at(j, i)] = w * wi / alpha;
        }
    }
    let mut lp = LinearProgram::new(Sense::Minimize, obj);
    for j in 0..2 * d {
        lp.set_bounds(j, 0.0, f64::INFINITY);
    }
    for j in 0..m {
        for i in 0..n {
            lp.set_bounds(u_at(j, i), 0.0, f64::INFINITY);
        }
    }
    for j in 0..m {
        for (i, (atom, gi)) in mu.atoms().iter().zip(&values).enumerate() {
            let mut row = vec![0.0; nv];
            row[x_at(j)] = 1.0;
            for (k, r) in atom.iter().enumerate() {
                row[k] = r - 1.0;
                row[d + k] = -(r - 1.0);
            }
            row[u_at(j, i)] = 1.0;
            lp.add_ineq(row, Ineq::Ge, *gi);
        }
    }
    if let Some(b) = strategy_box {
        let mut row = vec![0.0; nv];
        row[..2 * d].fill(1.0);
        lp.add_ineq(row, Ineq::Le, b);
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Unbounded => {
            return Err(Error::ArbitrageDetected {
                strategy: Vec::new(),
                context: "kusuoka risk program unbounded below".into(),
            })
        }
        LpStatus::Infeasible => {
            return Err(Error::Parameter("kusuoka risk program infeasible".into()))
        }
    }
    let strategy: Vec<f64> = (0..d).map(|j| sol.primal[j] - sol.primal[d + j]).collect();
    Ok(HedgedAvar { value: sol.objective, strategy })
}

/// The measures of the quadratic-payoff counterexample: a three-atom
/// perturbation `nu` of the point mass at 1 within W1 distance eps, and
/// a martingale measure `q` with density against nu bounded by
/// eps^{-1/2} whose expected payoff of (r-1)^2 grows like eps^{-1/2}/2.
/// Demonstrates why non-Lipschitz payoffs are refused.
pub fn unbounded_gain_example(eps: f64) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Parameter(format!("eps = {eps} outside (0, 0.5)")));
    }
    let r = 1.0 / eps; // outlier return
    let nu = DiscreteMeasure::from_scalars(
        &[0.0, 1.0, r],
        &[
            eps / 2.0,
            1.0 - r * eps / (2.0 * (r - 1.0)),
            eps / (2.0 * (r - 1.0)),
        ],
    )?;
    let s = eps.sqrt();
    let q = DiscreteMeasure::from_scalars(
        &[0.0, 1.0, r],
        &[
            eps / (2.0 * s),
            1.0 - r * eps / (2.0 * (r - 1.0) * s),
            eps / (2.0 * (r - 1.0) * s),
        ],
    )?;
    Ok((nu, q))
}
