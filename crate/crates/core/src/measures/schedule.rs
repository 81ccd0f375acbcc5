//! Concentration radii and interquantile machinery.
//!
//! `epsilon_schedule` turns a sample size and confidence level into a
//! Wasserstein-ball radius, either from the exponential-moment
//! concentration bound (i.i.d. branch) or from a Markov-chain moment
//! bound (markov branch). `kappa_interquantile` measures how well a
//! law spreads mass over its support; it drives the plugin convergence
//! rate.

use super::Law;
use crate::error::{Error, Result};

/// Constants feeding the radius schedules.
///
/// `c1`, `c2` are the concentration constants of the i.i.d. tail bound;
/// they depend only on (p, d, a, c) but no closed form is available, so
/// they are user parameters with default 1. `a`, `c` are the
/// exponential-moment parameters (E[exp(c |r|^a)] finite). For the
/// markov branch, `q` and `s` are the moment and mixing orders and
/// `kappa_n` optionally pins the moment bound E[W^p(P, P_N)^p] directly.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleParams {
    pub c1: f64,
    pub c2: f64,
    pub a: f64,
    pub c: f64,
    pub p: f64,
    pub d: usize,
    pub q: f64,
    pub s: f64,
    pub kappa_n: Option<f64>,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 1.0,
            a: 1.0,
            c: 1.0,
            p: 1.0,
            d: 1,
            q: 8.0,
            s: 4.0,
            kappa_n: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleBranch {
    /// i.i.d. samples with an exponential moment.
    Iid,
    /// Ergodic Markov-chain samples with polynomial moments.
    Markov,
}

impl ScheduleParams {
    fn validate(&self, branch: ScheduleBranch) -> Result<()> {
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::Parameter(format!(
                "concentration constants must be positive (c1 = {}, c2 = {})",
                self.c1, self.c2
            )));
        }
        if !(self.p >= 1.0) {
            return Err(Error::Parameter(format!("wasserstein order p = {} < 1", self.p)));
        }
        if !(self.a > 0.0) {
            return Err(Error::Parameter(format!("moment exponent a = {} <= 0", self.a)));
        }
        match branch {
            ScheduleBranch::Iid => {
                if self.d as f64 == 2.0 * self.p {
                    return Err(Error::Parameter(format!(
                        "iid branch requires d != 2p (d = {}, p = {})",
                        self.d, self.p
                    )));
                }
            }
            ScheduleBranch::Markov => {
                if self.kappa_n.is_none() {
                    if !(self.s > 3.0) {
                        return Err(Error::Parameter(format!("markov branch needs s > 3 (s = {})", self.s)));
                    }
                    if !(self.q > 2.0 * self.p * self.s / (self.s - 2.0)) {
                        return Err(Error::Parameter(format!(
                            "markov branch needs q > 2ps/(s-2) (q = {}, p = {}, s = {})",
                            self.q, self.p, self.s
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Moment bound kappa_N for the markov branch: the precomputed value
    /// if given, otherwise the rate formula with unit constant.
    fn kappa(&self, n: usize) -> f64 {
        if let Some(k) = self.kappa_n {
            return k;
        }
        let nf = n as f64;
        let (p, d) = (self.p, self.d as f64);
        let qs = self.q * (self.s - 2.0) / (2.0 * self.s);
        let ds = d * (3.0 * self.s + 2.0) / (2.0 * self.s);
        let moment_term = nf.powf(-(qs - p) / qs);
        if p > ds / 2.0 {
            nf.powf(-0.5) + moment_term
        } else if p == ds / 2.0 {
            nf.powf(-0.5) * (1.0 + nf).ln() + moment_term
        } else {
            nf.powf(-p / d) + moment_term
        }
    }
}

/// Radius epsilon_N(beta) such that the sampling law lies in the W^p
/// ball of that radius around the empirical measure with probability at
/// least 1 - beta.
pub fn epsilon_schedule(
    n: usize,
    beta: f64,
    params: &ScheduleParams,
    branch: ScheduleBranch,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::Parameter("sample size N = 0".into()));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Parameter(format!("confidence beta = {beta} outside (0, 1)")));
    }
    params.validate(branch)?;
    let nf = n as f64;
    match branch {
        ScheduleBranch::Iid => {
            let log_term = (params.c1 / beta).ln();
            let base = log_term / (params.c2 * nf);
            let d_over_p = params.d as f64 / params.p;
            let small_exp = d_over_p.max(2.0).min(params.a / (2.0 * params.p));
            // Piecewise in N: the small-radius exponent applies once N
            // clears log(c1/beta)/c2, the large-radius tail otherwise.
            if nf >= log_term / params.c2 {
                Ok(base.powf(1.0 / small_exp))
            } else {
                Ok(base.powf(2.0 * params.p / params.a))
            }
        }
        ScheduleBranch::Markov => Ok((params.kappa(n) / beta).powf(1.0 / params.p)),
    }
}

/// Largest interquantile distance at spacing 3 d_N.
///
/// kappa^N = sup over k = 0..floor(1/(3 d_N)) of the gaps
/// F^{-1}(3 k d_N) - F^{-1}((3(k-1) d_N v 0)+), with the boundary term
/// k = 0 equal to F^{-1}(1) - F^{-1}(1 - d_N) for laws with bounded
/// support and 0 otherwise.
pub fn kappa_interquantile(law: &Law, d_n: f64, bounded: bool) -> Result<f64> {
    if !(d_n > 0.0 && d_n <= 1.0 / 3.0) {
        return Err(Error::Level(format!("d_N = {d_n} outside (0, 1/3]")));
    }
    let kmax = (1.0 / (3.0 * d_n)).floor() as usize;
    let mut sup = if bounded {
        law.quantile(1.0)? - law.quantile(1.0 - d_n)?
    } else {
        0.0
    };
    for k in 1..=kmax {
        let hi = law.quantile(3.0 * k as f64 * d_n)?;
        let lo = law.quantile((3.0 * (k as f64 - 1.0) * d_n).max(0.0))?;
        sup = sup.max(hi - lo);
    }
    Ok(sup)
}

/// Dvoretzky-Kiefer-Wolfowitz tail bound P(d_N > eps) <= 2 exp(-2 N eps^2),
/// capped at 1.
pub fn dkw_bound(n: usize, eps: f64) -> f64 {
    if eps <= 0.0 {
        return 1.0;
    }
    (2.0 * (-2.0 * n as f64 * eps * eps).exp()).min(1.0)
}
