//! Closed catalogue of reference laws with analytic CDF and quantile
//! handles, used for rate experiments and inverse-CDF simulation.

use statrs::distribution::ContinuousCDF;

use super::DiscreteMeasure;
use crate::error::{Error, Result};

/// Reference distribution on the nonnegative half-line.
///
/// The catalogue is closed by design: rate experiments need true
/// quantiles and those are hand-checked per law.
#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    /// Uniform on [a, b], 0 <= a < b.
    Uniform { a: f64, b: f64 },
    /// Exponential with the given rate.
    Exponential { rate: f64 },
    /// exp(N(mu, sigma^2)).
    LogNormal { mu: f64, sigma: f64 },
    /// |N(0, 1)|.
    HalfNormal,
    /// Finitely supported law (dimension 1).
    Discrete(DiscreteMeasure),
    /// Density proportional to r^n on [0, 1] and (2-r)^n on [1, 2];
    /// a uniform law on [0, 2] with thinned-out tails. CDF r^(n+1)/2
    /// below 1, mirrored above.
    SymmetricPower { n: u32 },
}

impl Law {
    pub fn validate(&self) -> Result<()> {
        match self {
            Law::Uniform { a, b } => {
                if !(*a >= 0.0 && b > a) {
                    return Err(Error::Parameter(format!("uniform bounds [{a}, {b}]")));
                }
            }
            Law::Exponential { rate } => {
                if !(*rate > 0.0) {
                    return Err(Error::Parameter(format!("exponential rate {rate}")));
                }
            }
            Law::LogNormal { sigma, .. } => {
                if !(*sigma > 0.0) {
                    return Err(Error::Parameter(format!("lognormal sigma {sigma}")));
                }
            }
            Law::Discrete(d) => {
                if d.dim() != 1 {
                    return Err(Error::UnsupportedDimension {
                        dim: d.dim(),
                        context: "discrete law handle".into(),
                    });
                }
            }
            Law::HalfNormal | Law::SymmetricPower { .. } => {}
        }
        Ok(())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Law::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Law::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-rate * x).exp()
                }
            }
            Law::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal().cdf((x.ln() - mu) / sigma)
                }
            }
            Law::HalfNormal => {
                if x <= 0.0 {
                    0.0
                } else {
                    2.0 * std_normal().cdf(x) - 1.0
                }
            }
            Law::Discrete(d) => d.cdf(x),
            Law::SymmetricPower { n } => {
                let k = (*n + 1) as f64;
                if x <= 0.0 {
                    0.0
                } else if x <= 1.0 {
                    x.powf(k) / 2.0
                } else if x < 2.0 {
                    1.0 - (2.0 - x).powf(k) / 2.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Generalised inverse CDF. `quantile(0)` returns the infimum of
    /// the support (the right limit F^{-1}(0+)).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Level(format!("quantile level {p} outside [0, 1]")));
        }
        Ok(match self {
            Law::Uniform { a, b } => a + p * (b - a),
            Law::Exponential { rate } => {
                if p >= 1.0 {
                    f64::INFINITY
                } else {
                    -(1.0 - p).ln() / rate
                }
            }
            Law::LogNormal { mu, sigma } => match p {
                p if p <= 0.0 => 0.0,
                p if p >= 1.0 => f64::INFINITY,
                p => (mu + sigma * std_normal().inverse_cdf(p)).exp(),
            },
            Law::HalfNormal => match p {
                p if p <= 0.0 => 0.0,
                p if p >= 1.0 => f64::INFINITY,
                p => std_normal().inverse_cdf((1.0 + p) / 2.0),
            },
            Law::Discrete(d) => {
                let xs = d.scalar_atoms()?;
                if p <= 0.0 {
                    return Ok(xs[0]);
                }
                let mut acc = 0.0;
                for (x, w) in xs.iter().zip(d.weights()) {
                    acc += w;
                    if acc >= p - 1e-15 {
                        return Ok(*x);
                    }
                }
                *xs.last().expect("nonempty measure")
            }
            Law::SymmetricPower { n } => {
                let k = (*n + 1) as f64;
                if p < 0.5 {
                    (2.0 * p).powf(1.0 / k)
                } else {
                    2.0 - (2.0 * (1.0 - p)).powf(1.0 / k)
                }
            }
        })
    }

    /// Support bounds; upper bound may be infinite.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Law::Uniform { a, b } => (*a, *b),
            Law::Exponential { .. } | Law::LogNormal { .. } | Law::HalfNormal => {
                (0.0, f64::INFINITY)
            }
            Law::Discrete(d) => {
                let xs = d.scalar_atoms().expect("1-d law");
                (xs[0], *xs.last().unwrap())
            }
            Law::SymmetricPower { .. } => (0.0, 2.0),
        }
    }

    pub fn has_bounded_support(&self) -> bool {
        self.support().1.is_finite()
    }

    /// Parses a law description such as `uniform(0,2)`, `exp(1)`,
    /// `lognormal(0,1)`, `halfnormal`, `sympower(10)`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, args) = match text.find('(') {
            Some(i) if text.ends_with(')') => {
                let name = &text[..i];
                let inner = &text[i + 1..text.len() - 1];
                let args: std::result::Result<Vec<f64>, _> =
                    inner.split(',').map(|s| s.trim().parse::<f64>()).collect();
                (
                    name,
                    args.map_err(|e| Error::Parameter(format!("law `{text}`: {e}")))?,
                )
            }
            _ => (text, vec![]),
        };
        let law = match (name, args.as_slice()) {
            ("uniform", [a, b]) => Law::Uniform { a: *a, b: *b },
            ("exp" | "exponential", [rate]) => Law::Exponential { rate: *rate },
            ("lognormal", [mu, sigma]) => Law::LogNormal { mu: *mu, sigma: *sigma },
            ("halfnormal", []) => Law::HalfNormal,
            ("sympower", [n]) => Law::SymmetricPower { n: *n as u32 },
            _ => {
                return Err(Error::Parameter(format!(
                    "unknown law `{text}` (expected uniform(a,b), exp(rate), lognormal(m,s), halfnormal, sympower(n))"
                )))
            }
        };
        law.validate()?;
        Ok(law)
    }
}

fn std_normal() -> statrs::distribution::Normal {
    statrs::distribution::Normal::new(0.0, 1.0).expect("standard normal")
}
