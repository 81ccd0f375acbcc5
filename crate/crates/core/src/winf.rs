//! Support-fattening estimator for compactly supported laws with
//! two-sided density bounds.
//!
//! Every law within sup-transport distance `l` of the empirical measure
//! has its support inside the union of l-balls around the sample
//! points, and the price depends on the law through its support only.
//! So the estimate is the plugin price over the fattened support,
//! discretised at a configurable mesh with interval endpoints kept
//! exact.

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::payoff::PayoffExpr;
use crate::pricing::{envelope_at_one, HedgePlan, PriceRoute};

#[derive(Debug, Clone)]
pub struct WinfConfig {
    /// Two-sided density bound of the sampling law (1/alpha <= density
    /// <= alpha); must be supplied a priori.
    pub alpha: f64,
    /// Domain constant for the d >= 2 radius formula.
    pub c_da: f64,
    /// Discretisation step; defaults to radius/20.
    pub mesh: Option<f64>,
    pub radius_override: Option<f64>,
}

impl Default for WinfConfig {
    fn default() -> Self {
        Self { alpha: 1.0, c_da: 1.0, mesh: None, radius_override: None }
    }
}

impl WinfConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha >= 1.0) {
            return Err(Error::Parameter(format!("density bound alpha = {} < 1", self.alpha)));
        }
        if let Some(m) = self.mesh {
            if !(m > 0.0) {
                return Err(Error::Parameter(format!("mesh = {m} must be positive")));
            }
        }
        Ok(())
    }
}

/// Fattening radius l_N: `alpha N^{-1/4}` in dimension 1,
/// `C log(N)^{3/4} / sqrt(N)` in dimension 2 and `C (log N / N)^{1/d}`
/// above; an explicit override wins.
pub fn radius_schedule(n: usize, d: usize, cfg: &WinfConfig) -> Result<f64> {
    cfg.validate()?;
    if let Some(r) = cfg.radius_override {
        if !(r >= 0.0) {
            return Err(Error::Parameter(format!("radius override {r} must be nonnegative")));
        }
        return Ok(r);
    }
    if n < 2 {
        return Err(Error::Parameter("radius schedule needs N >= 2".into()));
    }
    let nf = n as f64;
    Ok(match d {
        0 => return Err(Error::Parameter("dimension 0".into())),
        1 => cfg.alpha * nf.powf(-0.25),
        2 => cfg.c_da * nf.ln().powf(0.75) / nf.sqrt(),
        _ => cfg.c_da * (nf.ln() / nf).powf(1.0 / d as f64),
    })
}

#[derive(Debug, Clone)]
pub struct WinfEstimate {
    pub value: f64,
    pub radius: f64,
    pub mesh: f64,
    pub plan: HedgePlan,
}

/// Estimate over the fattened support: unions of `[r_i - l, r_i + l]`
/// intersected with the nonnegative half-line, discretised at the mesh
/// with interval endpoints always included, priced by the exact 1-D
/// envelope.
pub fn winf_estimate(
    samples: &DiscreteMeasure,
    g: &PayoffExpr,
    cfg: &WinfConfig,
    n: usize,
) -> Result<WinfEstimate> {
    cfg.validate()?;
    if samples.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            dim: samples.dim(),
            context: "fattened-support pricing (the radius formula is still available)".into(),
        });
    }
    let radius = radius_schedule(n, 1, cfg)?;
    let xs = samples.scalar_atoms()?;

    if radius == 0.0 {
        let values: Result<Vec<f64>> = xs.iter().map(|x| g.eval(&[*x])).collect();
        let values = values?;
        let (value, slope, weights) = envelope_at_one(&xs, &values)?;
        return Ok(WinfEstimate {
            value,
            radius,
            mesh: 0.0,
            plan: HedgePlan { price: value, strategy: vec![slope], dual_weights: weights, route: PriceRoute::Envelope },
        });
    }

    // merge overlapping fattened intervals
    let mut intervals: Vec<(f64, f64)> = xs
        .iter()
        .map(|x| ((x - radius).max(0.0), x + radius))
        .collect();
    intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
    for (lo, hi) in intervals {
        match merged.last_mut() {
            Some((_, phi)) if lo <= *phi => *phi = phi.max(hi),
            _ => merged.push((lo, hi)),
        }
    }

    let mesh = cfg.mesh.unwrap_or(radius / 20.0);
    let mut points: Vec<f64> = Vec::new();
    for (lo, hi) in &merged {
        let steps = ((hi - lo) / mesh).ceil() as usize;
        for i in 0..=steps {
            points.push((lo + i as f64 * mesh).min(*hi));
        }
        points.push(*hi); // endpoints exact even when mesh overshoots
    }
    points.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    points.dedup();

    let values: Result<Vec<f64>> = points.iter().map(|x| g.eval(&[*x])).collect();
    let values = values?;
    let (value, slope, weights) = envelope_at_one(&points, &values)?;
    Ok(WinfEstimate {
        value,
        radius,
        mesh,
        plan: HedgePlan { price: value, strategy: vec![slope], dual_weights: weights, route: PriceRoute::Envelope },
    })
}
