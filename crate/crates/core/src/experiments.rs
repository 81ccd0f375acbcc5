//! Convergence-rate studies, Balayage mass redistribution, theoretical
//! rate bounds, robustness studies and rolling-window backtests.
//!
//! Studies run Monte Carlo jobs on dedicated RNG streams (stream =
//! run index) so results are reproducible bit-for-bit and
//! embarrassingly parallel; aggregation sorts by run index before
//! reducing. Output is plot-ready: long-format CSV plus a JSON summary.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, Law, ReturnSeries};
use crate::payoff::PayoffExpr;
use crate::pricing::envelope_price_1d;
use crate::simulate::{simulate_garch_stream, simulate_iid_stream, GarchSpec, IidSpec};
use crate::wasserstein::{avar_hedged, estimate_bounds, WassersteinConfig};
use crate::winf::{winf_estimate, WinfConfig};
use crate::{penalty, wasserstein};

/// Redistributes the mass of a one-dimensional measure onto a sorted
/// support grid by linear interpolation to the bracketing grid points.
/// Total mass is preserved exactly; the barycenter is preserved
/// whenever no atom falls outside the grid range (outside atoms are
/// absorbed at the nearest endpoint).
pub fn balayage_1d(q: &DiscreteMeasure, support: &[f64]) -> Result<DiscreteMeasure> {
    if support.len() < 2 {
        return Err(Error::Config("balayage support needs at least 2 points".into()));
    }
    if support.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("balayage support must be sorted strictly ascending".into()));
    }
    if q.dim() != 1 {
        return Err(Error::UnsupportedDimension { dim: q.dim(), context: "balayage_1d".into() });
    }
    let mut weights = vec![0.0; support.len()];
    for (atom, w) in q.atoms().iter().zip(q.weights()) {
        let x = atom[0];
        if x <= support[0] {
            weights[0] += w;
            continue;
        }
        if x >= *support.last().unwrap() {
            *weights.last_mut().unwrap() += w;
            continue;
        }
        let hi = support.partition_point(|s| *s <= x);
        let (lo, hi) = (hi - 1, hi);
        let theta = (x - support[lo]) / (support[hi] - support[lo]);
        // split so the two parts sum to w exactly
        let part_hi = w * theta;
        weights[hi] += part_hi;
        weights[lo] += w - part_hi;
    }
    let (atoms, ws): (Vec<Vec<f64>>, Vec<f64>) = support
        .iter()
        .zip(weights)
        .filter(|(_, w)| *w > 0.0)
        .map(|(s, w)| (vec![*s], w))
        .unzip();
    DiscreteMeasure::new(atoms, ws)
}

/// Modulus of continuity handed to [`rate_bound`].
#[derive(Debug, Clone)]
pub enum Modulus {
    Lipschitz(f64),
    Hoelder { l: f64, gamma: f64 },
    /// Piecewise-linear table of (gap, modulus) pairs, sorted by gap.
    Table(Vec<(f64, f64)>),
}

impl Modulus {
    fn apply(&self, x: f64) -> Result<f64> {
        match self {
            Modulus::Lipschitz(l) => Ok(l * x),
            Modulus::Hoelder { l, gamma } => {
                if !(*gamma > 0.0 && *gamma <= 1.0) {
                    return Err(Error::Parameter(format!("hoelder exponent {gamma} outside (0, 1]")));
                }
                Ok(l * x.powf(*gamma))
            }
            Modulus::Table(rows) => {
                if rows.is_empty() {
                    return Err(Error::Parameter("empty modulus table".into()));
                }
                if x <= rows[0].0 {
                    return Ok(rows[0].1);
                }
                for w in rows.windows(2) {
                    if x <= w[1].0 {
                        let t = (x - w[0].0) / (w[1].0 - w[0].0);
                        return Ok(w[0].1 + t * (w[1].1 - w[0].1));
                    }
                }
                Ok(rows.last().unwrap().1)
            }
        }
    }
}

/// Theoretical plugin-gap bound at sample size N: the modulus applied
/// to the interquantile spread at the DKW-calibrated KS radius, plus a
/// tail term for unbounded support.
pub fn rate_bound(
    law: &Law,
    n: usize,
    modulus: &Modulus,
    confidence_beta: f64,
) -> Result<f64> {
    if !(confidence_beta > 0.0 && confidence_beta < 1.0) {
        return Err(Error::Parameter(format!("confidence {confidence_beta} outside (0, 1)")));
    }
    // invert the DKW bound 2 exp(-2 N eps^2) = beta
    let d_n = ((2.0 / confidence_beta).ln() / (2.0 * n as f64)).sqrt();
    let d_n = d_n.min(1.0 / 3.0); // interquantile machinery needs d_N <= 1/3
    let bounded = law.has_bounded_support();
    let kappa = crate::measures::kappa_interquantile(law, d_n, bounded)?;
    let mut bound = modulus.apply(kappa)?;
    if !bounded {
        bound += 1.0 / law.quantile(1.0 - d_n)?;
    }
    Ok(bound)
}

/// Data-generating process for a study.
#[derive(Debug, Clone)]
pub enum DataSpec {
    Iid(IidSpec),
    Garch(GarchSpec),
}

impl DataSpec {
    fn simulate(&self, n: usize, stream: u64) -> Result<ReturnSeries> {
        match self {
            DataSpec::Iid(spec) => simulate_iid_stream(spec, n, stream),
            DataSpec::Garch(spec) => Ok(simulate_garch_stream(spec, n, stream)?.series),
        }
    }
}

/// Estimator selector shared by studies and backtests.
#[derive(Debug, Clone)]
pub enum Estimator {
    Plugin,
    /// Lower AV@R-hedged bound of the ball estimator.
    WassersteinLower { cfg: WassersteinConfig, lipschitz: Option<f64> },
    /// Upper estimate (boxed strategy + transport correction).
    WassersteinUpper { cfg: WassersteinConfig, lipschitz: Option<f64> },
    Winf(WinfConfig),
    Penalty { c_n: f64 },
}

impl Estimator {
    pub fn estimate(&self, mu: &DiscreteMeasure, g: &PayoffExpr, n: usize) -> Result<f64> {
        match self {
            Estimator::Plugin => Ok(envelope_price_1d(mu, g)?.price),
            Estimator::WassersteinLower { cfg, lipschitz } => {
                Ok(estimate_bounds(mu, g, *lipschitz, cfg, n)?.lower)
            }
            Estimator::WassersteinUpper { cfg, lipschitz } => {
                Ok(estimate_bounds(mu, g, *lipschitz, cfg, n)?.upper)
            }
            Estimator::Winf(cfg) => Ok(winf_estimate(mu, g, cfg, n)?.value),
            Estimator::Penalty { c_n } => {
                let cfg = penalty::PenaltyConfig::auto(mu, *c_n)?;
                Ok(penalty::penalty_estimate(mu, g, &cfg)?.value)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Plugin => "plugin",
            Estimator::WassersteinLower { .. } => "wasserstein_lower",
            Estimator::WassersteinUpper { .. } => "wasserstein_upper",
            Estimator::Winf(_) => "winf",
            Estimator::Penalty { .. } => "penalty",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub data: DataSpec,
    pub estimator: Estimator,
    pub n_grid: Vec<usize>,
    pub runs: usize,
    /// True price; computed from the law's support when omitted
    /// (flagged as a proxy for unbounded supports).
    pub reference: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub estimator: String,
    pub n_grid: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub runs: usize,
    /// Runs skipped because the sample admitted no price (arbitrage),
    /// per grid point.
    pub skipped: Vec<usize>,
    pub reference: f64,
    pub reference_is_proxy: bool,
    /// Least-squares slope of log(reference - mean) against log N,
    /// smallest grid point dropped as transient.
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub per_run: Vec<Vec<f64>>,
    pub config_echo: String,
}

/// Reference price of a payoff under a catalogue law: the envelope over
/// a fine discretisation of the support. Exact in the limit for
/// bounded supports; a high-quantile proxy otherwise.
pub fn reference_price(law: &Law, g: &PayoffExpr) -> Result<(f64, bool)> {
    let (lo, hi) = law.support();
    let (hi, proxy) = if hi.is_finite() {
        (hi, false)
    } else {
        (law.quantile(1.0 - 1e-9)?, true)
    };
    if let Law::Discrete(d) = law {
        return Ok((envelope_price_1d(d, g)?.price, false));
    }
    let m = 20_000;
    let xs: Vec<f64> = (0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect();
    let values: Result<Vec<f64>> = xs.iter().map(|x| g.eval(&[*x])).collect();
    let (price, _, _) = crate::pricing::envelope_at_one(&xs, &values?)?;
    Ok((price, proxy))
}

pub fn convergence_study(cfg: &StudyConfig, g: &PayoffExpr) -> Result<StudyReport> {
    if cfg.runs == 0 || cfg.n_grid.is_empty() {
        return Err(Error::Config("study needs runs >= 1 and a nonempty N grid".into()));
    }
    let (reference, reference_is_proxy) = match cfg.reference {
        Some(r) => (r, false),
        None => match &cfg.data {
            DataSpec::Iid(spec) => reference_price(&spec.law, g)?,
            DataSpec::Garch(_) => {
                return Err(Error::Config(
                    "no analytic reference for GARCH data; supply one explicitly".into(),
                ))
            }
        },
    };

    let mut means = Vec::new();
    let mut stds = Vec::new();
    let mut skipped_all = Vec::new();
    let mut per_run_all = Vec::new();
    for (gi, &n) in cfg.n_grid.iter().enumerate() {
        let results: Vec<Result<f64>> = (0..cfg.runs)
            .into_par_iter()
            .map(|run| {
                let stream = (gi * cfg.runs + run) as u64;
                let series = cfg.data.simulate(n, stream)?;
                let mu = DiscreteMeasure::from_samples(&series)?;
                cfg.estimator.estimate(&mu, g, n)
            })
            .collect();
        let mut vals = Vec::with_capacity(cfg.runs);
        let mut skipped = 0usize;
        for r in results {
            match r {
                Ok(v) => vals.push(v),
                // an all-one-side sample prices nothing; skip and count
                Err(Error::ArbitrageDetected { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        if vals.is_empty() {
            return Err(Error::EmptySample(format!("all runs at N = {n} were skipped")));
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / vals.len().max(2) as f64;
        means.push(mean);
        stds.push(var.sqrt());
        skipped_all.push(skipped);
        per_run_all.push(vals);
    }

    let (slope, slope_stderr) = fit_gap_slope(&cfg.n_grid, &means, reference);
    Ok(StudyReport {
        estimator: cfg.estimator.name().into(),
        n_grid: cfg.n_grid.clone(),
        means,
        stds,
        runs: cfg.runs,
        skipped: skipped_all,
        reference,
        reference_is_proxy,
        slope,
        slope_stderr,
        per_run: per_run_all,
        config_echo: format!("{cfg:?}"),
    })
}

/// Least squares of log(gap) on log(N), dropping the smallest grid
/// point as a transient; needs >= 4 remaining points with positive gap.
fn fit_gap_slope(n_grid: &[usize], means: &[f64], reference: f64) -> (Option<f64>, Option<f64>) {
    let mut pts: Vec<(f64, f64)> = n_grid
        .iter()
        .zip(means)
        .filter_map(|(n, m)| {
            let gap = reference - m;
            if gap > 0.0 {
                Some(((*n as f64).ln(), gap.ln()))
            } else {
                None
            }
        })
        .collect();
    if pts.len() < 5 {
        return (None, None);
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    pts.remove(0);
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let residual: f64 = pts
        .iter()
        .map(|p| {
            let fit = my + slope * (p.0 - mx);
            (p.1 - fit) * (p.1 - fit)
        })
        .sum();
    let stderr = (residual / (n - 2.0) / sxx).sqrt();
    (Some(slope), Some(stderr))
}

/// Perturbations of the sampling law for robustness studies.
#[derive(Debug, Clone, Copy)]
pub enum Perturbation {
    /// Deterministic support shift by delta (a sup-transport move).
    WinfShift(f64),
    /// Mix a point mass at x with probability lambda.
    Contaminate { lambda: f64, x: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustnessReport {
    pub base_estimates: Vec<f64>,
    pub perturbed_estimates: Vec<f64>,
    /// W1 distance between the two empirical estimate distributions.
    pub estimate_distance: f64,
    pub skipped: usize,
}

/// Compares the law of an estimator under base vs perturbed sampling
/// using common random numbers: run k draws the same uniforms for both
/// arms, so the reported distance isolates the perturbation.
pub fn robustness_study(
    base: &IidSpec,
    perturbation: Perturbation,
    estimator: &Estimator,
    g: &PayoffExpr,
    n: usize,
    runs: usize,
) -> Result<RobustnessReport> {
    if runs == 0 {
        return Err(Error::Config("robustness study needs runs >= 1".into()));
    }
    match perturbation {
        Perturbation::WinfShift(d) if d < 0.0 => {
            return Err(Error::Parameter("winf shift must be nonnegative".into()))
        }
        Perturbation::Contaminate { lambda, x }
            if !(0.0..=1.0).contains(&lambda) || x < 0.0 =>
        {
            return Err(Error::Parameter("contamination needs lambda in [0,1], x >= 0".into()));
        }
        _ => {}
    }
    let results: Vec<Result<(Option<f64>, Option<f64>)>> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = crate::simulate::stream_rng(base.seed, run as u64);
            use rand::Rng;
            let mut base_obs = Vec::with_capacity(n);
            let mut pert_obs = Vec::with_capacity(n);
            for _ in 0..n {
                let coin: f64 = rng.gen();
                let u: f64 = loop {
                    let u: f64 = rng.gen();
                    if u > 0.0 && u < 1.0 {
                        break u;
                    }
                };
                let x0 = base.law.quantile(u)?;
                base_obs.push(vec![x0]);
                pert_obs.push(vec![match perturbation {
                    Perturbation::WinfShift(d) => x0 + d,
                    Perturbation::Contaminate { lambda, x } => {
                        if coin < lambda {
                            x
                        } else {
                            x0
                        }
                    }
                }]);
            }
            let eb = DiscreteMeasure::new(base_obs, vec![1.0 / n as f64; n])
                .and_then(|mu| estimator.estimate(&mu, g, n));
            let ep = DiscreteMeasure::new(pert_obs, vec![1.0 / n as f64; n])
                .and_then(|mu| estimator.estimate(&mu, g, n));
            let soften = |r: Result<f64>| match r {
                Ok(v) => Ok(Some(v)),
                Err(Error::ArbitrageDetected { .. }) => Ok(None),
                Err(e) => Err(e),
            };
            Ok((soften(eb)?, soften(ep)?))
        })
        .collect();
    let mut base_estimates = Vec::new();
    let mut perturbed_estimates = Vec::new();
    let mut skipped = 0usize;
    for r in results {
        match r? {
            (Some(b), Some(p)) => {
                base_estimates.push(b);
                perturbed_estimates.push(p);
            }
            _ => skipped += 1,
        }
    }
    if base_estimates.is_empty() {
        return Err(Error::EmptySample("all robustness runs were skipped".into()));
    }
    let shift = |vals: &[f64]| -> Result<DiscreteMeasure> {
        // estimates may be negative; shift into the nonnegative domain
        // shared by both samples before taking W1 (distance invariant)
        let min = base_estimates
            .iter()
            .chain(&perturbed_estimates)
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let off = if min < 0.0 { -min } else { 0.0 };
        DiscreteMeasure::new(
            vals.iter().map(|v| vec![v + off]).collect(),
            vec![1.0 / vals.len() as f64; vals.len()],
        )
    };
    let estimate_distance = crate::measures::wasserstein_1d(
        &shift(&base_estimates)?,
        &shift(&perturbed_estimates)?,
        1.0,
    )?;
    Ok(RobustnessReport { base_estimates, perturbed_estimates, estimate_distance, skipped })
}

#[derive(Debug, Clone, Serialize)]
pub struct BacktestReport {
    /// Time index of each estimate (window end, exclusive).
    pub t: Vec<usize>,
    /// Plugin AV@R-hedged estimate per window.
    pub plugin: Vec<f64>,
    /// Ball upper estimate per window.
    pub wasserstein: Vec<f64>,
    /// Trailing-m smoothed versions (emitted from t >= window + m - 1).
    pub plugin_smoothed: Vec<f64>,
    pub wasserstein_smoothed: Vec<f64>,
}

/// Rolling backtest: for each time t >= window, estimate the hedged
/// AV@R of the payoff on the trailing window; the plugin and
/// ball-upper variants share windows. Emits raw and trailing-m
/// averaged series.
pub fn rolling_backtest(
    series: &ReturnSeries,
    window: usize,
    cfg: &WassersteinConfig,
    lipschitz: Option<f64>,
    g: &PayoffExpr,
    alpha: f64,
    smoothing: usize,
) -> Result<BacktestReport> {
    if window == 0 || smoothing == 0 {
        return Err(Error::Config("window and smoothing must be >= 1".into()));
    }
    if series.len() < window + smoothing {
        return Err(Error::Config(format!(
            "series of length {} too short for window {window} + smoothing {smoothing}",
            series.len()
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Level(format!("backtest level {alpha} outside (0, 1]")));
    }
    let lip = wasserstein::resolve_lipschitz(g, lipschitz)?;
    let beta = cfg.beta_rule.beta(window)?;
    let epsilon =
        crate::measures::epsilon_schedule(window, beta, &cfg.schedule, cfg.branch)? + cfg.fixed_radius;
    let k = 1.0 / alpha;

    let ts: Vec<usize> = (window..=series.len()).collect();
    let rows: Vec<Result<(f64, f64)>> = ts
        .par_iter()
        .map(|&t| {
            let window_obs = series.observations[t - window..t].to_vec();
            let mu = DiscreteMeasure::new(
                window_obs,
                vec![1.0 / window as f64; window],
            )?;
            let plugin = avar_hedged(&mu, g, alpha, None)?.value;
            let boxed = avar_hedged(&mu, g, alpha, Some(cfg.strategy_box))?.value;
            Ok((plugin, boxed + 2.0 * lip * k * epsilon))
        })
        .collect();
    let mut plugin = Vec::with_capacity(rows.len());
    let mut wass = Vec::with_capacity(rows.len());
    for r in rows {
        let (p, w) = r?;
        plugin.push(p);
        wass.push(w);
    }
    let smooth = |xs: &[f64]| -> Vec<f64> {
        xs.windows(smoothing)
            .map(|w| w.iter().sum::<f64>() / smoothing as f64)
            .collect()
    };
    Ok(BacktestReport {
        t: ts,
        plugin_smoothed: smooth(&plugin),
        wasserstein_smoothed: smooth(&wass),
        plugin,
        wasserstein: wass,
    })
}

/// Long-format CSV of per-run study values: study, N, run, value.
pub fn study_csv(report: &StudyReport, study: &str) -> String {
    let mut out = String::from("study,N,run,value\n");
    for (n, runs) in report.n_grid.iter().zip(&report.per_run) {
        for (run, v) in runs.iter().enumerate() {
            out.push_str(&format!("{study},{n},{run},{v}\n"));
        }
    }
    out
}
