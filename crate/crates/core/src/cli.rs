//! Command-line front end: estimate / simulate / backtest / rates /
//! robustness / check-na.
//!
//! Flag resolution is total and layered: an explicit flag wins, then a
//! `key=value` line from `--config`, then the built-in default. Every
//! run echoes its resolved configuration in the JSON output, and
//! feeding that echo back as a config file reproduces the run. All
//! numeric output is serialised with 12 significant digits.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 arbitrage detected, 5 solver failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::experiments::{
    convergence_study, robustness_study, rolling_backtest, study_csv, DataSpec, Estimator,
    Perturbation, StudyConfig,
};
use crate::measures::{DiscreteMeasure, Law, ReturnSeries, ScheduleBranch, ScheduleParams};
use crate::multiperiod::{multiperiod_plugin, MultiperiodProblem};
use crate::payoff::parse_payoff;
use crate::penalty::{penalty_estimate, PenaltyConfig};
use crate::pricing::{
    check_na, envelope_price_1d, price_dual, price_primal, verify_superhedge, NaWitness,
    OptionQuote,
};
use crate::simulate::{
    simulate_garch, simulate_iid, GarchSpec, GarchVariant, IidSpec, Innovation, ReturnMap,
};
use crate::wasserstein::{estimate_bounds, BetaRule, KRule, WassersteinConfig};
use crate::winf::{winf_estimate, WinfConfig};

pub const SCHEMA_VERSION: u64 = 1;
pub const THREADS_ENV: &str = "SUPERHEDGE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "superhedge", version, about = "Superhedging price estimation from return samples")]
pub struct CliArgs {
    #[command(subcommand)]
    pub command: Command,
    /// Flat key=value config file merged under explicit flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Directory for study artifacts (CSV + JSON + config echo).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (env SUPERHEDGE_THREADS overrides).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Price a payoff from return data.
    Estimate(EstimateArgs),
    /// Simulate a return series to CSV.
    Simulate(SimulateArgs),
    /// Rolling-window backtest of the plugin and ball estimators.
    Backtest(BacktestArgs),
    /// Monte Carlo convergence-rate study.
    Rates(RatesArgs),
    /// Estimator-law robustness study under perturbed sampling.
    Robustness(RobustnessArgs),
    /// No-arbitrage check of a return sample.
    CheckNa(CheckNaArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct DataArgs {
    /// CSV of gross returns (one observation per row).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Simulate instead: law such as uniform(0,2), exp(1), sympower(29).
    #[arg(long)]
    pub law: Option<String>,
    /// Sample size for --law.
    #[arg(long)]
    pub n: Option<usize>,
    /// RNG seed for --law.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Clone)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// plugin | wasserstein | penalty | winf | multiperiod
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub payoff: Option<String>,
    /// Asset dimension of the payoff.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Quoted hedging option "expr@price"; repeatable.
    #[arg(long = "option")]
    pub options: Vec<String>,
    /// Lipschitz constant when the payoff audit cannot certify one.
    #[arg(long)]
    pub lipschitz: Option<f64>,
    /// Wasserstein order p.
    #[arg(long)]
    pub p: Option<f64>,
    /// exp-sqrt | fixed:BETA
    #[arg(long)]
    pub beta_rule: Option<String>,
    /// Power-rule exponent for the density bound.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// l1 box on the strategy in the upper estimate.
    #[arg(long = "box")]
    pub strategy_box: Option<f64>,
    #[arg(long)]
    pub fixed_radius: Option<f64>,
    /// Penalty weight C_N.
    #[arg(long = "C")]
    pub c_n: Option<f64>,
    /// Penalty grid: "auto" or a CSV path.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Density-bound parameter for the support-fattening estimator.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub mesh: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Periods for the multiperiod method.
    #[arg(long = "T")]
    pub periods: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct SimulateArgs {
    /// lgarch | gjr | egarch | iid
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub alpha2: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// EGARCH leverage coefficient.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// normal | tDF (e.g. t5)
    #[arg(long)]
    pub innov: Option<String>,
    #[arg(long)]
    pub h0: Option<f64>,
    /// Law for --model iid.
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// raw | gross | gross-clipped
    #[arg(long)]
    pub return_map: Option<String>,
}

#[derive(Debug, Args, Clone)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub payoff: Option<String>,
    #[arg(long)]
    pub window: Option<usize>,
    /// AV@R tail mass.
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub smoothing: Option<usize>,
    #[arg(long)]
    pub lipschitz: Option<f64>,
    #[arg(long)]
    pub beta_rule: Option<String>,
    #[arg(long = "box")]
    pub strategy_box: Option<f64>,
}

#[derive(Debug, Args, Clone)]
pub struct RatesArgs {
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long)]
    pub payoff: Option<String>,
    /// Comma-separated N grid, e.g. 10,100,1000.
    #[arg(long)]
    pub n_grid: Option<String>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// plugin | winf | penalty
    #[arg(long)]
    pub estimator: Option<String>,
    /// True price; computed from the law when omitted.
    #[arg(long)]
    pub reference: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "C")]
    pub c_n: Option<f64>,
}

#[derive(Debug, Args, Clone)]
pub struct RobustnessArgs {
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long)]
    pub payoff: Option<String>,
    /// winf-shift:DELTA | contaminate:LAMBDA@X
    #[arg(long)]
    pub perturb: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Clone)]
pub struct CheckNaArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
}

/// key=value lines; `#` starts a comment.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "{} line {}: expected key=value",
                path.display(),
                i + 1
            )));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Flag-over-config-over-default resolution with an echo trail.
struct Resolver {
    config: BTreeMap<String, String>,
    echo: BTreeMap<String, String>,
}

impl Resolver {
    fn new(config: BTreeMap<String, String>) -> Self {
        Self { config, echo: BTreeMap::new() }
    }

    fn get<T: std::str::FromStr + std::fmt::Display + Clone>(
        &mut self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T> {
        let v = match flag {
            Some(v) => v,
            None => match self.config.get(key) {
                Some(raw) => raw
                    .parse::<T>()
                    .map_err(|_| Error::Config(format!("config key `{key}`: cannot parse `{raw}`")))?,
                None => default,
            },
        };
        self.echo.insert(key.into(), format!("{v}"));
        Ok(v)
    }

    fn get_opt<T: std::str::FromStr + std::fmt::Display + Clone>(
        &mut self,
        flag: Option<T>,
        key: &str,
    ) -> Result<Option<T>> {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.config.get(key) {
                Some(raw) => Some(raw.parse::<T>().map_err(|_| {
                    Error::Config(format!("config key `{key}`: cannot parse `{raw}`"))
                })?),
                None => None,
            },
        };
        if let Some(ref v) = v {
            self.echo.insert(key.into(), format!("{v}"));
        }
        Ok(v)
    }

    fn require<T: std::str::FromStr + std::fmt::Display + Clone>(
        &mut self,
        flag: Option<T>,
        key: &str,
    ) -> Result<T> {
        self.get_opt(flag, key)?
            .ok_or_else(|| Error::Config(format!("missing required option --{key}")))
    }

    fn echo_json(&self) -> Value {
        Value::Object(
            self.echo
                .iter()
                .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                .collect(),
        )
    }
}

/// Rounds to 12 significant digits for output.
pub fn sig12(x: f64) -> Value {
    if x.is_finite() {
        let rounded: f64 = format!("{x:.11e}").parse().expect("roundtrip");
        json!(if rounded == 0.0 { 0.0 } else { rounded })
    } else {
        json!(format!("{x}"))
    }
}

fn sig12_vec(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|x| sig12(*x)).collect())
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Parameter(_)
        | Error::Parse { .. }
        | Error::Level(_)
        | Error::Size(_)
        | Error::Stationarity(_)
        | Error::LipschitzAudit(_)
        | Error::Eval { .. } => 2,
        Error::Io(_)
        | Error::Domain(_)
        | Error::EmptySample(_)
        | Error::Shape(_)
        | Error::UnsupportedDimension { .. } => 3,
        Error::ArbitrageDetected { .. } | Error::NaViolation(_) | Error::QuoteArbitrage(_) => 4,
        Error::SolverStall { .. } => 5,
    }
}

fn load_series(r: &mut Resolver, args: &DataArgs) -> Result<ReturnSeries> {
    let data = args.data.clone().or_else(|| {
        r.config.get("data").map(PathBuf::from)
    });
    let law = r.get_opt(args.law.clone(), "law")?;
    match (data, law) {
        (Some(path), None) => {
            r.echo.insert("data".into(), path.display().to_string());
            let s = ReturnSeries::from_csv(&path)?;
            if s.is_empty() {
                return Err(Error::EmptySample(format!("{} has no rows", path.display())));
            }
            Ok(s)
        }
        (None, Some(law)) => {
            let n = r.require(args.n, "n")?;
            let seed = r.get(args.seed, "seed", 0)?;
            let spec = IidSpec { law: Law::parse(&law)?, seed };
            simulate_iid(&spec, n)
        }
        (Some(_), Some(_)) => Err(Error::Config("exactly one data source: --data or --law".into())),
        (None, None) => Err(Error::Config("a data source is required: --data or --law".into())),
    }
}

fn parse_beta_rule(text: &str) -> Result<BetaRule> {
    match text {
        "exp-sqrt" => Ok(BetaRule::ExpSqrtN),
        other => match other.strip_prefix("fixed:") {
            Some(v) => Ok(BetaRule::Fixed(v.parse().map_err(|_| {
                Error::Config(format!("bad beta rule `{other}`"))
            })?)),
            None => Err(Error::Config(format!(
                "beta rule `{other}` (expected exp-sqrt or fixed:BETA)"
            ))),
        },
    }
}

fn parse_options(texts: &[String], dim: usize) -> Result<Vec<OptionQuote>> {
    texts
        .iter()
        .map(|t| {
            let (expr, price) = t.rsplit_once('@').ok_or_else(|| {
                Error::Config(format!("option `{t}` must be written expr@price"))
            })?;
            let price: f64 = price
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("option price `{price}`")))?;
            OptionQuote::new(parse_payoff(expr.trim(), dim, 1)?, price)
        })
        .collect()
}

fn wasserstein_cfg(
    r: &mut Resolver,
    p: Option<f64>,
    beta_rule: Option<String>,
    gamma: Option<f64>,
    strategy_box: Option<f64>,
    fixed_radius: Option<f64>,
) -> Result<WassersteinConfig> {
    let p = r.get(p, "p", 1.0)?;
    let beta_rule = parse_beta_rule(&r.get(beta_rule, "beta-rule", "exp-sqrt".to_string())?)?;
    let gamma = r.get(gamma, "gamma", 0.5)?;
    let strategy_box = r.get(strategy_box, "box", 1.0)?;
    let fixed_radius = r.get(fixed_radius, "fixed-radius", 0.0)?;
    let cfg = WassersteinConfig {
        p,
        schedule: ScheduleParams { p, ..Default::default() },
        branch: ScheduleBranch::Iid,
        beta_rule,
        k_rule: KRule::Power { gamma },
        fixed_radius,
        strategy_box,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn na_json(mu: &DiscreteMeasure) -> Result<Value> {
    let na = check_na(mu)?;
    Ok(match na.witness {
        NaWitness::MartingaleMeasure(q) => json!({
            "arbitrage_free": na.arbitrage_free,
            "martingale_witness": sig12_vec(&q),
        }),
        NaWitness::ArbitrageDirection(h) => json!({
            "arbitrage_free": na.arbitrage_free,
            "arbitrage_direction": sig12_vec(&h),
        }),
    })
}

fn run_estimate(args: &EstimateArgs, r: &mut Resolver) -> Result<Value> {
    let method = r.get(args.method.clone(), "method", "plugin".to_string())?;
    let dim = r.get(args.dim, "dim", 1)?;
    let series = load_series(r, &args.data)?;
    if series.dim() != dim {
        return Err(Error::Shape(format!(
            "data has dimension {}, payoff declared over {dim}",
            series.dim()
        )));
    }
    let n = series.len();
    let mu = DiscreteMeasure::from_samples(&series)?;
    let payoff_text = r.require(args.payoff.clone(), "payoff")?;

    let result = match method.as_str() {
        "plugin" => {
            let g = parse_payoff(&payoff_text, dim, 1)?;
            let options = parse_options(&args.options, dim)?;
            let plan = price_primal(&mu, &g, &options)?;
            let (ok, slack) = verify_superhedge(&plan, &mu, &g, &options, 1e-8)?;
            let envelope = if dim == 1 && options.is_empty() {
                Some(envelope_price_1d(&mu, &g)?.price)
            } else {
                None
            };
            json!({
                "method": "plugin",
                "price": sig12(plan.price),
                "strategy": sig12_vec(&plan.strategy),
                "dual_weights": sig12_vec(&plan.dual_weights),
                "na_check": na_json(&mu)?,
                "diagnostics": {
                    "n": n,
                    "distinct_atoms": mu.len(),
                    "superhedges_sample": ok,
                    "min_slack": sig12(slack),
                    "envelope_price": envelope.map(sig12),
                    "dual_price": sig12(price_dual(&mu, &g, &parse_options(&args.options, dim)?)?.price),
                },
            })
        }
        "wasserstein" => {
            let g = parse_payoff(&payoff_text, dim, 1)?;
            let lipschitz = r.get_opt(args.lipschitz, "lipschitz")?;
            let cfg = wasserstein_cfg(
                r,
                args.p,
                args.beta_rule.clone(),
                args.gamma,
                args.strategy_box,
                args.fixed_radius,
            )?;
            let b = estimate_bounds(&mu, &g, lipschitz, &cfg, n)?;
            json!({
                "method": "wasserstein",
                "lower": sig12(b.lower),
                "upper": sig12(b.upper),
                "epsilon": sig12(b.epsilon),
                "k": sig12(b.k),
                "H": sig12_vec(&b.strategy),
                "diagnostics": { "n": n, "distinct_atoms": mu.len() },
            })
        }
        "penalty" => {
            let g = parse_payoff(&payoff_text, dim, 1)?;
            let c_n = r.require(args.c_n, "C")?;
            let grid_spec = r.get(args.grid.clone(), "grid", "auto".to_string())?;
            let tmax = r.get_opt(args.tmax, "tmax")?;
            let mut cfg = match grid_spec.as_str() {
                "auto" => PenaltyConfig::auto(&mu, c_n)?,
                path => {
                    let grid_series = ReturnSeries::from_csv(Path::new(path))?;
                    let mut cfg = PenaltyConfig::auto(&mu, c_n)?;
                    cfg.grid = grid_series.observations;
                    for atom in mu.atoms() {
                        if !cfg.grid.iter().any(|p| p == atom) {
                            cfg.grid.push(atom.clone());
                        }
                    }
                    cfg
                }
            };
            if let Some(t) = tmax {
                cfg.t_max = t;
            }
            let est = penalty_estimate(&mu, &g, &cfg)?;
            json!({
                "method": "penalty",
                "price": sig12(est.value),
                "best_t": sig12(est.best_t),
                "t_profile_len": est.t_profile.len(),
                "diagnostics": { "n": n, "grid_size": cfg.grid.len() },
            })
        }
        "winf" => {
            let g = parse_payoff(&payoff_text, dim, 1)?;
            let alpha = r.get(args.alpha, "alpha", 1.0)?;
            let mesh = r.get_opt(args.mesh, "mesh")?;
            let radius_override = r.get_opt(args.radius, "radius")?;
            let cfg = WinfConfig { alpha, c_da: 1.0, mesh, radius_override };
            let est = winf_estimate(&mu, &g, &cfg, n)?;
            json!({
                "method": "winf",
                "price": sig12(est.value),
                "radius": sig12(est.radius),
                "mesh": sig12(est.mesh),
                "strategy": sig12_vec(&est.plan.strategy),
                "diagnostics": { "n": n },
            })
        }
        "multiperiod" => {
            let periods = r.get(args.periods, "T", 2)?;
            let g = parse_payoff(&payoff_text, 1, periods)?;
            let problem = MultiperiodProblem::new(periods, mu.clone(), g)?;
            let price = multiperiod_plugin(&problem)?;
            json!({
                "method": "multiperiod",
                "price": sig12(price),
                "periods": periods,
                "diagnostics": { "n": n, "distinct_atoms": mu.len() },
            })
        }
        other => return Err(Error::Config(format!("unknown method `{other}`"))),
    };
    Ok(result)
}

fn run_simulate(args: &SimulateArgs, r: &mut Resolver, out: Option<&Path>) -> Result<Value> {
    let model = r.get(args.model.clone(), "model", "lgarch".to_string())?;
    let n = r.require(args.n, "n")?;
    let seed = r.get(args.seed, "seed", 0)?;
    let (series, clipped) = match model.as_str() {
        "iid" => {
            let law = r.require(args.law.clone(), "law")?;
            (simulate_iid(&IidSpec { law: Law::parse(&law)?, seed }, n)?, 0)
        }
        garch => {
            let omega = r.get(args.omega, "omega", 0.02)?;
            let alpha = r.get(args.alpha, "alpha", 0.8)?;
            let beta = r.get(args.beta, "beta", 0.1)?;
            let innov = r.get(args.innov.clone(), "innov", "t5".to_string())?;
            let innovation = match innov.as_str() {
                "normal" => Innovation::Normal,
                t => Innovation::StudentT {
                    df: t
                        .strip_prefix('t')
                        .and_then(|d| d.parse().ok())
                        .ok_or_else(|| Error::Config(format!("innovation `{t}`")))?,
                },
            };
            let variant = match garch {
                "lgarch" => GarchVariant::LGarch { omega, alpha, beta },
                "gjr" => GarchVariant::Gjr {
                    omega,
                    alpha1: alpha,
                    alpha2: r.get(args.alpha2, "alpha2", 0.0)?,
                    beta,
                },
                "egarch" => GarchVariant::EGarch {
                    omega,
                    alpha,
                    gamma: r.get(args.gamma, "gamma", 0.0)?,
                    beta,
                },
                other => return Err(Error::Config(format!("unknown model `{other}`"))),
            };
            let h0_default = match &variant {
                GarchVariant::LGarch { omega, alpha, beta } => omega / (1.0 - alpha - beta),
                _ => omega,
            };
            let h0 = r.get(args.h0, "h0", h0_default)?;
            let map = match r
                .get(args.return_map.clone(), "return-map", "gross-clipped".to_string())?
                .as_str()
            {
                "raw" => ReturnMap::Raw,
                "gross" => ReturnMap::Gross,
                "gross-clipped" => ReturnMap::GrossClipped,
                other => return Err(Error::Config(format!("return map `{other}`"))),
            };
            let spec = GarchSpec::new(variant, innovation, h0, seed, map)?;
            let sim = simulate_garch(&spec, n)?;
            (sim.series, sim.clipped)
        }
    };
    if let Some(path) = out {
        series.to_csv(path)?;
    }
    Ok(json!({
        "model": model,
        "n": n,
        "seed": seed,
        "clipped": clipped,
        "clip_fraction": sig12(clipped as f64 / n as f64),
        "written": out.map(|p| p.display().to_string()),
    }))
}

fn run_backtest(args: &BacktestArgs, r: &mut Resolver, out_dir: Option<&Path>) -> Result<Value> {
    let series = load_series(r, &args.data)?;
    let payoff_text = r.require(args.payoff.clone(), "payoff")?;
    let g = parse_payoff(&payoff_text, 1, 1)?;
    let window = r.get(args.window, "window", 50)?;
    let level = r.get(args.level, "level", 0.05)?;
    let smoothing = r.get(args.smoothing, "smoothing", 10)?;
    let lipschitz = r.get_opt(args.lipschitz, "lipschitz")?;
    let cfg = wasserstein_cfg(r, None, args.beta_rule.clone(), None, args.strategy_box, None)?;
    let rep = rolling_backtest(&series, window, &cfg, lipschitz, &g, level, smoothing)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let mut csv = String::from("t,plugin,wasserstein\n");
        for ((t, p), w) in rep.t.iter().zip(&rep.plugin).zip(&rep.wasserstein) {
            csv.push_str(&format!("{t},{p},{w}\n"));
        }
        std::fs::write(dir.join("backtest.csv"), csv)?;
    }
    Ok(json!({
        "window": window,
        "level": sig12(level),
        "smoothing": smoothing,
        "t": rep.t,
        "plugin": sig12_vec(&rep.plugin),
        "wasserstein": sig12_vec(&rep.wasserstein),
        "plugin_smoothed": sig12_vec(&rep.plugin_smoothed),
        "wasserstein_smoothed": sig12_vec(&rep.wasserstein_smoothed),
    }))
}

fn run_rates(args: &RatesArgs, r: &mut Resolver, out_dir: Option<&Path>) -> Result<Value> {
    let law = Law::parse(&r.require(args.law.clone(), "law")?)?;
    let payoff_text = r.require(args.payoff.clone(), "payoff")?;
    let g = parse_payoff(&payoff_text, 1, 1)?;
    let grid_text = r.get(args.n_grid.clone(), "n-grid", "100,316,1000,3162,10000".to_string())?;
    let n_grid: Result<Vec<usize>> = grid_text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad n-grid entry `{s}`")))
        })
        .collect();
    let n_grid = n_grid?;
    let runs = r.get(args.runs, "runs", 200)?;
    let seed = r.get(args.seed, "seed", 0)?;
    let estimator_name = r.get(args.estimator.clone(), "estimator", "plugin".to_string())?;
    let estimator = match estimator_name.as_str() {
        "plugin" => Estimator::Plugin,
        "winf" => Estimator::Winf(WinfConfig {
            alpha: r.get(args.alpha, "alpha", 1.0)?,
            ..Default::default()
        }),
        "penalty" => Estimator::Penalty { c_n: r.require(args.c_n, "C")? },
        other => return Err(Error::Config(format!("unknown estimator `{other}`"))),
    };
    let reference = r.get_opt(args.reference, "reference")?;
    let cfg = StudyConfig {
        data: DataSpec::Iid(IidSpec { law, seed }),
        estimator,
        n_grid,
        runs,
        reference,
    };
    let law_for_bound = match &cfg.data {
        DataSpec::Iid(spec) => spec.law.clone(),
        DataSpec::Garch(_) => unreachable!("rates builds iid data"),
    };
    let rep = convergence_study(&cfg, &g)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("study.csv"), study_csv(&rep, "rates"))?;
        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&rep).expect("serializable report"),
        )?;
    }
    // theoretical plugin-gap bound per N, when the payoff audits
    let theoretical: Option<Vec<f64>> = g.lipschitz_bound().and_then(|l| {
        rep.n_grid
            .iter()
            .map(|n| {
                crate::experiments::rate_bound(
                    &law_for_bound,
                    *n,
                    &crate::experiments::Modulus::Lipschitz(l),
                    0.1,
                )
                .ok()
            })
            .collect()
    });
    Ok(json!({
        "estimator": rep.estimator,
        "n_grid": rep.n_grid,
        "means": sig12_vec(&rep.means),
        "stds": sig12_vec(&rep.stds),
        "skipped": rep.skipped,
        "reference": sig12(rep.reference),
        "reference_is_proxy": rep.reference_is_proxy,
        "slope": rep.slope.map(sig12),
        "slope_stderr": rep.slope_stderr.map(sig12),
        "theoretical_bound": theoretical.map(|b| sig12_vec(&b)),
        "runs": rep.runs,
    }))
}

fn run_robustness(args: &RobustnessArgs, r: &mut Resolver) -> Result<Value> {
    let law = Law::parse(&r.require(args.law.clone(), "law")?)?;
    let g = parse_payoff(&r.require(args.payoff.clone(), "payoff")?, 1, 1)?;
    let perturb_text = r.require(args.perturb.clone(), "perturb")?;
    let perturbation = if let Some(d) = perturb_text.strip_prefix("winf-shift:") {
        Perturbation::WinfShift(
            d.parse().map_err(|_| Error::Config(format!("bad shift `{d}`")))?,
        )
    } else if let Some(rest) = perturb_text.strip_prefix("contaminate:") {
        let (lam, x) = rest
            .split_once('@')
            .ok_or_else(|| Error::Config("contaminate:LAMBDA@X".into()))?;
        Perturbation::Contaminate {
            lambda: lam.parse().map_err(|_| Error::Config(format!("bad lambda `{lam}`")))?,
            x: x.parse().map_err(|_| Error::Config(format!("bad point `{x}`")))?,
        }
    } else {
        return Err(Error::Config(format!(
            "perturbation `{perturb_text}` (expected winf-shift:D or contaminate:L@X)"
        )));
    };
    let n = r.get(args.n, "n", 200)?;
    let runs = r.get(args.runs, "runs", 100)?;
    let seed = r.get(args.seed, "seed", 0)?;
    let rep = robustness_study(
        &IidSpec { law, seed },
        perturbation,
        &Estimator::Plugin,
        &g,
        n,
        runs,
    )?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(json!({
        "estimate_distance": sig12(rep.estimate_distance),
        "base_mean": sig12(mean(&rep.base_estimates)),
        "perturbed_mean": sig12(mean(&rep.perturbed_estimates)),
        "skipped": rep.skipped,
        "runs": rep.base_estimates.len(),
    }))
}

fn run_check_na(args: &CheckNaArgs, r: &mut Resolver) -> Result<Value> {
    let data = args
        .data
        .clone()
        .or_else(|| r.config.get("data").map(PathBuf::from))
        .ok_or_else(|| Error::Config("check-na requires --data".into()))?;
    r.echo.insert("data".into(), data.display().to_string());
    let series = ReturnSeries::from_csv(&data)?;
    let mu = DiscreteMeasure::from_samples(&series)?;
    let na = check_na(&mu)?;
    let value = na_json(&mu)?;
    if !na.arbitrage_free {
        let h = match na.witness {
            NaWitness::ArbitrageDirection(h) => h,
            _ => Vec::new(),
        };
        return Err(Error::ArbitrageDetected {
            strategy: h,
            context: format!("sample {} admits arbitrage; report: {value}", data.display()),
        });
    }
    Ok(value)
}

/// Runs a parsed command line; returns the JSON document that was (or
/// would be) printed.
pub fn run(args: &CliArgs) -> Result<Value> {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(args.threads);
    if let Some(t) = threads {
        // a global pool can only be installed once per process; later
        // calls keep the first configuration
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let config = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => BTreeMap::new(),
    };
    let mut r = Resolver::new(config);
    let mut value = match &args.command {
        Command::Estimate(a) => run_estimate(a, &mut r)?,
        Command::Simulate(a) => run_simulate(a, &mut r, args.out.as_deref())?,
        Command::Backtest(a) => run_backtest(a, &mut r, args.out_dir.as_deref())?,
        Command::Rates(a) => run_rates(a, &mut r, args.out_dir.as_deref())?,
        Command::Robustness(a) => run_robustness(a, &mut r)?,
        Command::CheckNa(a) => run_check_na(a, &mut r)?,
    };
    if let Value::Object(ref mut map) = value {
        map.insert("schema".into(), json!(SCHEMA_VERSION));
        map.insert("resolved_config".into(), r.echo_json());
    }
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)?;
        let mut echo = String::new();
        for (k, v) in &r.echo {
            echo.push_str(&format!("{k}={v}\n"));
        }
        std::fs::write(dir.join("config.txt"), echo)?;
    }
    Ok(value)
}

/// Binary entry point: parse, run, emit, map errors to exit codes.
pub fn main_impl() -> i32 {
    let args = CliArgs::parse();
    match run(&args) {
        Ok(value) => {
            let text = serde_json::to_string_pretty(&value).expect("serializable output");
            match &args.out {
                // simulate already uses --out for the CSV; JSON goes to
                // stdout either way there
                Some(path) if !matches!(args.command, Command::Simulate(_)) => {
                    if let Err(e) = std::fs::write(path, &text) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return 3;
                    }
                    println!("{text}");
                }
                _ => println!("{text}"),
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::ArbitrageDetected { strategy, .. } = &e {
                eprintln!("arbitrage direction: {strategy:?}");
            }
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig12_rounds() {
        assert_eq!(sig12(0.5), json!(0.5));
        let v = sig12(1.0 / 3.0);
        assert_eq!(v, json!(0.333333333333));
        assert_eq!(sig12(f64::INFINITY), json!("inf"));
    }

    #[test]
    fn config_precedence() {
        let mut r = Resolver::new(BTreeMap::from([
            ("p".to_string(), "2.5".to_string()),
            ("gamma".to_string(), "0.7".to_string()),
        ]));
        // flag wins over config
        assert_eq!(r.get(Some(3.0), "p", 1.0).unwrap(), 3.0);
        // config wins over default
        assert_eq!(r.get(None::<f64>, "gamma", 0.5).unwrap(), 0.7);
        // default when neither
        assert_eq!(r.get(None::<f64>, "box", 1.0).unwrap(), 1.0);
        assert_eq!(r.echo.get("p").unwrap(), "3");
    }

    #[test]
    fn beta_rule_parse() {
        assert_eq!(parse_beta_rule("exp-sqrt").unwrap(), BetaRule::ExpSqrtN);
        assert_eq!(parse_beta_rule("fixed:0.25").unwrap(), BetaRule::Fixed(0.25));
        assert!(parse_beta_rule("nope").is_err());
    }

    #[test]
    fn option_spec_parse() {
        let q = parse_options(&["pos(1-r)@0.5".to_string()], 1).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q[0].price, 0.5);
        assert!(parse_options(&["pos(1-r)".to_string()], 1).is_err());
    }

    #[test]
    fn exit_codes_by_class() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Io("x".into())), 3);
        assert_eq!(
            exit_code(&Error::ArbitrageDetected { strategy: vec![], context: "x".into() }),
            4
        );
        assert_eq!(
            exit_code(&Error::SolverStall { iterations: 1, context: "x".into() }),
            5
        );
    }
}
