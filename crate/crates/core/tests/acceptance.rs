//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `cargo test --test acceptance -- --nocapture`
//! to see them all).
//!
//! Criteria 3 and 11 contain subchecks that are statistically
//! unattainable for a correct implementation (see the analysis printed
//! by the tests); they are asserted exactly as specified and the
//! expected failures are reported honestly rather than loosened away.

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use superhedge::error::Error;
use superhedge::experiments::{
    balayage_1d, convergence_study, rolling_backtest, DataSpec, Estimator, StudyConfig,
};
use superhedge::measures::{
    avar_discrete, dkw_bound, ks_distance, wasserstein_1d, DiscreteMeasure, Law, ReturnSeries,
};
use superhedge::payoff::parse_payoff;
use superhedge::penalty::{penalty_estimate, PenaltyConfig};
use superhedge::pricing::{check_na, envelope_price_1d, price_dual, price_primal};
use superhedge::simplex::{solve_lp, LinearProgram, LpStatus, Sense};
use superhedge::simulate::{
    simulate_garch, simulate_garch_regime, simulate_iid_stream, GarchSpec, GarchVariant, IidSpec,
    Innovation, ReturnMap,
};
use superhedge::wasserstein::{
    avar_hedged, estimate_bounds, unbounded_gain_example, BetaRule, WassersteinConfig,
};
use superhedge::winf::{winf_estimate, WinfConfig};

fn uniform_on(vals: &[f64]) -> DiscreteMeasure {
    DiscreteMeasure::from_samples(&ReturnSeries::from_scalars(vals, "acceptance").unwrap())
        .unwrap()
}

/// Random 1-d sample straddling 1, n distinct values almost surely.
fn random_straddling(rng: &mut ChaCha8Rng, n: usize) -> DiscreteMeasure {
    let mut vals: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.2)).collect();
    vals.push(rng.gen_range(0.0..0.9));
    vals.push(rng.gen_range(1.1..2.2));
    uniform_on(&vals)
}

fn budget(name: &str, start: Instant, limit_s: f64) {
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed < limit_s,
        "{name} exceeded its runtime budget: {elapsed:.2}s > {limit_s}s"
    );
}

#[test]
fn criterion_01_worked_value() {
    let mu = uniform_on(&[0.0, 1.0, 2.0]);
    let g = parse_payoff("pos(1-r)", 1, 1).unwrap();
    // warm-up excluded from the timed section
    let _ = price_primal(&mu, &g, &[]).unwrap();
    let start = Instant::now();
    let primal = price_primal(&mu, &g, &[]).unwrap();
    let dual = price_dual(&mu, &g, &[]).unwrap();
    let env = envelope_price_1d(&mu, &g).unwrap();
    let elapsed = start.elapsed();
    assert!((primal.price - 0.5).abs() <= 1e-9, "primal {}", primal.price);
    assert!((dual.price - 0.5).abs() <= 1e-9, "dual {}", dual.price);
    assert!((env.price - 0.5).abs() <= 1e-9, "envelope {}", env.price);
    assert!(
        elapsed.as_secs_f64() < 1e-3,
        "three-route pricing took {elapsed:?}, budget 1 ms"
    );
    println!(
        "criterion 1: PASS - primal/dual/envelope all 0.5 within 1e-9 in {:.0} us",
        elapsed.as_secs_f64() * 1e6
    );
}

#[test]
fn criterion_02_strong_duality() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    let mut max_gap = 0.0f64;
    let mut max_env_gap = 0.0f64;
    while accepted < 200 {
        attempts += 1;
        assert!(attempts < 5000, "NA instance generation stalled");
        let d = rng.gen_range(1..=3usize);
        let n = rng.gen_range(d + 1..=20);
        let atoms: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(0.2..1.8)).collect())
            .collect();
        let mu = DiscreteMeasure::new(atoms, vec![1.0 / n as f64; n]).unwrap();
        if !check_na(&mu).unwrap().arbitrage_free {
            continue;
        }
        accepted += 1;
        let g = match d {
            1 => parse_payoff("min(abs(r-1),1)", 1, 1).unwrap(),
            2 => parse_payoff("max(r1-1,1-r2)", 2, 1).unwrap(),
            _ => parse_payoff("pos(r1+r2+r3-3)+pos(1-r1)", 3, 1).unwrap(),
        };
        let p = price_primal(&mu, &g, &[]).unwrap();
        let q = price_dual(&mu, &g, &[]).unwrap();
        max_gap = max_gap.max((p.price - q.price).abs());
        assert!(
            (p.price - q.price).abs() <= 1e-7,
            "duality gap {} on instance {accepted}",
            (p.price - q.price).abs()
        );
        if d == 1 {
            let e = envelope_price_1d(&mu, &g).unwrap();
            max_env_gap = max_env_gap.max((e.price - p.price).abs());
            assert!(
                (e.price - p.price).abs() <= 1e-9,
                "envelope vs LP gap {}",
                (e.price - p.price).abs()
            );
        }
    }
    budget("criterion 2", start, 5.0);
    println!(
        "criterion 2: PASS - 200 NA instances, max primal-dual gap {max_gap:.2e}, max envelope gap {max_env_gap:.2e}"
    );
}

#[test]
fn criterion_03_plugin_rate() {
    let start = Instant::now();
    let g = parse_payoff("abs(r-1)", 1, 1).unwrap();
    let law = Law::Uniform { a: 0.0, b: 2.0 };

    // log-log slope over N in {100..10000}
    let slope_cfg = StudyConfig {
        data: DataSpec::Iid(IidSpec { law: law.clone(), seed: 303 }),
        estimator: Estimator::Plugin,
        n_grid: vec![100, 316, 1000, 3162, 10000],
        runs: 400,
        reference: Some(1.0),
    };
    let slope_rep = convergence_study(&slope_cfg, &g).unwrap();
    let slope = slope_rep.slope.expect("positive gaps at every N");

    // mean gap at N in {10, 100, 1000} over 1000 runs
    let gap_cfg = StudyConfig {
        data: DataSpec::Iid(IidSpec { law, seed: 304 }),
        estimator: Estimator::Plugin,
        n_grid: vec![10, 100, 1000],
        runs: 1000,
        reference: Some(1.0),
    };
    let gap_rep = convergence_study(&gap_cfg, &g).unwrap();

    println!("criterion 3 detail: slope = {slope:.4} (target -1 +/- 0.15)");
    let mut gap_ok = true;
    for ((n, mean), std) in gap_rep.n_grid.iter().zip(&gap_rep.means).zip(&gap_rep.stds) {
        let runs = gap_rep.runs as f64;
        let gap = 1.0 - mean;
        let claim = 1.0 / (*n as f64 + 1.0);
        let se = std / runs.sqrt();
        let ok = (gap - claim).abs() <= 3.0 * se;
        gap_ok &= ok;
        println!(
            "criterion 3 detail: N={n} mean gap {gap:.6} vs claimed 1/(N+1) = {claim:.6} \
             (3 MC se = {:.6}, observed/claimed = {:.3}) -> {}",
            3.0 * se,
            gap / claim,
            if ok { "ok" } else { "MISMATCH" }
        );
    }
    assert!(
        (slope + 1.0).abs() <= 0.15,
        "criterion 3: FAIL - slope {slope} outside -1 +/- 0.15"
    );
    if gap_ok {
        println!("criterion 3: PASS");
    } else {
        println!(
            "criterion 3: FAIL - mean-gap subcheck; the measured gap is ~2/(N+1), not 1/(N+1). \
             The slope subcheck passed ({slope:.3}). See the decisions ledger: the 1/(N+1) \
             target stems from an arithmetic slip (2N/(N+1) - 1 = 1 - 2/(N+1))."
        );
    }
    budget("criterion 3", start, 120.0);
    assert!(gap_ok, "criterion 3 mean-gap subcheck failed (documented spec defect)");
}

/// Random 1-Lipschitz piecewise-linear payoff on [0, 3].
fn random_lip1(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let k = rng.gen_range(2..=6);
    let mut knots: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..3.0)).collect();
    knots.push(0.0);
    knots.push(3.0);
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    knots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let mut values = vec![rng.gen_range(-1.0..1.0)];
    for w in knots.windows(2) {
        let slope: f64 = rng.gen_range(-1.0..1.0);
        let prev = *values.last().unwrap();
        values.push(prev + slope * (w[1] - w[0]));
    }
    (knots, values)
}

fn eval_pwl(knots: &[f64], values: &[f64], x: f64) -> f64 {
    if x <= knots[0] {
        return values[0];
    }
    for (i, w) in knots.windows(2).enumerate() {
        if x <= w[1] {
            let t = (x - w[0]) / (w[1] - w[0]);
            return values[i] + t * (values[i + 1] - values[i]);
        }
    }
    *values.last().unwrap()
}

#[test]
fn criterion_04_avar_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);

    // AV@R_1 = mean, cash invariance, positive homogeneity
    for _ in 0..50 {
        let n = rng.gen_range(1..=8);
        let vw: Vec<(f64, f64)> = {
            let mut ws: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let s: f64 = ws.iter().sum();
            ws.iter_mut().for_each(|w| *w /= s);
            ws.into_iter()
                .map(|w| (rng.gen_range(-2.0..2.0), w))
                .collect()
        };
        let mean: f64 = vw.iter().map(|(v, w)| v * w).sum();
        assert!((avar_discrete(&vw, 1.0).unwrap() - mean).abs() <= 1e-12);
        let alpha = rng.gen_range(0.05..1.0);
        let base = avar_discrete(&vw, alpha).unwrap();
        let shifted: Vec<(f64, f64)> = vw.iter().map(|(v, w)| (v + 0.7, *w)).collect();
        assert!((avar_discrete(&shifted, alpha).unwrap() - base - 0.7).abs() <= 1e-12);
        let scaled: Vec<(f64, f64)> = vw.iter().map(|(v, w)| (2.5 * v, *w)).collect();
        assert!((avar_discrete(&scaled, alpha).unwrap() - 2.5 * base).abs() <= 1e-11);
    }

    // LP-oracle equality on measures with <= 6 atoms
    for _ in 0..100 {
        let n = rng.gen_range(1..=6);
        let mut ws: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let s: f64 = ws.iter().sum();
        ws.iter_mut().for_each(|w| *w /= s);
        let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let alpha = rng.gen_range(0.05..1.0);
        let vw: Vec<(f64, f64)> = vals.iter().cloned().zip(ws.iter().cloned()).collect();
        let fast = avar_discrete(&vw, alpha).unwrap();
        // max sum q v  s.t.  sum q = 1, 0 <= q_i <= w_i/alpha
        let mut lp = LinearProgram::new(Sense::Maximize, vals.clone());
        for (j, w) in ws.iter().enumerate() {
            lp.set_bounds(j, 0.0, w / alpha);
        }
        lp.add_eq(vec![1.0; n], 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(
            (fast - sol.objective).abs() <= 1e-9,
            "AV@R {fast} vs LP oracle {}",
            sol.objective
        );
    }

    // Pichler bound on 500 random pairs
    let mut worst_ratio = 0.0f64;
    for _ in 0..500 {
        let (knots, kvals) = random_lip1(&mut rng);
        let make = |rng: &mut ChaCha8Rng| {
            let n = rng.gen_range(1..=8);
            let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
            let mut ws: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let s: f64 = ws.iter().sum();
            ws.iter_mut().for_each(|w| *w /= s);
            DiscreteMeasure::from_scalars(&vals, &ws).unwrap()
        };
        let (mu, nu) = (make(&mut rng), make(&mut rng));
        let alpha = rng.gen_range(0.05..1.0);
        let k = 1.0 / alpha;
        let push = |m: &DiscreteMeasure| -> Vec<(f64, f64)> {
            m.atoms()
                .iter()
                .zip(m.weights())
                .map(|(a, w)| (eval_pwl(&knots, &kvals, a[0]), *w))
                .collect()
        };
        let da = avar_discrete(&push(&mu), alpha).unwrap();
        let db = avar_discrete(&push(&nu), alpha).unwrap();
        let w1 = wasserstein_1d(&mu, &nu, 1.0).unwrap();
        assert!(
            (da - db).abs() <= k * w1 + 1e-10,
            "|dAV@R| = {} > k W1 = {}",
            (da - db).abs(),
            k * w1
        );
        if k * w1 > 0.0 {
            worst_ratio = worst_ratio.max((da - db).abs() / (k * w1));
        }
    }
    budget("criterion 4", start, 10.0);
    println!("criterion 4: PASS - AV@R axioms, LP oracle, transport bound (tightest ratio {worst_ratio:.3})");
}

#[test]
fn criterion_05_degenerate_level_is_plugin() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let payoffs = ["abs(r-1)", "pos(1-r)", "min(abs(r-1),1)", "pos(r-1.2)"];
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n_atoms = rng.gen_range(3..=15);
        let mu = random_straddling(&mut rng, n_atoms);
        let g = parse_payoff(payoffs[i % payoffs.len()], 1, 1).unwrap();
        let alpha = 1.0 / mu.len() as f64;
        let hedged = avar_hedged(&mu, &g, alpha, None).unwrap().value;
        let plugin = envelope_price_1d(&mu, &g).unwrap().price;
        worst = worst.max((hedged - plugin).abs());
        assert!(
            (hedged - plugin).abs() <= 1e-8,
            "alpha = 1/N hedged {hedged} vs plugin {plugin}"
        );
    }
    budget("criterion 5", start, 10.0);
    println!("criterion 5: PASS - 100 instances, worst deviation {worst:.2e}");
}

#[test]
fn criterion_06_wasserstein_sandwich() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    // fixed-beta schedule: epsilon ~ 1/N^2 so the density bound always
    // caps at 1/min-weight, the regime where the lower bound meets the
    // plugin price (criterion 5)
    let cfg = WassersteinConfig { beta_rule: BetaRule::Fixed(0.5), ..Default::default() };
    let payoffs = ["abs(r-1)", "pos(1-r)", "min(abs(r-1),1)"];
    for i in 0..200 {
        let n_atoms = rng.gen_range(3..=25);
        let mu = random_straddling(&mut rng, n_atoms);
        let n = mu.len();
        let g = parse_payoff(payoffs[i % payoffs.len()], 1, 1).unwrap();
        let lip = g.lipschitz_bound().unwrap();
        let b = estimate_bounds(&mu, &g, None, &cfg, n).unwrap();
        let plugin = envelope_price_1d(&mu, &g).unwrap().price;
        assert!(plugin <= b.lower + 1e-8, "plugin {plugin} > lower {}", b.lower);
        assert!(b.lower <= b.upper + 1e-8, "lower above upper");
        // upper - lower decomposes into the transport correction plus
        // the box-restriction slack
        let boxed = avar_hedged(&mu, &g, 1.0 / b.k, Some(cfg.strategy_box))
            .unwrap()
            .value;
        let slack = (boxed - b.lower).max(0.0);
        assert!(
            b.upper - b.lower <= 2.0 * lip * b.k * b.epsilon + slack + 1e-9,
            "upper-lower {} beyond 2Lk*eps + slack {}",
            b.upper - b.lower,
            2.0 * lip * b.k * b.epsilon + slack
        );
        // when the unboxed strategy already fits the box, the slack is
        // gone
        let h1: f64 = b.strategy.iter().map(|h| h.abs()).sum();
        if h1 <= cfg.strategy_box {
            assert!(slack <= 1e-8, "box slack {slack} with |H|_1 = {h1} inside the box");
        }
    }
    // epsilon -> 0 with k capped recovers the plugin price
    let mu = random_straddling(&mut rng, 8);
    let g = parse_payoff("abs(r-1)", 1, 1).unwrap();
    let b = estimate_bounds(&mu, &g, None, &cfg, 10_000_000_000_000).unwrap();
    let plugin = envelope_price_1d(&mu, &g).unwrap().price;
    assert!(
        (b.lower - plugin).abs() <= 1e-6,
        "capped-k limit {} vs plugin {plugin}",
        b.lower
    );
    budget("criterion 6", start, 30.0);
    println!("criterion 6: PASS - 200-case sandwich, decomposition, capped-k limit");
}

#[test]
fn criterion_07_counterexample_guards() {
    let start = Instant::now();
    let delta1 = DiscreteMeasure::dirac(vec![1.0]).unwrap();
    let mut gains = Vec::new();
    for eps in [1e-2, 1e-4] {
        let (nu, q) = unbounded_gain_example(eps).unwrap();
        let w1 = wasserstein_1d(&nu, &delta1, 1.0).unwrap();
        assert!(w1 <= eps + 1e-12, "W1 {w1} beyond the radius {eps}");
        let ratio = nu
            .atoms()
            .iter()
            .zip(nu.weights())
            .map(|(a, w)| q.weight_at(a) / w)
            .fold(0.0f64, f64::max);
        assert!(ratio <= eps.powf(-0.5) + 1e-9, "density ratio {ratio}");
        let gain: f64 = q
            .atoms()
            .iter()
            .zip(q.weights())
            .map(|(a, w)| w * (a[0] - 1.0) * (a[0] - 1.0))
            .sum();
        gains.push(gain);
    }
    // the penalised expectation blows past any fixed bound as eps drops
    assert!(gains[0] >= 1.0, "gain {} at eps 1e-2", gains[0]);
    assert!(gains[1] >= 10.0 * gains[0], "gain must grow without bound");

    // lipschitz audit refusals
    let mu = uniform_on(&[0.5, 1.0, 1.5]);
    let cfg = WassersteinConfig::default();
    let quad = parse_payoff("(r-1)^2", 1, 1).unwrap();
    assert!(matches!(
        estimate_bounds(&mu, &quad, None, &cfg, 3),
        Err(Error::LipschitzAudit(_))
    ));
    let indicator = parse_payoff("1-ind(r==1)", 1, 1).unwrap();
    assert!(matches!(
        estimate_bounds(&mu, &indicator, None, &cfg, 3),
        Err(Error::LipschitzAudit(_))
    ));
    budget("criterion 7", start, 1.0);
    println!(
        "criterion 7: PASS - counterexample measures verified (gains {:.1}, {:.1}), audits refuse",
        gains[0], gains[1]
    );
}

#[test]
fn criterion_08_penalty_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let payoffs = [
        "ind(r<=0.5)",
        "min(abs(r-1),1)",
        "pos(1-r)",
        "ind(r>=1.5)",
        "ind(r<=0.3)+0.5*ind(r>=1.7)",
    ];
    let mut worst = 0.0f64;
    for i in 0..50 {
        let n_atoms = rng.gen_range(3..=10);
        let mu = random_straddling(&mut rng, n_atoms);
        let g = parse_payoff(payoffs[i % payoffs.len()], 1, 1).unwrap();
        let sup: f64 = mu
            .atoms()
            .iter()
            .map(|a| g.eval(a).unwrap().abs())
            .fold(0.0, f64::max)
            .max(1e-6);
        let cfg = PenaltyConfig {
            c_n: sup,
            grid: mu.atoms().to_vec(),
            t_max: 10.0 * mu.len() as f64,
            t_points: 64,
            refine_rounds: 3,
        };
        let est = penalty_estimate(&mu, &g, &cfg).unwrap();
        let plugin = price_primal(&mu, &g, &[]).unwrap().price;
        assert!(est.value >= plugin - 1e-9, "penalty {} below plugin {plugin}", est.value);
        let diff = (est.value - plugin).abs();
        worst = worst.max(diff);
        assert!(diff <= 1e-6, "penalty-plugin gap {diff} at C_N = sup|g|");
    }
    budget("criterion 8", start, 60.0);
    println!("criterion 8: PASS - 50 payoffs, worst |penalty - plugin| = {worst:.2e}");
}

#[test]
fn criterion_09_balayage() {
    let start = Instant::now();
    // hand example
    let q = DiscreteMeasure::from_scalars(&[0.5, 1.5], &[0.5, 0.5]).unwrap();
    let out = balayage_1d(&q, &[0.0, 1.0, 2.0]).unwrap();
    assert_eq!(out.weights(), &[0.25, 0.5, 0.25]);

    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for _ in 0..100 {
        let m = rng.gen_range(2..=15);
        let mut support: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..3.0)).collect();
        support.push(0.0);
        support.push(3.0);
        support.sort_by(|a, b| a.partial_cmp(b).unwrap());
        support.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let max_gap = support.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
        let k = rng.gen_range(1..=10);
        let atoms: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..3.0)).collect();
        let mut ws: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
        let s: f64 = ws.iter().sum();
        ws.iter_mut().for_each(|w| *w /= s);
        let q = DiscreteMeasure::from_scalars(&atoms, &ws).unwrap();
        let out = balayage_1d(&q, &support).unwrap();
        // mass conservation
        assert!((out.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-15);
        // barycenter conservation (no endpoint absorption here: atoms
        // lie inside [0, 3])
        assert!(
            (out.barycenter()[0] - q.barycenter()[0]).abs() <= 1e-12,
            "barycenter drift"
        );
        // transport error bounded by L * max gap for an L-Lipschitz
        // payoff
        let lip = rng.gen_range(0.5..3.0);
        let gv = |x: f64| lip * (x - 1.0).abs();
        let expect = |m: &DiscreteMeasure| -> f64 {
            m.atoms().iter().zip(m.weights()).map(|(a, w)| w * gv(a[0])).sum()
        };
        assert!(
            (expect(&out) - expect(&q)).abs() <= lip * max_gap + 1e-12,
            "transport error beyond L * max gap"
        );
    }
    budget("criterion 9", start, 5.0);
    println!("criterion 9: PASS - conservation, hand example, transport bound (100 cases)");
}

#[test]
fn criterion_10_multiperiod() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    use superhedge::multiperiod::{brute_force_oracle, multiperiod_plugin, MultiperiodProblem};

    // recursion vs path LP on 30 instances
    let payoffs2 = ["pos(1-x1*x2)", "abs(x1-1)+pos(x2-1)", "max(x1-1,1-x2)"];
    let payoffs3 = ["pos(1-x1*x2*x3)", "abs(x2-1)+pos(1-x3)"];
    let mut worst = 0.0f64;
    for case in 0..30 {
        let t = if case % 3 == 2 { 3 } else { 2 };
        let n = rng.gen_range(2..=if t == 3 { 4 } else { 6 });
        let mut vals: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
        vals.push(rng.gen_range(0.0..0.9));
        vals.push(rng.gen_range(1.1..2.0));
        let mu = uniform_on(&vals);
        let text = if t == 2 { payoffs2[case % 3] } else { payoffs3[case % 2] };
        let g = parse_payoff(text, 1, t).unwrap();
        let p = MultiperiodProblem::new(t, mu, g).unwrap();
        let rec = multiperiod_plugin(&p).unwrap();
        let lp = brute_force_oracle(&p).unwrap();
        worst = worst.max((rec - lp).abs());
        assert!((rec - lp).abs() <= 1e-7, "recursion {rec} vs oracle {lp}");
    }

    // separable additivity
    let mu = uniform_on(&[0.2, 0.9, 1.1, 1.8]);
    let g = parse_payoff("pos(1-x1)+abs(x2-1)", 1, 2).unwrap();
    let got = multiperiod_plugin(&MultiperiodProblem::new(2, mu.clone(), g).unwrap()).unwrap();
    let g1 = parse_payoff("pos(1-r)", 1, 1).unwrap();
    let g2 = parse_payoff("abs(r-1)", 1, 1).unwrap();
    let want = envelope_price_1d(&mu, &g1).unwrap().price
        + envelope_price_1d(&mu, &g2).unwrap().price;
    assert!((got - want).abs() <= 1e-9, "separable additivity {got} vs {want}");

    // T = 1 reduction
    let g = parse_payoff("min(abs(r-1),1)", 1, 1).unwrap();
    let one = multiperiod_plugin(&MultiperiodProblem::new(1, mu.clone(), g.clone()).unwrap())
        .unwrap();
    assert_eq!(one, envelope_price_1d(&mu, &g).unwrap().price);

    budget("criterion 10", start, 30.0);
    println!("criterion 10: PASS - 30 oracle matches (worst {worst:.2e}), additivity, T=1 exact");
}

#[test]
fn criterion_11_simulator_moments() {
    let start = Instant::now();

    // DKW frequency check: uniform[0,1], N = 100, 10^4 runs
    let n = 100usize;
    let runs = 10_000usize;
    let eps = 0.15;
    let law = Law::Uniform { a: 0.0, b: 1.0 };
    let mut exceed = 0usize;
    for run in 0..runs {
        let spec = IidSpec { law: law.clone(), seed: 1111 };
        let s = simulate_iid_stream(&spec, n, run as u64).unwrap();
        let mu = DiscreteMeasure::from_samples(&s).unwrap();
        if ks_distance(&mu, &law).unwrap() > eps {
            exceed += 1;
        }
    }
    let freq = exceed as f64 / runs as f64;
    let bound = dkw_bound(n, eps);
    let se = (bound * (1.0 - bound) / runs as f64).sqrt();
    let dkw_ok = freq <= bound + 3.0 * se;
    println!(
        "criterion 11 detail: DKW exceedance {freq:.5} vs bound {bound:.5} + 3se {:.5} -> {}",
        3.0 * se,
        if dkw_ok { "ok" } else { "MISMATCH" }
    );

    // GARCH second moment at the reference parameters
    let spec = GarchSpec::new(
        GarchVariant::LGarch { omega: 0.02, alpha: 0.8, beta: 0.1 },
        Innovation::StudentT { df: 5.0 },
        0.2,
        42,
        ReturnMap::GrossClipped,
    )
    .unwrap();
    let steps = 1_000_000;
    let sim = simulate_garch(&spec, steps).unwrap();
    let m2: f64 = sim.raw.iter().map(|r| r * r).sum::<f64>() / steps as f64;
    let target = 0.02 / (1.0 - 0.8 - 0.1);
    let rel = (m2 - target).abs() / target;
    let moment_ok = rel <= 0.05;
    println!(
        "criterion 11 detail: E[r^2] = {m2:.4} vs 0.2, relative error {:.1}% (tolerance 5%) -> {}",
        rel * 100.0,
        if moment_ok { "ok" } else { "MISMATCH" }
    );

    assert!(dkw_ok, "criterion 11 DKW subcheck failed");
    if moment_ok {
        println!("criterion 11: PASS");
    } else {
        println!(
            "criterion 11: FAIL - moment subcheck; with alpha = 0.8 and t(5) innovations r^2 \
             has infinite variance (tail index ~1.12), so the 10^6-step average typically \
             deviates ~25% from 0.2. The DKW subcheck passed. See the decisions ledger."
        );
    }
    budget("criterion 11", start, 120.0);
    assert!(moment_ok, "criterion 11 moment subcheck failed (documented spec defect)");
}

#[test]
fn criterion_12_winf_estimator() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let g = parse_payoff("abs(r-1)", 1, 1).unwrap();

    // domination and radius monotonicity on random cases
    for _ in 0..30 {
        let n_atoms = rng.gen_range(3..=12);
        let mu = random_straddling(&mut rng, n_atoms);
        let plugin = envelope_price_1d(&mu, &g).unwrap().price;
        let mut prev = plugin;
        for l in [0.0, 0.05, 0.15, 0.3] {
            let cfg = WinfConfig { radius_override: Some(l), mesh: Some(0.002), ..Default::default() };
            let v = winf_estimate(&mu, &g, &cfg, mu.len()).unwrap().value;
            assert!(v >= plugin - 1e-12, "estimate below plugin");
            assert!(v >= prev - 1e-12, "estimate not monotone in the radius");
            prev = v;
        }
    }

    // hand case: single sample, radius 1/2, V-shaped payoff
    let single = uniform_on(&[1.0]);
    let cfg = WinfConfig { radius_override: Some(0.5), ..Default::default() };
    let est = winf_estimate(&single, &g, &cfg, 1).unwrap();
    assert!((est.value - 0.5).abs() <= est.mesh, "hand case {} vs 0.5", est.value);

    // consistency trend on uniform[0, 2] with the alpha = 1 radius
    let law = Law::Uniform { a: 0.0, b: 2.0 };
    let runs = 200;
    let mut prev_mean = f64::INFINITY;
    let mut prev_se = 0.0f64;
    for (gi, n) in [50usize, 100, 200, 400].into_iter().enumerate() {
        let vals: Vec<f64> = (0..runs)
            .map(|run| {
                let spec = IidSpec { law: law.clone(), seed: 2121 };
                let s = simulate_iid_stream(&spec, n, (gi * runs + run) as u64).unwrap();
                let mu = DiscreteMeasure::from_samples(&s).unwrap();
                winf_estimate(&mu, &g, &WinfConfig::default(), n).unwrap().value
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / runs as f64;
        let se = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (runs as f64 - 1.0)
            / runs as f64)
            .sqrt();
        assert!(mean >= 1.0, "mean estimate {mean} below the true price at N = {n}");
        assert!(
            mean <= prev_mean + 2.0 * (se + prev_se),
            "mean estimate rose beyond MC error at N = {n}"
        );
        prev_mean = mean;
        prev_se = se;
    }
    budget("criterion 12", start, 60.0);
    println!("criterion 12: PASS - domination, monotonicity, hand case, consistency trend");
}

#[test]
fn criterion_13_backtest_trend() {
    let start = Instant::now();
    // reference-parameter process with a higher-variance middle regime
    let base = GarchSpec::new(
        GarchVariant::LGarch { omega: 0.02, alpha: 0.8, beta: 0.1 },
        Innovation::StudentT { df: 5.0 },
        0.2,
        42,
        ReturnMap::GrossClipped,
    )
    .unwrap();
    let hot = GarchVariant::LGarch { omega: 0.1, alpha: 0.8, beta: 0.1 };
    let n = 1000usize;
    let sim = simulate_garch_regime(&base, n, 330..670, &hot).unwrap();

    let g = parse_payoff("pos(r-1)", 1, 1).unwrap();
    let cfg = WassersteinConfig::default();
    let rep = rolling_backtest(&sim.series, 50, &cfg, None, &g, 0.05, 10).unwrap();

    // ball upper estimate dominates the plugin variant pointwise
    for (w, p) in rep.wasserstein.iter().zip(&rep.plugin) {
        assert!(w >= p, "ball estimate below plugin in a window");
    }

    // estimates whose window sits entirely inside one regime
    let mean_over = |vals: &[f64], lo_t: usize, hi_t: usize| -> f64 {
        let xs: Vec<f64> = rep
            .t
            .iter()
            .zip(vals)
            .filter(|(t, _)| **t >= lo_t && **t <= hi_t)
            .map(|(_, v)| *v)
            .collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    for (name, series) in [("plugin", &rep.plugin), ("wasserstein", &rep.wasserstein)] {
        let before = mean_over(series, 50, 330);
        let mid = mean_over(series, 380, 670);
        let after = mean_over(series, 720, 1000);
        assert!(
            mid > before && mid > after,
            "{name}: middle-regime level {mid:.4} does not dominate ({before:.4}, {after:.4})"
        );
        println!(
            "criterion 13 detail: {name} thirds = {before:.4} | {mid:.4} | {after:.4}"
        );
    }
    budget("criterion 13", start, 120.0);
    println!("criterion 13: PASS - regime trend holds for both estimators");
}
