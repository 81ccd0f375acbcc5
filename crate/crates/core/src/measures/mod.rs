//! Discrete probability measures on nonnegative d-vectors.
//!
//! [`DiscreteMeasure`] is the common carrier for empirical measures,
//! martingale measures and transport targets. Construction canonicalises:
//! atoms are sorted lexicographically, duplicates merged, weights
//! validated. All distance, quantile and AV@R code relies on that
//! canonical form.

mod law;
mod schedule;

pub use law::Law;
pub use schedule::{
    dkw_bound, epsilon_schedule, kappa_interquantile, ScheduleBranch, ScheduleParams,
};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Finitely supported probability measure on nonnegative d-vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
    dim: usize,
}

impl DiscreteMeasure {
    /// Builds a measure from (atom, weight) pairs.
    ///
    /// Weights must be strictly positive and sum to 1 within 1e-9 (the
    /// sum is renormalised to absorb float drift); atom coordinates must
    /// be nonnegative; duplicate atoms are merged with weights summed.
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptySample("measure needs at least one atom".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::Shape(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        let dim = atoms[0].len();
        if dim == 0 {
            return Err(Error::Shape("zero-dimensional atoms".into()));
        }
        for a in &atoms {
            if a.len() != dim {
                return Err(Error::Shape("atoms of mixed dimension".into()));
            }
            if a.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::Domain(format!("atom {a:?} has a negative or non-finite coordinate")));
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::Domain("weights must be strictly positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Domain(format!(
                "weights sum to {total}, outside 1 ± {WEIGHT_SUM_TOL}"
            )));
        }

        let mut pairs: Vec<(Vec<f64>, f64)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| cmp_lex(&a.0, &b.0));
        let mut merged: Vec<(Vec<f64>, f64)> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match merged.last_mut() {
                Some((prev, pw)) if *prev == a => *pw += w,
                _ => merged.push((a, w)),
            }
        }
        let (atoms, mut weights): (Vec<_>, Vec<_>) = merged.into_iter().unzip();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self { atoms, weights, dim })
    }

    /// Empirical measure of a return series: uniform weights before
    /// duplicate merging.
    pub fn from_samples(series: &ReturnSeries) -> Result<Self> {
        if series.observations.is_empty() {
            return Err(Error::EmptySample("empty return series".into()));
        }
        let n = series.observations.len() as f64;
        Self::new(series.observations.clone(), vec![1.0 / n; series.observations.len()])
    }

    /// Point mass at a single atom.
    pub fn dirac(atom: Vec<f64>) -> Result<Self> {
        Self::new(vec![atom], vec![1.0])
    }

    /// One-dimensional measure from scalar atoms.
    pub fn from_scalars(values: &[f64], weights: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|v| vec![*v]).collect(), weights.to_vec())
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Scalar atom values; only valid in dimension 1 (sorted ascending
    /// by canonical form).
    pub fn scalar_atoms(&self) -> Result<Vec<f64>> {
        if self.dim != 1 {
            return Err(Error::UnsupportedDimension {
                dim: self.dim,
                context: "scalar atom view".into(),
            });
        }
        Ok(self.atoms.iter().map(|a| a[0]).collect())
    }

    /// Barycenter (componentwise mean).
    pub fn barycenter(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.dim];
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            for (bi, ai) in b.iter_mut().zip(a) {
                *bi += w * ai;
            }
        }
        b
    }

    /// Weight placed on a specific atom (exact coordinate match), 0 if absent.
    pub fn weight_at(&self, atom: &[f64]) -> f64 {
        match self
            .atoms
            .binary_search_by(|probe| cmp_lex(probe, atom))
        {
            Ok(i) => self.weights[i],
            Err(_) => 0.0,
        }
    }

    /// CDF in dimension 1: P((-inf, x]).
    pub fn cdf(&self, x: f64) -> f64 {
        debug_assert_eq!(self.dim, 1);
        let mut acc = 0.0;
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            if a[0] <= x {
                acc += w;
            } else {
                break;
            }
        }
        acc
    }
}

fn cmp_lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.partial_cmp(y).expect("atoms are finite") {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Ordered sample of d-dimensional gross returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub observations: Vec<Vec<f64>>,
    /// Provenance: file path or simulator description.
    pub source: String,
}

impl ReturnSeries {
    pub fn new(observations: Vec<Vec<f64>>, source: impl Into<String>) -> Result<Self> {
        let source = source.into();
        if let Some(first) = observations.first() {
            let dim = first.len();
            for (i, row) in observations.iter().enumerate() {
                if row.len() != dim {
                    return Err(Error::Shape(format!(
                        "row {i} has {} columns, expected {dim}",
                        row.len()
                    )));
                }
                if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(Error::Domain(format!(
                        "row {i} of {source} has a negative or non-finite return"
                    )));
                }
            }
        }
        Ok(Self { observations, source })
    }

    pub fn from_scalars(values: &[f64], source: impl Into<String>) -> Result<Self> {
        Self::new(values.iter().map(|v| vec![*v]).collect(), source)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.observations.first().map_or(0, |r| r.len())
    }

    /// Parses a CSV file of gross returns: optional header, one
    /// observation per row, d numeric columns.
    pub fn from_csv(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            match parsed {
                Ok(row) => rows.push(row),
                Err(_) if lineno == 0 => continue, // header
                Err(e) => {
                    return Err(Error::Io(format!(
                        "{} line {}: {e}",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(rows, path.display().to_string())
    }

    pub fn to_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut out = String::new();
        for row in &self.observations {
            let line: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

/// Wasserstein distance of order `p` between one-dimensional measures,
/// computed as the L^p norm of the quantile-function difference (the
/// optimal monotone coupling). `p = f64::INFINITY` gives the sup-norm
/// of the quantile difference.
pub fn wasserstein_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            dim: mu.dim().max(nu.dim()),
            context: "wasserstein_1d".into(),
        });
    }
    if !(p >= 1.0) {
        return Err(Error::Parameter(format!("wasserstein order p = {p} < 1")));
    }
    // Walk the common refinement of the two weight partitions. Both
    // quantile functions are constant on each refined segment.
    let (xa, wa) = (mu.scalar_atoms()?, mu.weights());
    let (xb, wb) = (nu.scalar_atoms()?, nu.weights());
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ra, mut rb) = (wa[0], wb[0]);
    let mut acc = 0.0f64;
    let mut sup = 0.0f64;
    loop {
        let d = (xa[i] - xb[j]).abs();
        let seg = ra.min(rb);
        if p.is_finite() {
            acc += seg * d.powf(p);
        } else {
            sup = sup.max(d);
        }
        ra -= seg;
        rb -= seg;
        if ra <= 1e-15 {
            i += 1;
            if i == xa.len() {
                break;
            }
            ra = wa[i];
        }
        if rb <= 1e-15 {
            j += 1;
            if j == xb.len() {
                break;
            }
            rb = wb[j];
        }
    }
    Ok(if p.is_finite() { acc.powf(1.0 / p) } else { sup })
}

/// Kolmogorov-Smirnov distance between a one-dimensional discrete
/// measure and a reference law (discrete or analytic); exact sup over
/// the jump points of both CDFs.
pub fn ks_distance(mu: &DiscreteMeasure, nu: &Law) -> Result<f64> {
    if mu.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            dim: mu.dim(),
            context: "ks_distance".into(),
        });
    }
    let xs = mu.scalar_atoms()?;
    let mut sup = 0.0f64;
    match nu {
        Law::Discrete(d) => {
            // The difference of two step functions is piecewise constant
            // with breakpoints at the union of atoms; compare left limits
            // and values at every breakpoint.
            let mut points = xs.clone();
            points.extend(d.scalar_atoms()?);
            points.sort_by(|a, b| a.partial_cmp(b).expect("finite atoms"));
            points.dedup();
            for x in points {
                sup = sup.max((mu.cdf(x) - d.cdf(x)).abs());
                sup = sup.max((cdf_left(mu, x) - cdf_left(d, x)).abs());
            }
        }
        _ => {
            // Continuous reference: on each segment between jumps of the
            // empirical CDF the difference is monotone, so the sup is
            // attained just before or just after a jump.
            let mut acc = 0.0;
            for (x, w) in xs.iter().zip(mu.weights()) {
                let f = nu.cdf(*x);
                sup = sup.max((acc - f).abs());
                acc += w;
                sup = sup.max((acc - f).abs());
            }
        }
    }
    Ok(sup)
}

fn cdf_left(d: &DiscreteMeasure, x: f64) -> f64 {
    let mut acc = 0.0;
    for (a, w) in d.atoms().iter().zip(d.weights()) {
        if a[0] < x {
            acc += w;
        } else {
            break;
        }
    }
    acc
}

/// Hausdorff distance between two finite point sets (Euclidean ground
/// metric): max of the two directed sup-inf distances.
pub fn hausdorff_support(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample("hausdorff_support needs nonempty sets".into()));
    }
    let directed = |from: &[Vec<f64>], to: &[Vec<f64>]| -> f64 {
        from.iter()
            .map(|p| {
                to.iter()
                    .map(|q| euclid(p, q))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}

fn euclid(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Average Value-at-Risk of a discrete value distribution at level
/// `alpha`: the mean of the upper alpha-mass. Values may be negative
/// (they are payoff outcomes, not returns).
///
/// Equals the density-bounded maximisation `max { E_q[v] : 0 <= q_i <=
/// w_i/alpha, sum q_i = 1 }` with `alpha = 1/k`.
pub fn avar_discrete(values_weights: &[(f64, f64)], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Level(format!("AV@R level alpha = {alpha} outside (0, 1]")));
    }
    if values_weights.is_empty() {
        return Err(Error::EmptySample("avar_discrete of empty distribution".into()));
    }
    let mut vw = values_weights.to_vec();
    vw.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite values"));
    let mut remaining = alpha;
    let mut acc = 0.0;
    for (v, w) in vw {
        let take = w.min(remaining);
        acc += take * v;
        remaining -= take;
        if remaining <= 1e-15 {
            break;
        }
    }
    // Leftover mass (weights summing slightly under alpha) is a float
    // artefact; alpha normalises it away.
    Ok(acc / alpha)
}

/// AV@R of a payoff under a return measure: pushforward then tail mean.
pub fn avar_of_payoff(
    mu: &DiscreteMeasure,
    values: &[f64],
    alpha: f64,
) -> Result<f64> {
    if values.len() != mu.len() {
        return Err(Error::Shape("one payoff value per atom required".into()));
    }
    let vw: Vec<(f64, f64)> = values.iter().cloned().zip(mu.weights().iter().cloned()).collect();
    avar_discrete(&vw, alpha)
}
