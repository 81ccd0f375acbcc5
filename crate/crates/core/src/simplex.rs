//! Dense two-phase simplex solver.
//!
//! Every pricing operation in this crate reduces to a linear program
//! with at most a few hundred variables, so a dense tableau with
//! Bland's anti-cycling rule is used: it is deterministic (lowest-index
//! ties), simple to audit, and terminates without perturbation tricks.
//!
//! Duals are read off the artificial columns of the final tableau and
//! mapped back through the standard-form transformations, so callers
//! get multipliers for the rows they wrote, in the order they wrote
//! them. Degenerate ties are broken by lowest variable index, which
//! matters downstream: dual vectors (hedge strategies) are non-unique
//! and the deterministic rule pins which one is reported.

use crate::error::{Error, Result};

const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ineq {
    Le,
    Ge,
}

/// A dense linear program. Variables default to free; use
/// [`LinearProgram::set_bounds`] to restrict them.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub ineq: Vec<(Vec<f64>, Ineq, f64)>,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// Multipliers for the equality rows, in insertion order.
    pub dual_eq: Vec<f64>,
    /// Multipliers for the inequality rows, in insertion order.
    pub dual_ineq: Vec<f64>,
    /// Improving ray in user variables when unbounded.
    pub ray: Option<Vec<f64>>,
    pub feasibility_residual: f64,
    pub complementarity_residual: f64,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            eq: Vec::new(),
            ineq: Vec::new(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
        }
    }

    pub fn add_eq(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.eq.push((coeffs, rhs));
    }

    pub fn add_ineq(&mut self, coeffs: Vec<f64>, sense: Ineq, rhs: f64) {
        self.ineq.push((coeffs, sense, rhs));
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.bounds[var] = (lo, hi);
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.num_vars();
        for (row, rhs) in &self.eq {
            if row.len() != n {
                return Err(Error::Shape(format!(
                    "equality row of length {} in a {n}-variable program",
                    row.len()
                )));
            }
            if !rhs.is_finite() {
                return Err(Error::Shape("non-finite rhs".into()));
            }
        }
        for (row, _, rhs) in &self.ineq {
            if row.len() != n {
                return Err(Error::Shape(format!(
                    "inequality row of length {} in a {n}-variable program",
                    row.len()
                )));
            }
            if !rhs.is_finite() {
                return Err(Error::Shape("non-finite rhs".into()));
            }
        }
        for (lo, hi) in &self.bounds {
            if lo > hi {
                return Err(Error::Shape(format!("empty bound interval [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Column-to-user-variable mapping produced by the standard-form
/// conversion.
enum ColMap {
    /// x = lo + xhat
    Shifted { var: usize, lo: f64 },
    /// x = hi - xhat
    Mirrored { var: usize, hi: f64 },
    /// positive / negative part of a free variable
    FreePos { var: usize },
    FreeNeg { var: usize },
}

struct Standard {
    /// rows of [A | b], b >= 0
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    cost: Vec<f64>,
    cols: Vec<ColMap>,
    /// user row index (eq first, then ineq) per standard row; None for
    /// internal upper-bound rows
    row_user: Vec<Option<usize>>,
    /// -1 where the row was negated to make b nonnegative
    row_sign: Vec<f64>,
    /// additive objective constant from bound shifts
    obj_shift: f64,
}

fn standardize(lp: &LinearProgram) -> Standard {
    let n = lp.num_vars();
    let negate = matches!(lp.sense, Sense::Maximize);

    let mut cols: Vec<ColMap> = Vec::new();
    let mut col_of_var: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut upper_rows: Vec<(usize, f64)> = Vec::new(); // (var, cap on xhat)
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => {
                col_of_var[j].push(cols.len());
                cols.push(ColMap::Shifted { var: j, lo });
                upper_rows.push((j, hi - lo));
            }
            (true, false) => {
                col_of_var[j].push(cols.len());
                cols.push(ColMap::Shifted { var: j, lo });
            }
            (false, true) => {
                col_of_var[j].push(cols.len());
                cols.push(ColMap::Mirrored { var: j, hi });
            }
            (false, false) => {
                col_of_var[j].push(cols.len());
                cols.push(ColMap::FreePos { var: j });
                col_of_var[j].push(cols.len());
                cols.push(ColMap::FreeNeg { var: j });
            }
        }
    }
    let struct_cols = cols.len();

    // substituted coefficient and rhs correction for one user row
    let substitute = |row: &[f64]| -> (Vec<f64>, f64) {
        let mut coeffs = vec![0.0; struct_cols];
        let mut rhs_shift = 0.0;
        for (j, &c) in row.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for &col in &col_of_var[j] {
                match cols[col] {
                    ColMap::Shifted { lo, .. } => {
                        coeffs[col] += c;
                        rhs_shift += c * lo;
                    }
                    ColMap::Mirrored { hi, .. } => {
                        coeffs[col] -= c;
                        rhs_shift += c * hi;
                    }
                    ColMap::FreePos { .. } => coeffs[col] += c,
                    ColMap::FreeNeg { .. } => coeffs[col] -= c,
                }
            }
        }
        (coeffs, rhs_shift)
    };

    let mut a: Vec<Vec<f64>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut row_user: Vec<Option<usize>> = Vec::new();
    let mut row_sign: Vec<f64> = Vec::new();

    let mut push_row = |coeffs: Vec<f64>, rhs: f64, user: Option<usize>| -> f64 {
        let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
        if rhs < 0.0 {
            a.push(coeffs.iter().map(|c| -c).collect());
            b.push(-rhs);
        } else {
            a.push(coeffs);
            b.push(rhs);
        }
        row_sign.push(sign);
        row_user.push(user);
        sign
    };

    let mut slack_specs: Vec<(usize, f64)> = Vec::new(); // (row, sign)
    for (i, (row, rhs)) in lp.eq.iter().enumerate() {
        let (coeffs, shift) = substitute(row);
        push_row(coeffs, rhs - shift, Some(i));
    }
    let n_eq = lp.eq.len();
    let mut next_row = n_eq;
    for (i, (row, sense, rhs)) in lp.ineq.iter().enumerate() {
        let (coeffs, shift) = substitute(row);
        let sign = match sense {
            Ineq::Le => 1.0,
            Ineq::Ge => -1.0,
        };
        let flip = push_row(coeffs, rhs - shift, Some(n_eq + i));
        slack_specs.push((next_row, sign * flip));
        next_row += 1;
    }
    for (var, cap) in upper_rows {
        let col = col_of_var[var][0];
        let mut coeffs = vec![0.0; struct_cols];
        coeffs[col] = 1.0;
        let flip = push_row(coeffs, cap, None);
        slack_specs.push((next_row, flip));
        next_row += 1;
    }
    let _ = &mut push_row;

    // slack columns
    for &(row, sign) in &slack_specs {
        let col = cols.len();
        cols.push(ColMap::Shifted { var: usize::MAX, lo: 0.0 }); // slack, never mapped back
        for (i, arow) in a.iter_mut().enumerate() {
            arow.push(if i == row { sign } else { 0.0 });
        }
        debug_assert_eq!(col + 1, a[0].len());
    }

    // objective on structural columns
    let mut cost = vec![0.0; cols.len()];
    let mut obj_shift = 0.0;
    for (j, &c0) in lp.objective.iter().enumerate() {
        let c = if negate { -c0 } else { c0 };
        for &col in &col_of_var[j] {
            match cols[col] {
                ColMap::Shifted { lo, .. } => {
                    cost[col] += c;
                    obj_shift += c * lo;
                }
                ColMap::Mirrored { hi, .. } => {
                    cost[col] -= c;
                    obj_shift += c * hi;
                }
                ColMap::FreePos { .. } => cost[col] += c,
                ColMap::FreeNeg { .. } => cost[col] -= c,
            }
        }
    }

    Standard { a, b, cost, cols, row_user, row_sign, obj_shift }
}

/// Solves the program. `Err` is reserved for malformed input and pivot
/// stalls; infeasible and unbounded are ordinary statuses.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.check_shape()?;
    let std_form = standardize(lp);
    let m = std_form.a.len();
    let n_struct = std_form.cols.len();
    let n_total = n_struct + m; // + artificials

    // tableau: m rows of [A | I_art | b]
    let mut t: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (i, row) in std_form.a.iter().enumerate() {
        let mut r = Vec::with_capacity(n_total + 1);
        r.extend_from_slice(row);
        for k in 0..m {
            r.push(if k == i { 1.0 } else { 0.0 });
        }
        r.push(std_form.b[i]);
        t.push(r);
    }
    let mut basis: Vec<usize> = (n_struct..n_total).collect();

    // phase-1 cost row (artificial sum) and phase-2 cost row, both kept
    // reduced against the current basis
    let mut z1: Vec<f64> = vec![0.0; n_total + 1];
    for j in 0..n_struct {
        z1[j] = -(0..m).map(|i| t[i][j]).sum::<f64>();
    }
    z1[n_total] = -std_form.b.iter().sum::<f64>();
    let mut z2: Vec<f64> = vec![0.0; n_total + 1];
    z2[..n_struct].copy_from_slice(&std_form.cost);

    let max_pivots = 50_000 + 200 * (m + n_total);
    let mut iterations = 0usize;

    let pivot = |t: &mut Vec<Vec<f64>>,
                     z1: &mut Vec<f64>,
                     z2: &mut Vec<f64>,
                     basis: &mut Vec<usize>,
                     r: usize,
                     e: usize| {
        let piv = t[r][e];
        for v in t[r].iter_mut() {
            *v /= piv;
        }
        for i in 0..t.len() {
            if i != r {
                let f = t[i][e];
                if f != 0.0 {
                    let (pr, row) = if i < r {
                        let (a, b) = t.split_at_mut(r);
                        (&b[0], &mut a[i])
                    } else {
                        let (a, b) = t.split_at_mut(i);
                        (&a[r], &mut b[0])
                    };
                    for (x, p) in row.iter_mut().zip(pr.iter()) {
                        *x -= f * p;
                    }
                }
            }
        }
        for z in [z1, z2] {
            let f = z[e];
            if f != 0.0 {
                for (x, p) in z.iter_mut().zip(t[r].iter()) {
                    *x -= f * p;
                }
            }
        }
        basis[r] = e;
    };

    // Bland: entering = lowest-index column with negative reduced cost;
    // leaving = min ratio, ties by lowest basic variable index. Columns
    // whose ratio test fails without being a decisive improving ray are
    // numerically degenerate (entries collapsed below the pivot
    // tolerance); they are barred instead of reported unbounded.
    let run = |t: &mut Vec<Vec<f64>>,
               z1: &mut Vec<f64>,
               z2: &mut Vec<f64>,
               basis: &mut Vec<usize>,
               iterations: &mut usize,
               phase1: bool,
               allow: &dyn Fn(usize) -> bool|
     -> Result<Option<usize>> {
        let mut banned = vec![false; n_total];
        loop {
            let z = if phase1 { &*z1 } else { &*z2 };
            let enter = (0..n_total).find(|&j| allow(j) && !banned[j] && z[j] < -OPT_TOL);
            let Some(e) = enter else { return Ok(None) };
            let mut leave: Option<usize> = None;
            let mut best = f64::INFINITY;
            let mut col_max = f64::NEG_INFINITY;
            for i in 0..m {
                let a = t[i][e];
                col_max = col_max.max(a);
                if a > PIVOT_TOL {
                    let ratio = t[i][n_total] / a;
                    if ratio < best - 1e-12
                        || (ratio < best + 1e-12
                            && leave.is_none_or(|l| basis[i] < basis[l]))
                    {
                        best = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                // phase 1 is bounded below by construction, and a
                // near-zero cost with a collapsed column is noise
                if phase1 || (col_max > 0.0 && z[e] > -1e-6) {
                    banned[e] = true;
                    continue;
                }
                return Ok(Some(e));
            };
            pivot(t, z1, z2, basis, r, e);
            *iterations += 1;
            if *iterations > max_pivots {
                return Err(Error::SolverStall {
                    iterations: *iterations,
                    context: format!(
                        "{} rows, {} columns, phase {}",
                        m,
                        n_total,
                        if phase1 { 1 } else { 2 }
                    ),
                });
            }
        }
    };

    // phase 1
    let unbounded1 = run(&mut t, &mut z1, &mut z2, &mut basis, &mut iterations, true, &|_| true)?;
    debug_assert!(unbounded1.is_none(), "phase 1 never reports a ray");
    if -z1[n_total] > FEAS_TOL * (1.0 + std_form.b.iter().sum::<f64>().abs()) {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            objective: f64::NAN,
            primal: Vec::new(),
            dual_eq: Vec::new(),
            dual_ineq: Vec::new(),
            ray: None,
            feasibility_residual: f64::NAN,
            complementarity_residual: f64::NAN,
            iterations,
        });
    }
    // drive lingering artificials out of the basis where possible
    for i in 0..m {
        if basis[i] >= n_struct && t[i][n_total].abs() <= FEAS_TOL {
            if let Some(e) = (0..n_struct).find(|&j| t[i][j].abs() > 1e-7) {
                pivot(&mut t, &mut z1, &mut z2, &mut basis, i, e);
                iterations += 1;
            }
        }
    }

    // phase 2: artificials may not re-enter
    let unbounded2 = run(
        &mut t,
        &mut z1,
        &mut z2,
        &mut basis,
        &mut iterations,
        false,
        &|j| j < n_struct,
    )?;

    let n_user = lp.num_vars();
    let assemble_primal = |t: &Vec<Vec<f64>>, basis: &Vec<usize>| -> Vec<f64> {
        let mut xhat = vec![0.0; n_total];
        for (i, &bv) in basis.iter().enumerate() {
            xhat[bv] = t[i][n_total];
        }
        let mut x = vec![0.0; n_user];
        for (col, map) in std_form.cols.iter().enumerate() {
            match *map {
                ColMap::Shifted { var, lo } => {
                    if var != usize::MAX {
                        x[var] = lo + xhat[col];
                    }
                }
                ColMap::Mirrored { var, hi } => x[var] = hi - xhat[col],
                ColMap::FreePos { var } => x[var] += xhat[col],
                ColMap::FreeNeg { var } => x[var] -= xhat[col],
            }
        }
        x
    };

    if let Some(e) = unbounded2 {
        // improving ray: entering column direction mapped to user space
        let mut dhat = vec![0.0; n_total];
        dhat[e] = 1.0;
        for i in 0..m {
            dhat[basis[i]] = -t[i][e];
        }
        let mut ray = vec![0.0; n_user];
        for (col, map) in std_form.cols.iter().enumerate() {
            match *map {
                ColMap::Shifted { var, .. } => {
                    if var != usize::MAX {
                        ray[var] += dhat[col];
                    }
                }
                ColMap::Mirrored { var, .. } => ray[var] -= dhat[col],
                ColMap::FreePos { var } => ray[var] += dhat[col],
                ColMap::FreeNeg { var } => ray[var] -= dhat[col],
            }
        }
        if matches!(lp.sense, Sense::Maximize) {
            // ray already improves the internal minimisation of -c
        }
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            objective: match lp.sense {
                Sense::Minimize => f64::NEG_INFINITY,
                Sense::Maximize => f64::INFINITY,
            },
            primal: assemble_primal(&t, &basis),
            dual_eq: Vec::new(),
            dual_ineq: Vec::new(),
            ray: Some(ray),
            feasibility_residual: f64::NAN,
            complementarity_residual: f64::NAN,
            iterations,
        });
    }

    let x = assemble_primal(&t, &basis);
    let internal_obj = -z2[n_total] + std_form.obj_shift;
    let objective = match lp.sense {
        Sense::Minimize => internal_obj,
        Sense::Maximize => -internal_obj,
    };

    // duals from artificial reduced costs: z2[art_i] = -y_i
    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut dual_eq = vec![0.0; lp.eq.len()];
    let mut dual_ineq = vec![0.0; lp.ineq.len()];
    for i in 0..m {
        if let Some(user) = std_form.row_user[i] {
            let y = -z2[n_struct + i] * std_form.row_sign[i] * sign;
            if user < lp.eq.len() {
                dual_eq[user] = y;
            } else {
                dual_ineq[user - lp.eq.len()] = y;
            }
        }
    }

    // residuals against the user-level program
    let mut feas: f64 = 0.0;
    for (row, rhs) in &lp.eq {
        let ax: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
        feas = feas.max((ax - rhs).abs());
    }
    let mut comp: f64 = 0.0;
    for ((row, sense, rhs), y) in lp.ineq.iter().zip(&dual_ineq) {
        let ax: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
        let slack = match sense {
            Ineq::Le => rhs - ax,
            Ineq::Ge => ax - rhs,
        };
        feas = feas.max((-slack).max(0.0));
        comp = comp.max((y * slack).abs());
    }
    for ((lo, hi), xi) in lp.bounds.iter().zip(&x) {
        feas = feas.max((lo - xi).max(0.0)).max((xi - hi).max(0.0));
    }

    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective,
        primal: x,
        dual_eq,
        dual_ineq,
        ray: None,
        feasibility_residual: feas,
        complementarity_residual: comp,
        iterations,
    })
}
