//! Payoff expressions g(r) and g(r_1, ..., r_T): parsing, evaluation,
//! printing and a Lipschitz audit.
//!
//! A one-period payoff over d assets uses variables `r` (d = 1) or
//! `r1..rd`; a multiperiod payoff over T periods of a single asset uses
//! `x1..xT`. Evaluation is total on nonnegative inputs except where
//! log/division guards fire; those return errors, never NaN.

mod parse;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
}

impl CmpOp {
    fn as_str(&self) -> &'static str {
        match self {
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
            CmpOp::Eq => "==",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Flat index into the evaluation point.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Abs(Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Pos(Box<Expr>),
    Sqrt { arg: Box<Expr>, guarded: bool },
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Ind { lhs: Box<Expr>, op: CmpOp, rhs: Box<Expr> },
}

/// A parsed payoff over a declared (dimension, periods) signature.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffExpr {
    root: Expr,
    dim: usize,
    periods: usize,
    warnings: Vec<String>,
}

pub fn parse_payoff(text: &str, dim: usize, periods: usize) -> Result<PayoffExpr> {
    if dim == 0 || periods == 0 {
        return Err(Error::Parameter("payoff signature needs dim >= 1 and periods >= 1".into()));
    }
    if periods > 1 && dim != 1 {
        return Err(Error::Parameter(
            "multiperiod payoffs are declared over a single asset (d = 1)".into(),
        ));
    }
    let mut root = parse::Parser::new(text, dim, periods)?.parse()?;
    let mut warnings = Vec::new();
    mark_guarded_sqrts(&mut root, &mut warnings);
    Ok(PayoffExpr { root, dim, periods, warnings })
}

/// Marks sqrt nodes that share a product with an indicator factor:
/// those clamp negative arguments to 0 (the indicator zeroes the term
/// anyway), matching piecewise-defined payoffs like
/// `sqrt(r-1)*ind(r>1)`. Unguarded negative sqrt stays an error.
fn mark_guarded_sqrts(e: &mut Expr, warnings: &mut Vec<String>) {
    fn contains_ind(e: &Expr) -> bool {
        match e {
            Expr::Ind { .. } => true,
            Expr::Neg(a) | Expr::Abs(a) | Expr::Pos(a) => contains_ind(a),
            Expr::Mul(a, b) => contains_ind(a) || contains_ind(b),
            _ => false,
        }
    }
    fn guard_all(e: &mut Expr, warnings: &mut Vec<String>) {
        match e {
            Expr::Sqrt { arg, guarded } => {
                if !*guarded {
                    *guarded = true;
                    warnings.push(format!(
                        "sqrt({}) clamps negative arguments to 0 (guarded by an indicator factor)",
                        print_expr(arg, 0)
                    ));
                }
                guard_all(arg, warnings);
            }
            _ => for_each_child_mut(e, &mut |c| guard_all(c, warnings)),
        }
    }
    if let Expr::Mul(a, b) = e {
        let (ia, ib) = (contains_ind(a), contains_ind(b));
        if ia && !ib {
            guard_all(b, warnings);
        }
        if ib && !ia {
            guard_all(a, warnings);
        }
    }
    for_each_child_mut(e, &mut |c| mark_guarded_sqrts(c, warnings));
}

fn for_each_child_mut(e: &mut Expr, f: &mut impl FnMut(&mut Expr)) {
    match e {
        Expr::Const(_) | Expr::Var(_) => {}
        Expr::Neg(a) | Expr::Abs(a) | Expr::Pos(a) | Expr::Exp(a) | Expr::Log(a) => f(a),
        Expr::Sqrt { arg, .. } => f(arg),
        Expr::Pow(a, _) => f(a),
        Expr::Add(a, b)
        | Expr::Sub(a, b)
        | Expr::Mul(a, b)
        | Expr::Div(a, b)
        | Expr::Max(a, b)
        | Expr::Min(a, b) => {
            f(a);
            f(b);
        }
        Expr::Ind { lhs, rhs, .. } => {
            f(lhs);
            f(rhs);
        }
    }
}

impl PayoffExpr {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    /// Length of an evaluation point: d for one period, T for
    /// multiperiod.
    pub fn arity(&self) -> usize {
        if self.periods > 1 {
            self.periods
        } else {
            self.dim
        }
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.arity() {
            return Err(Error::Shape(format!(
                "payoff expects {} coordinates, point has {}",
                self.arity(),
                point.len()
            )));
        }
        eval_expr(&self.root, point)
    }

    /// Scalar convenience for d = 1, T = 1.
    pub fn eval_scalar(&self, r: f64) -> Result<f64> {
        self.eval(&[r])
    }

    /// Upper bound on the Lipschitz constant (euclidean metric) for
    /// expressions in the auditable fragment {+, -, max, min, abs, pos,
    /// scalar multiples, variables, constants}; `None` outside it.
    pub fn lipschitz_bound(&self) -> Option<f64> {
        lipschitz(&self.root)
    }
}

impl std::fmt::Display for PayoffExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", print_expr(&self.root, 0))
    }
}

fn eval_expr(e: &Expr, point: &[f64]) -> Result<f64> {
    let eval_err = |sub: &Expr, context: &str| Error::Eval {
        subexpr: print_expr(sub, 0),
        context: context.into(),
    };
    Ok(match e {
        Expr::Const(v) => *v,
        Expr::Var(i) => point[*i],
        Expr::Neg(a) => -eval_expr(a, point)?,
        Expr::Add(a, b) => eval_expr(a, point)? + eval_expr(b, point)?,
        Expr::Sub(a, b) => eval_expr(a, point)? - eval_expr(b, point)?,
        Expr::Mul(a, b) => eval_expr(a, point)? * eval_expr(b, point)?,
        Expr::Div(a, b) => {
            let d = eval_expr(b, point)?;
            if d == 0.0 {
                return Err(eval_err(e, "division by zero"));
            }
            eval_expr(a, point)? / d
        }
        Expr::Pow(a, p) => {
            let v = eval_expr(a, point)?.powf(*p);
            if v.is_nan() {
                return Err(eval_err(e, "power of a negative base"));
            }
            v
        }
        Expr::Abs(a) => eval_expr(a, point)?.abs(),
        Expr::Max(a, b) => eval_expr(a, point)?.max(eval_expr(b, point)?),
        Expr::Min(a, b) => eval_expr(a, point)?.min(eval_expr(b, point)?),
        Expr::Pos(a) => eval_expr(a, point)?.max(0.0),
        Expr::Sqrt { arg, guarded } => {
            let v = eval_expr(arg, point)?;
            if v < 0.0 {
                if *guarded {
                    0.0
                } else {
                    return Err(eval_err(e, "sqrt of a negative value"));
                }
            } else {
                v.sqrt()
            }
        }
        Expr::Exp(a) => eval_expr(a, point)?.exp(),
        Expr::Log(a) => {
            let v = eval_expr(a, point)?;
            if v <= 0.0 {
                return Err(eval_err(e, "log of a nonpositive value"));
            }
            v.ln()
        }
        Expr::Ind { lhs, op, rhs } => {
            let l = eval_expr(lhs, point)?;
            let r = eval_expr(rhs, point)?;
            let hit = match op {
                CmpOp::Le => l <= r,
                CmpOp::Lt => l < r,
                CmpOp::Ge => l >= r,
                CmpOp::Gt => l > r,
                CmpOp::Eq => l == r,
            };
            if hit {
                1.0
            } else {
                0.0
            }
        }
    })
}

// precedence levels for minimal-paren printing
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        _ => 5,
    }
}

fn print_expr(e: &Expr, parent: u8) -> String {
    let me = prec(e);
    let body = match e {
        Expr::Const(v) => format!("{v}"),
        Expr::Var(i) => format!("__v{i}"),
        Expr::Neg(a) => format!("-{}", print_expr(a, me)),
        Expr::Add(a, b) => format!("{}+{}", print_expr(a, me), print_expr(b, me + 1)),
        Expr::Sub(a, b) => format!("{}-{}", print_expr(a, me), print_expr(b, me + 1)),
        Expr::Mul(a, b) => format!("{}*{}", print_expr(a, me), print_expr(b, me + 1)),
        Expr::Div(a, b) => format!("{}/{}", print_expr(a, me), print_expr(b, me + 1)),
        Expr::Pow(a, p) => format!("{}^{p}", print_expr(a, me + 1)),
        Expr::Abs(a) => format!("abs({})", print_expr(a, 0)),
        Expr::Max(a, b) => format!("max({},{})", print_expr(a, 0), print_expr(b, 0)),
        Expr::Min(a, b) => format!("min({},{})", print_expr(a, 0), print_expr(b, 0)),
        Expr::Pos(a) => format!("pos({})", print_expr(a, 0)),
        Expr::Sqrt { arg, .. } => format!("sqrt({})", print_expr(arg, 0)),
        Expr::Exp(a) => format!("exp({})", print_expr(a, 0)),
        Expr::Log(a) => format!("log({})", print_expr(a, 0)),
        Expr::Ind { lhs, op, rhs } => format!(
            "ind({}{}{})",
            print_expr(lhs, 0),
            op.as_str(),
            print_expr(rhs, 0)
        ),
    };
    if me < parent {
        format!("({body})")
    } else {
        body
    }
}

fn lipschitz(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(_) => Some(0.0),
        Expr::Var(_) => Some(1.0),
        Expr::Neg(a) | Expr::Abs(a) | Expr::Pos(a) => lipschitz(a),
        Expr::Add(a, b) | Expr::Sub(a, b) => Some(lipschitz(a)? + lipschitz(b)?),
        Expr::Max(a, b) | Expr::Min(a, b) => Some(lipschitz(a)?.max(lipschitz(b)?)),
        Expr::Mul(a, b) => match (constant_of(a), constant_of(b)) {
            (Some(c), _) => Some(c.abs() * lipschitz(b)?),
            (_, Some(c)) => Some(c.abs() * lipschitz(a)?),
            _ => None,
        },
        Expr::Div(a, b) => {
            let c = constant_of(b)?;
            if c == 0.0 {
                None
            } else {
                Some(lipschitz(a)? / c.abs())
            }
        }
        _ => None,
    }
}

fn constant_of(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(v) => Some(*v),
        Expr::Neg(a) => constant_of(a).map(|v| -v),
        _ => None,
    }
}

/// Replaces the `__v{i}` placeholders of the internal printer with the
/// declared variable names.
impl PayoffExpr {
    pub fn pretty(&self) -> String {
        let mut s = print_expr(&self.root, 0);
        for i in (0..self.arity()).rev() {
            let name = if self.periods > 1 {
                format!("x{}", i + 1)
            } else if self.dim == 1 {
                "r".to_string()
            } else {
                format!("r{}", i + 1)
            };
            s = s.replace(&format!("__v{i}"), &name);
        }
        s
    }
}
