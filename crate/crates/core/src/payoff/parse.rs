//! Lexer and recursive-descent parser for payoff expressions.
//!
//! Grammar:
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | factor
//! factor := atom ['^' number]
//! atom   := number | var | '(' expr ')' | func '(' args ')' | '|' expr '|'
//! func   := max | min | abs | pos | sqrt | exp | log | ind
//! ```
//! `ind` takes a comparison `expr cmp expr` with `cmp` one of
//! `<=, <, >=, >, ==`. Precedence: `^` > unary `-` > `* /` > `+ -`.

use super::{CmpOp, Expr};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Pipe,
    Cmp(CmpOp),
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let mut toks = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            '*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            '^' => {
                toks.push((Tok::Caret, i));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            ',' => {
                toks.push((Tok::Comma, i));
                i += 1;
            }
            '|' => {
                toks.push((Tok::Pipe, i));
                i += 1;
            }
            '<' | '>' | '=' => {
                let two = &text[i..(i + 2).min(text.len())];
                let (op, len) = match two {
                    "<=" => (CmpOp::Le, 2),
                    ">=" => (CmpOp::Ge, 2),
                    "==" => (CmpOp::Eq, 2),
                    _ if c == '<' => (CmpOp::Lt, 1),
                    _ if c == '>' => (CmpOp::Gt, 1),
                    _ => {
                        return Err(Error::Parse {
                            position: i,
                            context: "single `=` (use `==`)".into(),
                        })
                    }
                };
                toks.push((Tok::Cmp(op), i));
                i += len;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit() || bytes[i] == b'.' || bytes[i] == b'e' || bytes[i] == b'E'
                        || ((bytes[i] == b'+' || bytes[i] == b'-')
                            && i > start
                            && (bytes[i - 1] == b'e' || bytes[i - 1] == b'E')))
                {
                    i += 1;
                }
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| Error::Parse {
                    position: start,
                    context: format!("bad number literal `{lit}`"),
                })?;
                toks.push((Tok::Num(v), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::Parse {
                    position: i,
                    context: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(toks)
}

pub(super) struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    dim: usize,
    periods: usize,
    text: &'a str,
}

impl<'a> Parser<'a> {
    pub(super) fn new(text: &'a str, dim: usize, periods: usize) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Parse { position: 0, context: "empty payoff text".into() });
        }
        Ok(Self { toks: lex(text)?, pos: 0, dim, periods, text })
    }

    pub(super) fn parse(mut self) -> Result<Expr> {
        let e = self.expr()?;
        if self.pos != self.toks.len() {
            return Err(self.err("trailing input"));
        }
        Ok(e)
    }

    fn err(&self, msg: &str) -> Error {
        let position = self
            .toks
            .get(self.pos)
            .map_or(self.text.len(), |(_, p)| *p);
        Error::Parse { position, context: msg.into() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(what))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.factor()
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let neg = if self.peek() == Some(&Tok::Minus) {
                self.pos += 1;
                true
            } else {
                false
            };
            match self.bump() {
                Some(Tok::Num(v)) => {
                    Ok(Expr::Pow(Box::new(base), if neg { -v } else { v }))
                }
                _ => Err(self.err("exponent must be a number literal")),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Const(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "expected `)`")?;
                Ok(e)
            }
            Some(Tok::Pipe) => {
                let e = self.expr()?;
                self.expect(Tok::Pipe, "expected closing `|`")?;
                Ok(Expr::Abs(Box::new(e)))
            }
            Some(Tok::Ident(name)) => self.ident(name),
            _ => Err(self.err("expected a number, variable, `(` or function")),
        }
    }

    fn ident(&mut self, name: String) -> Result<Expr> {
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            return self.call(&name);
        }
        self.variable(&name)
    }

    fn variable(&self, name: &str) -> Result<Expr> {
        // r (d = 1, one period), r1..rd (one period), x1..xT (d = 1,
        // multiperiod)
        if self.periods == 1 {
            if name == "r" {
                if self.dim != 1 {
                    return Err(self.err(&format!("`r` is ambiguous in dimension {}", self.dim)));
                }
                return Ok(Expr::Var(0));
            }
            if let Some(idx) = name.strip_prefix('r').and_then(|s| s.parse::<usize>().ok()) {
                if idx >= 1 && idx <= self.dim {
                    return Ok(Expr::Var(idx - 1));
                }
                return Err(self.err(&format!("variable `{name}` outside declared dimension {}", self.dim)));
            }
        } else if let Some(idx) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
            if idx >= 1 && idx <= self.periods {
                return Ok(Expr::Var(idx - 1));
            }
            return Err(self.err(&format!("variable `{name}` outside declared periods {}", self.periods)));
        }
        Err(self.err(&format!("unknown identifier `{name}`")))
    }

    fn call(&mut self, name: &str) -> Result<Expr> {
        let expr = match name {
            "max" | "min" => {
                let a = self.expr()?;
                self.expect(Tok::Comma, "expected `,` (two arguments)")?;
                let b = self.expr()?;
                if name == "max" {
                    Expr::Max(Box::new(a), Box::new(b))
                } else {
                    Expr::Min(Box::new(a), Box::new(b))
                }
            }
            "abs" => Expr::Abs(Box::new(self.expr()?)),
            "pos" => Expr::Pos(Box::new(self.expr()?)),
            "sqrt" => Expr::Sqrt { arg: Box::new(self.expr()?), guarded: false },
            "exp" => Expr::Exp(Box::new(self.expr()?)),
            "log" => Expr::Log(Box::new(self.expr()?)),
            "ind" => {
                let lhs = self.expr()?;
                let op = match self.bump() {
                    Some(Tok::Cmp(op)) => op,
                    _ => return Err(self.err("ind() needs a comparison (<=, <, >=, >, ==)")),
                };
                let rhs = self.expr()?;
                Expr::Ind { lhs: Box::new(lhs), op, rhs: Box::new(rhs) }
            }
            _ => return Err(self.err(&format!("unknown function `{name}`"))),
        };
        self.expect(Tok::RParen, "expected `)`")?;
        Ok(expr)
    }
}
