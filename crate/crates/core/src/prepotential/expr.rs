use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jets::CJet3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }
}

/// Expression tree. Variables are zero-based (`w1` is `Var(0)`).
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(Complex64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Evaluates on jets; every input must share the same variable count
    /// and order.
    pub fn eval(&self, inputs: &[CJet3]) -> Result<CJet3> {
        let like = &inputs[0];
        Ok(match self {
            Expr::Num(c) => CJet3::constant(*c, like.nvars(), like.order()),
            Expr::Var(j) => inputs[*j].clone(),
            Expr::Neg(a) => -a.eval(inputs)?,
            Expr::Add(a, b) => a.eval(inputs)? + b.eval(inputs)?,
            Expr::Sub(a, b) => a.eval(inputs)? - b.eval(inputs)?,
            Expr::Mul(a, b) => a.eval(inputs)? * b.eval(inputs)?,
            Expr::Div(a, b) => a.eval(inputs)?.checked_div(&b.eval(inputs)?)?,
            Expr::Pow(a, k) => a.eval(inputs)?.powi(i64::from(*k))?,
            Expr::Call(f, a) => {
                let arg = a.eval(inputs)?;
                match f {
                    Func::Exp => arg.exp(),
                    Func::Log => arg.ln()?,
                    Func::Sqrt => arg.sqrt()?,
                }
            }
        })
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(j) => Some(*j),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_var().max(b.max_var())
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(c) if c.im != 0.0 && c.re != 0.0 => 0,
            Expr::Num(c) if c.re < 0.0 || c.im < 0.0 => 0,
            Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, c: Complex64) -> fmt::Result {
    match (c.re, c.im) {
        (re, 0.0) => {
            if re < 0.0 {
                write!(f, "(-{})", -re)
            } else {
                write!(f, "{re}")
            }
        }
        (0.0, im) => match im {
            1.0 => f.write_str("i"),
            -1.0 => f.write_str("(-i)"),
            im if im < 0.0 => write!(f, "(-{}*i)", -im),
            im => write!(f, "{im}*i"),
        },
        (re, im) => {
            let sign = if im < 0.0 { '-' } else { '+' };
            write!(f, "({re}{sign}{}*i)", im.abs())
        }
    }
}

/// Canonical printer: minimal parentheses such that re-parsing yields the
/// same tree (binary operators are left-associative).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let child = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Num(c) => write_num(f, *c),
            Expr::Var(j) => write!(f, "w{}", j + 1),
            Expr::Neg(a) => {
                f.write_str("-")?;
                child(f, a, 3)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                child(f, a, 1)?;
                f.write_str(if matches!(self, Expr::Add(..)) { "+" } else { "-" })?;
                child(f, b, 2)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                child(f, a, 2)?;
                f.write_str(if matches!(self, Expr::Mul(..)) { "*" } else { "/" })?;
                child(f, b, 3)
            }
            Expr::Pow(a, k) => {
                child(f, a, 5)?;
                write!(f, "^{k}")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// A parsed holomorphic prepotential of `n` complex variables.
#[derive(Clone, Debug, PartialEq)]
pub struct PrepotentialExpr {
    ast: Expr,
    n: usize,
}

impl PrepotentialExpr {
    pub fn new(ast: Expr, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Arity("a prepotential needs at least one variable".into()));
        }
        if let Some(j) = ast.max_var() {
            if j >= n {
                return Err(Error::UnknownVariable {
                    name: format!("w{}", j + 1),
                    offset: 0,
                    n,
                });
            }
        }
        Ok(PrepotentialExpr { ast, n })
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Holomorphic jet of order `order` at `w`.
    pub fn holo_jet(&self, w: &[Complex64], order: u8) -> Result<CJet3> {
        if w.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: w.len(),
            });
        }
        let vars: Vec<CJet3> = w
            .iter()
            .enumerate()
            .map(|(j, &wj)| CJet3::variable(wj, j, self.n, order))
            .collect();
        self.ast.eval(&vars)
    }

    pub fn value(&self, w: &[Complex64]) -> Result<Complex64> {
        Ok(self.holo_jet(w, 0)?.value())
    }

    /// Evaluates on arbitrary jet inputs (one per variable), e.g. to
    /// differentiate 𝓕 along a real parametrization.
    pub fn eval_jets(&self, inputs: &[CJet3]) -> Result<CJet3> {
        if inputs.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: inputs.len(),
            });
        }
        self.ast.eval(inputs)
    }
}

impl fmt::Display for PrepotentialExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.ast.fmt(f)
    }
}
