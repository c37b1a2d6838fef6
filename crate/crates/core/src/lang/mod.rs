//! Arithmetic expressions in `p`: parsing, exact evaluation, interval bounds and compilation
//! into factory plans.

mod bounds;
mod compile;
mod parser;

use std::fmt;

use num_traits::{One, Zero};

use crate::rational::{format_rational, Rational};

pub use bounds::{analyze_bounds, expr_interval, Analysis, Diagnostic, Severity, SUBDIVISIONS};
pub use compile::{compile_text, compile_to_plan, CompileError};
pub use parser::{parse, SyntaxError};

/// Byte range `[start, end)` in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Number(Rational),
    Var,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Paren(Box<Expr>),
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

/// Structural equality; spans are ignored.
impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        use ExprKind::*;
        match (&self.kind, &other.kind) {
            (Number(a), Number(b)) => a == b,
            (Var, Var) => true,
            (Add(a, b), Add(c, d)) | (Sub(a, b), Sub(c, d)) | (Mul(a, b), Mul(c, d)) | (Div(a, b), Div(c, d)) => {
                a == c && b == d
            }
            (Pow(a, e), Pow(b, f)) => e == f && a == b,
            (Paren(a), Paren(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Number(r) => f.write_str(&format_rational(r)),
            ExprKind::Var => f.write_str("p"),
            ExprKind::Add(a, b) => write!(f, "{a} + {b}"),
            ExprKind::Sub(a, b) => write!(f, "{a} - {b}"),
            ExprKind::Mul(a, b) => write!(f, "{a} * {b}"),
            ExprKind::Div(a, b) => write!(f, "{a} / {b}"),
            ExprKind::Pow(a, e) => write!(f, "{a}^{e}"),
            ExprKind::Paren(a) => write!(f, "({a})"),
        }
    }
}

/// Polynomial of degree <= 1 in p: `c0 + c1 p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Affine {
    pub c0: Rational,
    pub c1: Rational,
}

impl Expr {
    pub fn has_var(&self) -> bool {
        match &self.kind {
            ExprKind::Number(_) => false,
            ExprKind::Var => true,
            ExprKind::Add(a, b) | ExprKind::Sub(a, b) | ExprKind::Mul(a, b) | ExprKind::Div(a, b) => {
                a.has_var() || b.has_var()
            }
            ExprKind::Pow(a, _) | ExprKind::Paren(a) => a.has_var(),
        }
    }

    /// Exact value at `p`; `None` on division by zero.
    pub fn eval(&self, p: &Rational) -> Option<Rational> {
        Some(match &self.kind {
            ExprKind::Number(r) => r.clone(),
            ExprKind::Var => p.clone(),
            ExprKind::Add(a, b) => a.eval(p)? + b.eval(p)?,
            ExprKind::Sub(a, b) => a.eval(p)? - b.eval(p)?,
            ExprKind::Mul(a, b) => a.eval(p)? * b.eval(p)?,
            ExprKind::Div(a, b) => {
                let d = b.eval(p)?;
                if d.is_zero() {
                    return None;
                }
                a.eval(p)? / d
            }
            ExprKind::Pow(a, e) => num_traits::pow(a.eval(p)?, *e as usize),
            ExprKind::Paren(a) => a.eval(p)?,
        })
    }

    /// Value of a variable-free expression.
    pub fn constant_value(&self) -> Option<Rational> {
        if self.has_var() {
            None
        } else {
            self.eval(&Rational::zero())
        }
    }

    /// The expression as `c0 + c1 p` when it is affine in p.
    pub fn as_affine(&self) -> Option<Affine> {
        if let Some(c) = self.constant_value() {
            return Some(Affine { c0: c, c1: Rational::zero() });
        }
        match &self.kind {
            ExprKind::Var => Some(Affine { c0: Rational::zero(), c1: Rational::one() }),
            ExprKind::Paren(a) => a.as_affine(),
            ExprKind::Add(a, b) => {
                let (x, y) = (a.as_affine()?, b.as_affine()?);
                Some(Affine { c0: x.c0 + y.c0, c1: x.c1 + y.c1 })
            }
            ExprKind::Sub(a, b) => {
                let (x, y) = (a.as_affine()?, b.as_affine()?);
                Some(Affine { c0: x.c0 - y.c0, c1: x.c1 - y.c1 })
            }
            ExprKind::Mul(a, b) => {
                let (x, y) = (a.as_affine()?, b.as_affine()?);
                if x.c1.is_zero() {
                    Some(Affine { c0: &x.c0 * &y.c0, c1: &x.c0 * &y.c1 })
                } else if y.c1.is_zero() {
                    Some(Affine { c0: &x.c0 * &y.c0, c1: &x.c1 * &y.c0 })
                } else {
                    None
                }
            }
            ExprKind::Div(a, b) => {
                let d = b.constant_value()?;
                if d.is_zero() {
                    return None;
                }
                let x = a.as_affine()?;
                Some(Affine { c0: &x.c0 / &d, c1: &x.c1 / &d })
            }
            ExprKind::Pow(a, 1) => a.as_affine(),
            ExprKind::Pow(_, 0) => Some(Affine { c0: Rational::one(), c1: Rational::zero() }),
            _ => None,
        }
    }

    /// Strips redundant parentheses.
    pub fn unparen(&self) -> &Expr {
        match &self.kind {
            ExprKind::Paren(a) => a.unparen(),
            _ => self,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn eval_and_affine() {
        let e = parse("p / (p + 1/5)").unwrap();
        assert_eq!(e.eval(&rat(1, 5)).unwrap(), rat(1, 2));
        if let ExprKind::Div(a, b) = &e.kind {
            assert_eq!(a.as_affine().unwrap(), Affine { c0: rat(0, 1), c1: rat(1, 1) });
            assert_eq!(b.as_affine().unwrap(), Affine { c0: rat(1, 5), c1: rat(1, 1) });
        } else {
            panic!("not a division");
        }
        assert!(parse("p*p").unwrap().as_affine().is_none());
        assert_eq!(parse("(3*p - 1)/2").unwrap().as_affine().unwrap(), Affine { c0: rat(-1, 2), c1: rat(3, 2) });
        assert!(parse("1/(p-p)").unwrap().eval(&rat(1, 2)).is_none());
    }
}
