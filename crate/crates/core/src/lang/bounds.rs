// Interval bounds per node: the domain is cut into SUBDIVISIONS pieces; on each piece every
// node gets a natural interval extension and an interval derivative, and nodes whose
// derivative has constant sign are tightened to their exact endpoint values.

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};

use super::{Expr, ExprKind, Span};
use crate::interval::Interval;
use crate::rational::{format_rational, int, Rational};

pub const SUBDIVISIONS: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Note,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: Span,
    pub message: String,
    #[serde(serialize_with = "ser_interval")]
    pub interval: Option<Interval>,
}

fn ser_interval<S: serde::Serializer>(iv: &Option<Interval>, s: S) -> Result<S::Ok, S::Error> {
    use serde::Serialize;
    iv.as_ref().map(|i| i.to_strings()).serialize(s)
}

impl Diagnostic {
    /// One-line rendering with a caret line under the offending span.
    pub fn render(&self, text: &str) -> String {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Note => "note",
        };
        let iv = self.interval.as_ref().map(|i| format!(" (interval {i})")).unwrap_or_default();
        let start = self.span.start.min(text.len());
        let width = self.span.end.saturating_sub(self.span.start).max(1);
        format!("{sev}: {}{iv}\n  {text}\n  {}{}", self.message, " ".repeat(start), "^".repeat(width))
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub domain: Interval,
    /// Certified range of the whole expression, when defined.
    pub root: Option<Interval>,
    pub diagnostics: Vec<Diagnostic>,
    intervals: HashMap<(usize, usize), Option<Interval>>,
}

impl Analysis {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }

    /// Interval of a node; `None` if a division inside it may hit zero.
    pub fn interval(&self, e: &Expr) -> Option<&Interval> {
        self.intervals.get(&(e.span.start, e.span.end)).and_then(|o| o.as_ref())
    }
}

type Piece = Option<(Interval, Interval)>;

fn eval_piece(e: &Expr, x: &Interval, out: &mut HashMap<(usize, usize), Option<Interval>>) -> Piece {
    let zero = Interval::point(Rational::zero());
    let natural: Piece = match &e.kind {
        ExprKind::Number(r) => Some((Interval::point(r.clone()), zero)),
        ExprKind::Var => Some((x.clone(), Interval::point(Rational::one()))),
        ExprKind::Paren(a) => eval_piece(a, x, out),
        ExprKind::Add(a, b) | ExprKind::Sub(a, b) | ExprKind::Mul(a, b) | ExprKind::Div(a, b) => {
            let ra = eval_piece(a, x, out);
            let rb = eval_piece(b, x, out);
            match (ra, rb) {
                (Some((va, da)), Some((vb, db))) => match &e.kind {
                    ExprKind::Add(..) => Some((va.add(&vb), da.add(&db))),
                    ExprKind::Sub(..) => Some((va.sub(&vb), da.sub(&db))),
                    ExprKind::Mul(..) => Some((va.mul(&vb), da.mul(&vb).add(&va.mul(&db)))),
                    _ => va.div(&vb).map(|q| {
                        let num = da.mul(&vb).sub(&va.mul(&db));
                        let d = num.div(&vb.powi(2)).expect("square of a zero-free interval");
                        (q, d)
                    }),
                },
                _ => None,
            }
        }
        ExprKind::Pow(a, k) => eval_piece(a, x, out).map(|(v, d)| {
            if *k == 0 {
                (Interval::point(Rational::one()), zero.clone())
            } else {
                let dv = v.powi(k - 1).scale(&int(*k)).mul(&d);
                (v.powi(*k), dv)
            }
        }),
    };
    let refined = natural.map(|(v, d)| {
        let v = if !d.lo.is_negative() || !d.hi.is_positive() {
            match (e.eval(&x.lo), e.eval(&x.hi)) {
                (Some(a), Some(b)) => Interval::new(a.clone().min(b.clone()), a.max(b)),
                _ => v,
            }
        } else {
            v
        };
        (v, d)
    });
    let key = (e.span.start, e.span.end);
    let merged = match (out.get(&key), &refined) {
        (None, Some((v, _))) => Some(v.clone()),
        (Some(Some(old)), Some((v, _))) => Some(old.hull(v)),
        _ => None,
    };
    out.insert(key, merged);
    refined
}

/// Per-node intervals over `domain`.
pub(crate) fn node_intervals(e: &Expr, domain: &Interval) -> HashMap<(usize, usize), Option<Interval>> {
    let mut out = HashMap::new();
    let pieces = if domain.is_point() { vec![domain.clone()] } else { domain.split(SUBDIVISIONS) };
    for piece in pieces {
        eval_piece(e, &piece, &mut out);
    }
    out
}

/// Certified enclosure of the expression's values on `x`.
pub fn expr_interval(e: &Expr, x: &Interval) -> Option<Interval> {
    node_intervals(e, x).remove(&(e.span.start, e.span.end)).flatten()
}

/// Coefficients `(n0, n1, d0, d1)` of `N/D` with `N = n0 (1-p) + n1 p`, `D = d0 (1-p) + d1 p`,
/// when both sides are affine and `0 <= n_x <= d_x`, `d_x > 0`.
pub(crate) fn mobius_form(num: &Expr, den: &Expr) -> Option<[Rational; 4]> {
    let n = num.as_affine()?;
    let d = den.as_affine()?;
    let n0 = n.c0.clone();
    let n1 = &n.c0 + &n.c1;
    let d0 = d.c0.clone();
    let d1 = &d.c0 + &d.c1;
    let ok = d0.is_positive() && d1.is_positive() && !n0.is_negative() && !n1.is_negative() && n0 <= d0 && n1 <= d1;
    ok.then_some([n0, n1, d0, d1])
}

struct Checker<'a> {
    iv: &'a HashMap<(usize, usize), Option<Interval>>,
    diags: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn get(&self, e: &Expr) -> Option<Interval> {
        self.iv.get(&(e.span.start, e.span.end)).cloned().flatten()
    }

    fn error(&mut self, e: &Expr, msg: String, iv: Option<Interval>) {
        self.diags.push(Diagnostic { severity: Severity::Error, span: e.span, message: msg, interval: iv });
    }

    fn note(&mut self, e: &Expr, msg: String, iv: Option<Interval>) {
        self.diags.push(Diagnostic { severity: Severity::Note, span: e.span, message: msg, interval: iv });
    }

    fn scaled(&mut self, e: &Expr, g: &Expr, c: Rational, v: &Interval) {
        let one = Rational::one();
        self.walk(g, true);
        if c.is_negative() {
            self.error(e, "negative scalar".into(), Some(v.clone()));
        } else if c > one {
            if v.hi >= one {
                self.error(e, "scaled value may reach 1".into(), Some(v.clone()));
            } else {
                self.note(e, format!("scaling margin {}", format_rational(&(&one - &v.hi))), Some(v.clone()));
            }
        }
    }

    /// `coin`: the node is realised as a coin and must stay in [0, 1].
    fn walk(&mut self, e: &Expr, coin: bool) {
        if let Some(c) = e.constant_value() {
            if coin && (c.is_negative() || c > Rational::one()) {
                self.error(e, format!("constant {} is not a probability", format_rational(&c)), None);
            }
            return;
        }
        if !e.has_var() {
            self.error(e, "division by zero in a constant".into(), None);
            return;
        }
        let Some(v) = self.get(e) else {
            self.error(e, "a denominator may vanish on the domain".into(), None);
            return;
        };
        let one = Rational::one();
        match &e.kind {
            ExprKind::Number(_) | ExprKind::Var => {}
            ExprKind::Paren(a) => return self.walk(a, coin),
            ExprKind::Add(a, b) => {
                self.walk(a, true);
                self.walk(b, true);
                if v.hi >= one {
                    self.error(e, "sum may reach 1".into(), Some(v.clone()));
                } else {
                    self.note(e, format!("sum margin {}", format_rational(&(&one - &v.hi))), Some(v.clone()));
                }
            }
            ExprKind::Sub(a, b) => {
                self.walk(a, true);
                self.walk(b, true);
                if !v.lo.is_positive() {
                    self.error(e, "difference may reach 0".into(), Some(v.clone()));
                } else {
                    self.note(e, format!("difference margin {}", format_rational(&v.lo)), Some(v.clone()));
                }
            }
            ExprKind::Div(a, b) if b.constant_value().is_some_and(|c| c.is_positive()) => {
                let c = b.constant_value().expect("constant").recip();
                self.scaled(e, a, c, &v);
            }
            ExprKind::Mul(a, b) => {
                let (c, g) = match (a.constant_value(), b.constant_value()) {
                    (Some(c), _) => (Some(c), b),
                    (_, Some(c)) => (Some(c), a),
                    _ => (None, a),
                };
                match c {
                    Some(c) => self.scaled(e, g, c, &v),
                    None => {
                        self.walk(a, true);
                        self.walk(b, true);
                    }
                }
            }
            ExprKind::Div(a, b) => {
                let den = self.get(b);
                match &den {
                    Some(d) if d.lo.is_positive() => {}
                    _ => {
                        self.error(b, "denominator may be 0 or negative".into(), den.clone());
                        return;
                    }
                }
                if v.hi >= one {
                    self.error(e, "quotient may reach 1".into(), Some(v.clone()));
                }
                if v.lo.is_negative() {
                    self.error(e, "quotient may be negative".into(), Some(v.clone()));
                }
                if mobius_form(a, b).is_some() {
                    self.note(e, "ratio of affine functions; simulated by a rejection race".into(), Some(v.clone()));
                } else {
                    self.walk(a, true);
                    self.walk(b, true);
                }
            }
            ExprKind::Pow(a, _) => self.walk(a, true),
        }
        if coin && (v.lo.is_negative() || v.hi > one) {
            self.error(e, "value leaves [0, 1]".into(), Some(v));
        }
    }
}

/// Interval bounds for every node plus diagnostics for the margin conditions the
/// combinators need.
pub fn analyze_bounds(e: &Expr, domain: &Interval) -> Analysis {
    let iv = node_intervals(e, domain);
    let mut ck = Checker { iv: &iv, diags: Vec::new() };
    if !domain.lo.is_positive() || domain.hi >= Rational::one() {
        ck.error(e, "domain must lie inside (0, 1)".into(), Some(domain.clone()));
    }
    ck.walk(e, true);
    let diagnostics = ck.diags;
    let root = iv.get(&(e.span.start, e.span.end)).cloned().flatten();
    Analysis { domain: domain.clone(), root, diagnostics, intervals: iv }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::rational::rat;

    fn dom(a: Rational, b: Rational) -> Interval {
        Interval::new(a, b)
    }

    #[test]
    fn sum_interval() {
        let a = analyze_bounds(&parse("p + 1/5").unwrap(), &dom(rat(1, 10), rat(2, 5)));
        assert_eq!(a.root.clone().unwrap(), dom(rat(3, 10), rat(3, 5)));
        assert!(!a.has_errors());
        assert!(a.diagnostics.iter().any(|d| d.message == "sum margin 2/5"));
    }

    #[test]
    fn doubled_p() {
        let a = analyze_bounds(&parse("p + p").unwrap(), &dom(rat(1, 10), rat(9, 20)));
        assert_eq!(a.root.clone().unwrap().hi, rat(9, 10));
        assert!(!a.has_errors());
        let a = analyze_bounds(&parse("p + p").unwrap(), &dom(rat(1, 10), rat(1, 2)));
        assert_eq!(a.root.clone().unwrap().hi, rat(1, 1));
        assert!(a.has_errors());
    }

    #[test]
    fn quotient_is_tight() {
        let a = analyze_bounds(&parse("p / (p + 1/5)").unwrap(), &dom(rat(1, 10), rat(2, 5)));
        assert_eq!(a.root.clone().unwrap(), dom(rat(1, 3), rat(2, 3)));
        assert!(!a.has_errors());
    }

    #[test]
    fn non_monotone_still_encloses() {
        let e = parse("p * (1 - p)").unwrap();
        let r = analyze_bounds(&e, &dom(rat(1, 10), rat(9, 10))).root.unwrap();
        assert!(r.contains(&rat(1, 4)));
        assert!(r.hi <= rat(26, 100));
    }

    #[test]
    fn vanishing_denominator() {
        let a = analyze_bounds(&parse("p / (p - 1/5)").unwrap(), &dom(rat(1, 10), rat(2, 5)));
        assert!(a.has_errors());
    }

    #[test]
    fn constants_outside_unit() {
        assert!(analyze_bounds(&parse("2 - p").unwrap(), &dom(rat(1, 10), rat(2, 5))).has_errors());
        assert!(!analyze_bounds(&parse("1/(2 - p)").unwrap(), &dom(rat(1, 10), rat(2, 5))).has_errors());
        assert!(!analyze_bounds(&parse("3/2 * p").unwrap(), &dom(rat(1, 10), rat(2, 5))).has_errors());
        assert!(analyze_bounds(&parse("3 * p").unwrap(), &dom(rat(1, 10), rat(2, 5))).has_errors());
        assert!(!analyze_bounds(&parse("p^2 / 2").unwrap(), &dom(rat(1, 10), rat(2, 5))).has_errors());
    }
}
