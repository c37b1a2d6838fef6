use num_traits::{One, Signed, Zero};

use super::bounds::mobius_form;
use super::{analyze_bounds, parse, Diagnostic, Expr, ExprKind, Severity, SyntaxError};
use crate::combinators::{
    constant_plan, difference_plan, identity, mobius_plan, product, quotient_plan, scalar_mul_plan, sum_plan, Backend,
    FactoryPlan, PlanError,
};
use crate::interval::Interval;
use crate::rational::{format_rational, Rational};

#[derive(Debug, thiserror::Error)]
pub enum CompileError {
    #[error("syntax error: {0}")]
    Syntax(#[from] SyntaxError),
    #[error("compilation blocked by {} error(s)", .0.iter().filter(|d| d.severity == Severity::Error).count())]
    Blocked(Vec<Diagnostic>),
    #[error(transparent)]
    Plan(PlanError),
}

struct Compiler<'a> {
    domain: &'a Interval,
    backend: Option<Backend>,
}

fn blocked(e: &Expr, message: String, interval: Option<Interval>) -> CompileError {
    CompileError::Blocked(vec![Diagnostic { severity: Severity::Error, span: e.span, message, interval }])
}

impl Compiler<'_> {
    /// Margin failures found while building become diagnostics at `e`.
    fn lift(&self, e: &Expr, r: Result<FactoryPlan, PlanError>) -> Result<FactoryPlan, CompileError> {
        r.map_err(|err| match err {
            PlanError::MarginViolated(m) | PlanError::DivergenceRisk(m) => blocked(e, m, None),
            other => CompileError::Plan(other),
        })
    }

    fn scale(&self, e: &Expr, a: Rational, g: &Expr) -> Result<FactoryPlan, CompileError> {
        let child = self.plan(g)?;
        if a.is_one() {
            return Ok(child);
        }
        if a < Rational::one() {
            let c = self.lift(e, constant_plan(a))?;
            return self.lift(e, product(c, child));
        }
        let margin = Rational::one() - &a * &child.range().hi;
        if !margin.is_positive() {
            let iv = child.range().scale(&a);
            return Err(blocked(e, "scaled value may reach 1".into(), Some(iv)));
        }
        self.lift(e, scalar_mul_plan(a, child, margin, self.backend))
    }

    fn plan(&self, e: &Expr) -> Result<FactoryPlan, CompileError> {
        if let Some(c) = e.constant_value() {
            return self.lift(e, constant_plan(c));
        }
        match &e.kind {
            ExprKind::Number(_) => unreachable!("numbers are constant"),
            ExprKind::Var => self.lift(e, identity(self.domain.clone())),
            ExprKind::Paren(a) => self.plan(a),
            ExprKind::Add(a, b) => {
                let (l, r) = (self.plan(a)?, self.plan(b)?);
                let eps = Rational::one() - &l.range().hi - &r.range().hi;
                if !eps.is_positive() {
                    return Err(blocked(e, "sum may reach 1".into(), Some(l.range().add(r.range()))));
                }
                self.lift(e, sum_plan(l, r, eps, self.backend))
            }
            ExprKind::Sub(a, b) => {
                let (l, r) = (self.plan(a)?, self.plan(b)?);
                let margin = &l.range().lo - &r.range().hi;
                if !margin.is_positive() {
                    return Err(blocked(e, "difference may reach 0".into(), Some(l.range().sub(r.range()))));
                }
                self.lift(e, difference_plan(l, r, margin, self.backend))
            }
            ExprKind::Mul(a, b) => match (a.constant_value(), b.constant_value()) {
                (Some(c), _) => self.scale(e, c, b),
                (_, Some(c)) => self.scale(e, c, a),
                _ => {
                    let (l, r) = (self.plan(a)?, self.plan(b)?);
                    self.lift(e, product(l, r))
                }
            },
            ExprKind::Div(a, b) => {
                if let Some(c) = b.constant_value() {
                    if c.is_zero() {
                        return Err(blocked(e, "division by zero".into(), None));
                    }
                    return self.scale(e, c.recip(), a);
                }
                if let Some([n0, n1, d0, d1]) = mobius_form(a, b) {
                    let id = self.lift(e, identity(self.domain.clone()))?;
                    return self.lift(e, mobius_plan(id, (&n1 - &n0, n0), (&d1 - &d0, d0)));
                }
                let (f, g) = (self.plan(a)?, self.plan(b)?);
                let glo = g.range().lo.clone().min(g.actual_range().lo.clone());
                if !glo.is_positive() {
                    return Err(blocked(b, "denominator may be 0".into(), Some(g.range().clone())));
                }
                let qhi = &f.range().hi / &glo;
                let gap = Rational::one() - &qhi;
                if !gap.is_positive() {
                    return Err(blocked(
                        e,
                        format!("quotient may reach 1 (upper bound {})", format_rational(&qhi)),
                        None,
                    ));
                }
                let eps = glo.min(gap) / Rational::from_integer(2.into());
                let m = g.range().hi.clone();
                self.lift(e, quotient_plan(f, g, eps, m, self.backend))
            }
            ExprKind::Pow(a, k) => {
                if *k == 0 {
                    return self.lift(e, constant_plan(Rational::one()));
                }
                let base = self.plan(a)?;
                let mut acc = base.clone();
                for _ in 1..*k {
                    acc = self.lift(e, product(acc, base.clone()))?;
                }
                Ok(acc)
            }
        }
    }
}

/// Compiles an expression whose bound analysis on `domain` has no errors.
pub fn compile_to_plan(e: &Expr, domain: &Interval, backend: Option<Backend>) -> Result<FactoryPlan, CompileError> {
    let analysis = analyze_bounds(e, domain);
    if analysis.has_errors() {
        return Err(CompileError::Blocked(analysis.diagnostics));
    }
    Compiler { domain, backend }.plan(e)
}

pub fn compile_text(text: &str, domain: &Interval, backend: Option<Backend>) -> Result<FactoryPlan, CompileError> {
    let e = parse(text)?;
    compile_to_plan(&e, domain, backend)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinators::{plan_hash, Node};
    use crate::rational::rat;

    fn dom() -> Interval {
        Interval::new(rat(1, 10), rat(2, 5))
    }

    const B: Option<Backend> = Some(Backend::Approx { steps: 2000 });

    #[test]
    fn shapes() {
        let d = Interval::new(rat(1, 10), rat(9, 10));
        assert_eq!(compile_text("p^2", &d, B).unwrap().describe(), "(and p p)");
        assert!(matches!(compile_text("1/3", &d, B).unwrap().node(), Node::Const(c) if *c == rat(1, 3)));
        assert_eq!(compile_text("p / (p + 1/5)", &dom(), B).unwrap().kind(), "mobius");
        assert_eq!(compile_text("p + 1/5", &dom(), B).unwrap().describe(), "(double (avg p 1/5))");
        assert_eq!(compile_text("p/2", &dom(), B).unwrap().describe(), "(and 1/2 p)");
        assert_eq!(compile_text("3/2 * p", &dom(), B).unwrap().kind(), "scalar_mul");
        assert_eq!(compile_text("1/2 - p/2", &dom(), B).unwrap().kind(), "difference");
        assert_eq!(compile_text("p^2 / (p + 1/5)", &dom(), B).unwrap().kind(), "quotient");
    }

    #[test]
    fn blocked_by_analysis() {
        let d = Interval::new(rat(1, 10), rat(1, 2));
        match compile_text("p + p", &d, B) {
            Err(CompileError::Blocked(diags)) => {
                let e = diags.iter().find(|d| d.severity == Severity::Error).unwrap();
                assert_eq!(e.interval.as_ref().unwrap().hi, rat(1, 1));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(compile_text("p +", &d, B), Err(CompileError::Syntax(_))));
    }

    #[test]
    fn deterministic_hash() {
        let a = compile_text("p*(1-p) + 1/4", &dom(), B).unwrap();
        let b = compile_text("p*(1-p) + 1/4", &dom(), B).unwrap();
        assert_eq!(plan_hash(&a), plan_hash(&b));
        let c = compile_text("p*(1-p) + 1/4", &dom(), Some(Backend::Approx { steps: 1000 })).unwrap();
        assert_ne!(plan_hash(&a), plan_hash(&c));
    }
}
