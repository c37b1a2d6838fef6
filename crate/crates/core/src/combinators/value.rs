// Interval enclosures of what a plan simulates ("ideal") and of the probability it
// actually outputs 1, plus the bias bound between the two.

use num_traits::{One, Signed, Zero};

use super::{Backend, FactoryPlan, Node, PlanError};
use crate::interval::{Interval, ROUND_BITS};
use crate::rational::{int, round_down_abs, round_up_abs, Rational};
use crate::walk::{walk_bias_exact, walk_error_bound};

/// Exact walk bias is used for point enclosures up to this many steps.
const EXACT_WALK_MAX: u64 = 4096;

/// Rounds endpoints outward only once their denominators grow large.
fn tidy(iv: Interval) -> Interval {
    let limit = 2 * ROUND_BITS as u64;
    let lo = if iv.lo.denom().bits() > limit { round_down_abs(&iv.lo, ROUND_BITS) } else { iv.lo };
    let hi = if iv.hi.denom().bits() > limit { round_up_abs(&iv.hi, ROUND_BITS) } else { iv.hi };
    Interval { lo, hi }
}

/// Enclosure of the actual output probability at bias `p`.
pub fn plan_value(plan: &FactoryPlan, p: &Rational) -> Result<Interval, PlanError> {
    enclose(plan, &Interval::point(p.clone()), false)
}

/// Enclosure of the simulated function at `p`, ignoring walk truncation.
pub fn plan_target(plan: &FactoryPlan, p: &Rational) -> Result<Interval, PlanError> {
    enclose(plan, &Interval::point(p.clone()), true)
}

pub(crate) fn enclose(plan: &FactoryPlan, x: &Interval, ideal: bool) -> Result<Interval, PlanError> {
    if x == plan.domain() {
        return Ok(if ideal { plan.range().clone() } else { plan.actual_range().clone() });
    }
    node_enclose(plan.node(), x, ideal)
}

fn mobius_at(num: &[Rational; 2], den: &[Rational; 2], g: &Rational) -> Rational {
    let h = Rational::one() - g;
    (&num[0] * &h + &num[1] * g) / (&den[0] * &h + &den[1] * g)
}

fn double_actual(steps: u64, c: &Interval) -> Interval {
    if c.is_point() && steps <= EXACT_WALK_MAX && c.lo.is_positive() {
        let q = walk_bias_exact(steps, &c.lo);
        return Interval::point(q);
    }
    if c.lo.is_positive() && c.hi.denom().bits() <= 512 && steps <= EXACT_WALK_MAX {
        // Q_n is nondecreasing
        return Interval::new(walk_bias_exact(steps, &c.lo), walk_bias_exact(steps, &c.hi));
    }
    let slack = walk_error_bound(steps, &c.hi).unwrap_or_else(Rational::one);
    let lo = (&c.lo * int(2) - slack).max(Rational::zero());
    Interval::new(lo, &c.hi * int(2))
}

pub(crate) fn node_enclose(node: &Node, x: &Interval, ideal: bool) -> Result<Interval, PlanError> {
    let e = |p: &FactoryPlan| enclose(p, x, ideal);
    let two = int(2);
    let out = match node {
        Node::Identity => x.clone(),
        Node::Const(c) => Interval::point(c.clone()),
        Node::Complement(c) => e(c)?.complement(),
        Node::Product(a, b) => e(a)?.mul(&e(b)?),
        Node::Average(a, b) => e(a)?.add(&e(b)?).scale(&Rational::new(1.into(), 2.into())),
        Node::Double { child, backend, .. } => {
            let c = e(child)?;
            match (ideal, backend) {
                (false, Some(Backend::Approx { steps })) => double_actual(*steps, &c),
                _ => c.scale(&two),
            }
        }
        Node::Difference { left, right, lowered, .. } => {
            if ideal {
                e(left)?.sub(&e(right)?)
            } else {
                e(lowered)?
            }
        }
        Node::ScalarMul { a, child, lowered, .. } => {
            if ideal {
                e(child)?.scale(a)
            } else {
                e(lowered)?
            }
        }
        Node::SeriesCore { coeffs, t, eps, input } => {
            let w = e(input)?.scale(&(t - eps));
            let s = coeffs
                .sum_bounds(&w)
                .ok_or_else(|| PlanError::DivergenceRisk("series argument outside the certified radius".into()))?;
            s.scale(&(eps / t))
        }
        Node::Series { coeffs, arg, lowered, .. } => {
            if ideal {
                coeffs
                    .sum_bounds(&e(arg)?.clamp_unit())
                    .ok_or_else(|| PlanError::DivergenceRisk("series argument outside the certified radius".into()))?
            } else {
                e(lowered)?
            }
        }
        Node::SeriesGeneral { pos, neg, arg, lowered, .. } => {
            if ideal {
                let g = e(arg)?.clamp_unit();
                let div = || PlanError::DivergenceRisk("series argument outside the certified radius".into());
                pos.sum_bounds(&g).ok_or_else(div)?.sub(&neg.sum_bounds(&g).ok_or_else(div)?)
            } else {
                e(lowered)?
            }
        }
        Node::Quotient { num, den, lowered, .. } => {
            if ideal {
                e(num)?.div(&e(den)?).ok_or_else(|| PlanError::MarginViolated("denominator may vanish".into()))?
            } else {
                e(lowered)?
            }
        }
        Node::Mobius { child, num, den } => {
            let g = e(child)?.clamp_unit();
            let (a, b) = (mobius_at(num, den, &g.lo), mobius_at(num, den, &g.hi));
            Interval::new(a.clone().min(b.clone()), a.max(b))
        }
        Node::Envelope { spec, ctx, .. } => match (x.is_point(), ctx.schedule().target_value(&x.lo)) {
            (true, Some(v)) => Interval::point(v),
            _ => spec.target_range(x),
        },
    };
    Ok(tidy(out))
}

pub(crate) fn node_bias(node: &Node) -> Result<Rational, PlanError> {
    let zero = Rational::zero();
    Ok(match node {
        Node::Identity | Node::Const(_) | Node::Envelope { .. } => zero,
        Node::Complement(c) => c.bias_bound().clone(),
        Node::Product(a, b) => a.bias_bound() + b.bias_bound(),
        Node::Average(a, b) => (a.bias_bound() + b.bias_bound()) / int(2),
        Node::Double { child, backend, .. } => {
            let local = match backend {
                Some(Backend::Approx { steps }) => {
                    walk_error_bound(*steps, &child.actual_range().hi).unwrap_or_else(Rational::one)
                }
                _ => zero,
            };
            child.bias_bound() * int(2) + local
        }
        Node::Mobius { child, num, den } => {
            let dmin = den[0].clone().min(den[1].clone());
            let slope = (&num[1] * &den[0] - &num[0] * &den[1]).abs() / (&dmin * &dmin);
            slope * child.bias_bound()
        }
        Node::SeriesCore { coeffs, t, eps, input } => {
            if input.bias_bound().is_zero() {
                zero
            } else {
                let d = coeffs
                    .deriv_sum_upper(&(t - eps))
                    .ok_or_else(|| PlanError::DivergenceRisk("no derivative bound for the series".into()))?;
                eps / t * d * input.bias_bound()
            }
        }
        Node::Difference { lowered, .. }
        | Node::ScalarMul { lowered, .. }
        | Node::Series { lowered, .. }
        | Node::SeriesGeneral { lowered, .. }
        | Node::Quotient { lowered, .. } => lowered.bias_bound().clone(),
    })
    .map(|b: Rational| if b.denom().bits() > 2 * ROUND_BITS as u64 { round_up_abs(&b, ROUND_BITS) } else { b })
}
