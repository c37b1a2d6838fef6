use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use super::{Backend, FactoryPlan, Node, PlanError};
use crate::coin::{BitStream, CoinError, Outcome};
use crate::envelope::{simulate, EnvelopeSchedule, RankContext, SimMode};
use crate::rational::Rational;
use crate::schedules::{DoublingParams, DoublingSchedule};
use crate::walk::walk_with;

/// Fair bit from pairs of tosses: 10 gives 1, 01 gives 0, equal pairs are discarded.
pub fn von_neumann_bit(source: &mut dyn BitStream) -> Result<Outcome, CoinError> {
    let start = source.tosses();
    loop {
        let a = source.next_bit()?;
        let b = source.next_bit()?;
        if a != b {
            return Ok(Outcome { bit: a, tosses: source.tosses() - start });
        }
    }
}

/// Binary digit `m >= 1` of `c` in [0, 1), i.e. floor(c 2^m) mod 2.
pub fn binary_digit(c: &Rational, m: u64) -> bool {
    let scaled: BigInt = c.numer() << m;
    let q = scaled / c.denom();
    q.bit(0)
}

/// Executes `plan` on `source`; the toss count covers every leaf draw.
pub fn run_plan(plan: &FactoryPlan, source: &mut dyn BitStream) -> Result<Outcome, PlanError> {
    let start = source.tosses();
    let bit = run(plan, source)?;
    Ok(Outcome { bit, tosses: source.tosses() - start })
}

fn const_bit(c: &Rational, source: &mut dyn BitStream) -> Result<bool, PlanError> {
    if c.is_zero() {
        return Ok(false);
    }
    if c.is_one() {
        return Ok(true);
    }
    // Compare a uniform U, drawn bit by bit, with the binary expansion of c.
    let den = c.denom().clone();
    let mut num = c.numer().clone();
    loop {
        num <<= 1;
        let digit = num >= den;
        if digit {
            num -= &den;
        }
        let b = von_neumann_bit(source)?.bit;
        if b != digit {
            return Ok(digit);
        }
        if num.is_zero() {
            // U matches a dyadic c so far, so U >= c
            return Ok(false);
        }
    }
}

/// Feeds child-plan outputs to a consumer expecting a coin.
struct ChildCoin<'a> {
    plan: &'a FactoryPlan,
    source: &'a mut dyn BitStream,
    draws: u64,
    failure: Option<PlanError>,
}

impl BitStream for ChildCoin<'_> {
    fn next_bit(&mut self) -> Result<bool, CoinError> {
        match run(self.plan, self.source) {
            Ok(b) => {
                self.draws += 1;
                Ok(b)
            }
            Err(e) => {
                self.failure = Some(e);
                Err(CoinError::SourceExhausted(self.source.tosses()))
            }
        }
    }

    fn tosses(&self) -> u64 {
        self.draws
    }
}

fn exact_doubler(eps: &Rational) -> Result<Arc<RankContext>, String> {
    let params = DoublingParams::new(eps.clone()).map_err(|e| e.to_string())?;
    Ok(Arc::new(RankContext::new(EnvelopeSchedule::new(DoublingSchedule::new(params)))))
}

fn run(plan: &FactoryPlan, source: &mut dyn BitStream) -> Result<bool, PlanError> {
    match plan.node() {
        Node::Identity => Ok(source.next_bit()?),
        Node::Const(c) => const_bit(c, source),
        Node::Complement(c) => Ok(!run(c, source)?),
        Node::Product(a, b) => Ok(run(a, source)? && run(b, source)?),
        Node::Average(a, b) => {
            if von_neumann_bit(source)?.bit {
                run(a, source)
            } else {
                run(b, source)
            }
        }
        Node::Double { child, eps, backend, exact } => match backend {
            None => Err(PlanError::BackendRequired),
            Some(Backend::Approx { steps }) => Ok(walk_with(*steps, || run(child, source))?.0),
            Some(Backend::Exact) => {
                let ctx = exact.get_or_init(|| exact_doubler(eps)).clone().map_err(PlanError::InvalidParams)?;
                let mut coin = ChildCoin { plan: child, source, draws: 0, failure: None };
                let res = simulate(&ctx, &mut coin, SimMode::Accelerated);
                if let Some(e) = coin.failure.take() {
                    return Err(e);
                }
                Ok(res?.bit)
            }
        },
        Node::SeriesCore { coeffs, t, eps, input } => {
            let stay = (t - eps) / t;
            let mut n = 0u64;
            while const_bit(&stay, source)? {
                n += 1;
            }
            for _ in 0..n {
                if !run(input, source)? {
                    return Ok(false);
                }
            }
            let c = coeffs.coeff(n) * num_traits::pow(t.clone(), n.to_usize().expect("series index fits"));
            const_bit(&c, source)
        }
        Node::Mobius { child, num, den } => {
            let top = den[0].clone().max(den[1].clone());
            loop {
                let x = run(child, source)? as usize;
                if const_bit(&(&den[x] / &top), source)? {
                    return const_bit(&(&num[x] / &den[x]), source);
                }
            }
        }
        Node::Envelope { ctx, mode, .. } => Ok(simulate(ctx, source, *mode)?.bit),
        Node::Difference { lowered, .. }
        | Node::ScalarMul { lowered, .. }
        | Node::Series { lowered, .. }
        | Node::SeriesGeneral { lowered, .. }
        | Node::Quotient { lowered, .. } => run(lowered, source),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coin::CoinSource;
    use crate::combinators::{complement, constant_plan, identity};
    use crate::interval::Interval;
    use crate::rational::rat;

    #[test]
    fn von_neumann_on_tape() {
        let mut t = CoinSource::tape(vec![true, true, false, true]);
        assert_eq!(von_neumann_bit(&mut t).unwrap(), Outcome { bit: false, tosses: 4 });
        let mut t = CoinSource::tape(vec![true, true]);
        assert!(matches!(von_neumann_bit(&mut t), Err(CoinError::SourceExhausted(_))));
    }

    #[test]
    fn digits() {
        let third = rat(1, 3);
        let d: Vec<bool> = (1..=6).map(|m| binary_digit(&third, m)).collect();
        assert_eq!(d, [false, true, false, true, false, true]);
        assert!(binary_digit(&rat(1, 2), 1));
        assert!(!binary_digit(&rat(1, 2), 2));
    }

    #[test]
    fn complement_on_tails() {
        let id = identity(Interval::new(rat(1, 10), rat(9, 10))).unwrap();
        let mut t = CoinSource::tape(vec![false]);
        assert_eq!(run_plan(&complement(id), &mut t).unwrap(), Outcome { bit: true, tosses: 1 });
    }

    #[test]
    fn trivial_constants_toss_nothing() {
        let mut t = CoinSource::tape(vec![]);
        assert!(!run_plan(&constant_plan(rat(0, 1)).unwrap(), &mut t).unwrap().bit);
        assert!(run_plan(&constant_plan(rat(1, 1)).unwrap(), &mut t).unwrap().bit);
    }
}
