use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use super::{check_margin, ScheduleError, TargetFn};
use crate::envelope::{CountPair, ScheduleSource};
use crate::rational::{ceil_int, floor_int, format_rational, int, rat, round_up_rel, sqrt_bounds, to_f64, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    /// |f(x) - f(y)| <= C |x - y|.
    Lipschitz,
    /// |f''| <= C.
    TwiceDifferentiable,
}

#[derive(Debug, Clone)]
pub struct SmoothParams {
    pub f: TargetFn,
    pub c: Rational,
    pub eps: Rational,
    pub smoothness: Smoothness,
}

/// Envelopes `f(k/n) -+ delta_n` at powers of two, idle while `delta_n >= eps`.
#[derive(Debug, Clone)]
pub struct SmoothSchedule {
    pub params: SmoothParams,
    first_active: u64,
}

impl SmoothSchedule {
    pub fn new(params: SmoothParams) -> Result<Self, ScheduleError> {
        if !params.c.is_positive() {
            return Err(ScheduleError::InvalidParams("C must be positive".into()));
        }
        check_margin(&params.f, &params.eps, 10)?;
        let mut s = SmoothSchedule { params, first_active: 1 };
        let mut n = 1u64;
        while s.delta(n) >= s.params.eps {
            n *= 2;
        }
        s.first_active = n;
        Ok(s)
    }

    pub fn first_active(&self) -> u64 {
        self.first_active
    }

    /// Offset at checkpoint n, rounded up to a dyadic for the Lipschitz case.
    pub fn delta(&self, n: u64) -> Rational {
        let c = &self.params.c;
        match self.params.smoothness {
            Smoothness::Lipschitz => {
                let (_, r2) = sqrt_bounds(&int(2), 96);
                let (_, inv) = sqrt_bounds(&rat(1, n as i64), 96);
                round_up_rel(&((r2 + int(1)) * c * inv), 64)
            }
            Smoothness::TwiceDifferentiable => c / int(2 * n as i64),
        }
    }

    fn targets(&self, n: u64, k: u64) -> (Rational, Rational) {
        let fx = self.params.f.eval(&rat(k as i64, n as i64));
        let d = self.delta(n);
        (&fx - &d, fx + d)
    }
}

impl ScheduleSource for SmoothSchedule {
    fn kind(&self) -> &'static str {
        match self.params.smoothness {
            Smoothness::Lipschitz => "lipschitz",
            Smoothness::TwiceDifferentiable => "c2",
        }
    }

    fn params(&self) -> serde_json::Value {
        serde_json::json!({
            "f": self.params.f.label(),
            "c": format_rational(&self.params.c),
            "eps": format_rational(&self.params.eps),
            "first_active": self.first_active,
        })
    }

    fn checkpoint(&self, j: usize) -> Option<u64> {
        1u64.checked_shl(j as u32)
    }

    fn counts(&self, n: u64, k: u64, binom: &BigInt) -> CountPair {
        let (a, b) = self.targets(n, k);
        let b_int = int(binom.clone());
        let ca = floor_int(&(a * &b_int)).max(BigInt::zero());
        let cb = ceil_int(&(b * &b_int)).min(binom.clone());
        (ca, cb)
    }

    fn is_idle(&self, n: u64) -> bool {
        n < self.first_active
    }

    fn targets_f64(&self, n: u64, k: u64) -> Option<(f64, f64)> {
        let (a, b) = self.targets(n, k);
        Some((to_f64(&a).clamp(0.0, 1.0), to_f64(&b).clamp(0.0, 1.0)))
    }

    fn target_value(&self, p: &Rational) -> Option<Rational> {
        Some(self.params.f.eval(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lipschitz() -> SmoothSchedule {
        SmoothSchedule::new(SmoothParams {
            f: TargetFn::affine(rat(1, 2), rat(1, 4)),
            c: rat(1, 4),
            eps: rat(1, 4),
            smoothness: Smoothness::Lipschitz,
        })
        .unwrap()
    }

    #[test]
    fn first_active_is_eight() {
        let s = lipschitz();
        assert_eq!(s.first_active(), 8);
        assert!((to_f64(&s.delta(8)) - 0.21339).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_margin() {
        let r = SmoothSchedule::new(SmoothParams {
            f: TargetFn::affine(rat(0, 1), rat(1, 1)),
            c: rat(1, 1),
            eps: rat(1, 10),
            smoothness: Smoothness::Lipschitz,
        });
        assert!(r.is_err());
    }
}
