use num_bigint::BigInt;
use num_traits::Zero;

use crate::envelope::{CountPair, ScheduleSource};
use crate::rational::{binomial, pow_rat, Rational};

/// p^j with both envelopes equal to the exact Bernstein coefficients, at checkpoints j·2^t.
#[derive(Debug, Clone)]
pub struct MonomialSchedule {
    pub j: u64,
}

impl MonomialSchedule {
    pub fn new(j: u64) -> Self {
        assert!(j >= 1, "monomial degree must be positive");
        MonomialSchedule { j }
    }
}

impl ScheduleSource for MonomialSchedule {
    fn kind(&self) -> &'static str {
        "monomial"
    }

    fn params(&self) -> serde_json::Value {
        serde_json::json!({ "j": self.j })
    }

    fn checkpoint(&self, idx: usize) -> Option<u64> {
        self.j.checked_mul(1u64.checked_shl(idx as u32)?)
    }

    fn counts(&self, n: u64, k: u64, _binom: &BigInt) -> CountPair {
        if k < self.j {
            return (BigInt::zero(), BigInt::zero());
        }
        let c = binomial(n - self.j, k - self.j);
        (c.clone(), c)
    }

    fn targets_f64(&self, _n: u64, _k: u64) -> Option<(f64, f64)> {
        None
    }

    fn target_value(&self, p: &Rational) -> Option<Rational> {
        Some(pow_rat(p, self.j))
    }
}
