use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use parking_lot::Mutex;

use super::ScheduleError;
use crate::envelope::{CountPair, ScheduleSource};
use crate::rational::{exp_neg_bounds, format_rational, int, rat, round_up_rel, sqrt_bounds, to_f64, Rational};

/// Parameters of the envelope schedule for `min(2p, 1 - 2 eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublingParams {
    pub eps: Rational,
    pub c1: Rational,
    pub c2: Rational,
    /// First active checkpoint; smaller powers of two are idle.
    pub n0: u64,
    /// When false every checkpoint uses the raw formula, even where count_b exceeds C(n,k).
    pub idle: bool,
}

impl DoublingParams {
    /// Default constants (twice the minimal ones, rounded up) and the searched n0.
    pub fn new(eps: Rational) -> Result<Self, ScheduleError> {
        check_eps(&eps)?;
        let (c1, c2) = (c1_floor(&eps), c2_floor(&eps));
        Self::with_constants(eps, c1, c2)
    }

    pub fn with_constants(eps: Rational, c1: Rational, c2: Rational) -> Result<Self, ScheduleError> {
        check_eps(&eps)?;
        if c1 < c1_floor(&eps) || c2 < c2_floor(&eps) {
            return Err(ScheduleError::InvalidParams(format!(
                "constants C1={} C2={} are below their floors",
                format_rational(&c1),
                format_rational(&c2)
            )));
        }
        let mut p = DoublingParams { eps, c1, c2, n0: 1, idle: true };
        p.n0 = p.search_n0()?;
        Ok(p)
    }

    pub fn with_idle(mut self, idle: bool) -> Self {
        self.idle = idle;
        self
    }

    fn search_n0(&self) -> Result<u64, ScheduleError> {
        let mut n = 1u64;
        while n <= 1 << 40 {
            if self.beta_max(n) <= Rational::one() {
                return Ok(n);
            }
            n *= 2;
        }
        Err(ScheduleError::InvalidParams("no checkpoint with beta <= 1 below 2^40".into()))
    }

    /// beta(n, n), the largest upper target at checkpoint n.
    pub fn beta_max(&self, n: u64) -> Rational {
        let (s, e) = surrogates(&self.eps, n);
        let one = Rational::one();
        let two_eps = &self.eps * int(2);
        let r1 = &self.c1 * (rat(1, 2) + &self.eps * int(3));
        let r2 = &self.c2 * rat(8, 9);
        (one - two_eps) + r1 * s + r2 * e
    }
}

fn check_eps(eps: &Rational) -> Result<(), ScheduleError> {
    if !eps.is_positive() || *eps >= rat(1, 8) {
        return Err(ScheduleError::InvalidParams(format!("eps = {} not in (0, 1/8)", format_rational(eps))));
    }
    Ok(())
}

/// 2 / (eps (1 - 1/sqrt 2)) rounded up.
pub(crate) fn c1_floor(eps: &Rational) -> Rational {
    let (_, inv_sqrt2_hi) = sqrt_bounds(&rat(1, 2), 96);
    round_up_rel(&(int(2) / (eps * (Rational::one() - inv_sqrt2_hi))), 64)
}

/// 2 * 72 / (1 - exp(-2 eps^2)) rounded up.
pub(crate) fn c2_floor(eps: &Rational) -> Rational {
    let (_, e_hi) = exp_neg_bounds(&(eps * eps * int(2)), 96);
    round_up_rel(&(int(144) / (Rational::one() - e_hi)), 64)
}

/// Dyadic upper bounds on sqrt(2/n) and exp(-2 eps^2 n).
fn surrogates(eps: &Rational, n: u64) -> (Rational, Rational) {
    let (_, s) = sqrt_bounds(&rat(2, n as i64), 64);
    let (_, e) = exp_neg_bounds(&(eps * eps * int(2 * n as i64)), 64);
    (s, e)
}

struct Level {
    s: Rational,
    e: Rational,
    s_f: f64,
    e_f: f64,
}

/// Envelopes for `min(2p, 1 - 2 eps)` at checkpoints 1, 2, 4, ...
pub struct DoublingSchedule {
    pub params: DoublingParams,
    levels: Mutex<HashMap<u64, Arc<Level>>>,
}

impl std::fmt::Debug for DoublingSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DoublingSchedule").field("params", &self.params).finish()
    }
}

/// Fraction kept unreduced; only ever floored or ceiled against an integer.
struct Frac {
    num: BigInt,
    den: BigInt,
}

impl Frac {
    fn of(r: &Rational) -> Frac {
        Frac { num: r.numer().clone(), den: r.denom().clone() }
    }
    fn add(self, o: Frac) -> Frac {
        Frac { num: self.num * &o.den + o.num * &self.den, den: self.den * o.den }
    }
    fn mul(self, o: &Frac) -> Frac {
        Frac { num: self.num * &o.num, den: self.den * &o.den }
    }
    fn floor_times(&self, b: &BigInt) -> BigInt {
        (&self.num * b).div_floor(&self.den)
    }
    fn ceil_times(&self, b: &BigInt) -> BigInt {
        -((-(&self.num * b)).div_floor(&self.den))
    }
}

impl DoublingSchedule {
    pub fn new(params: DoublingParams) -> Self {
        DoublingSchedule { params, levels: Mutex::new(HashMap::new()) }
    }

    fn level(&self, n: u64) -> Arc<Level> {
        if let Some(l) = self.levels.lock().get(&n) {
            return l.clone();
        }
        let (s, e) = surrogates(&self.params.eps, n);
        let l = Arc::new(Level { s_f: to_f64(&s), e_f: to_f64(&e), s, e });
        self.levels.lock().insert(n, l.clone());
        l
    }

    pub fn alpha(&self, n: u64, k: u64) -> Rational {
        let two_x = rat(2 * k as i64, n as i64);
        let cap = Rational::one() - &self.params.eps * int(2);
        two_x.min(cap)
    }

    pub fn beta(&self, n: u64, k: u64) -> Rational {
        let f = self.beta_frac(n, k);
        Rational::new(f.num, f.den)
    }

    fn ramps(&self, n: u64, k: u64) -> (Rational, Rational) {
        let x = rat(k as i64, n as i64);
        let eps = &self.params.eps;
        let t1 = &x - (rat(1, 2) - eps * int(3));
        let t2 = &x - rat(1, 9);
        let r1 = if t1.is_positive() { &self.params.c1 * t1 } else { Rational::zero() };
        let r2 = if t2.is_positive() { &self.params.c2 * t2 } else { Rational::zero() };
        (r1, r2)
    }

    fn beta_frac(&self, n: u64, k: u64) -> Frac {
        let lv = self.level(n);
        let (r1, r2) = self.ramps(n, k);
        let mut f = Frac::of(&self.alpha(n, k));
        if !r1.is_zero() {
            f = f.add(Frac::of(&r1).mul(&Frac::of(&lv.s)));
        }
        if !r2.is_zero() {
            f = f.add(Frac::of(&r2).mul(&Frac::of(&lv.e)));
        }
        f
    }

    fn active(&self, n: u64) -> bool {
        !self.params.idle || n >= self.params.n0
    }
}

impl ScheduleSource for DoublingSchedule {
    fn kind(&self) -> &'static str {
        "doubling"
    }

    fn params(&self) -> serde_json::Value {
        serde_json::json!({
            "eps": format_rational(&self.params.eps),
            "c1": format_rational(&self.params.c1),
            "c2": format_rational(&self.params.c2),
            "n0": self.params.n0,
            "idle": self.params.idle,
        })
    }

    fn checkpoint(&self, j: usize) -> Option<u64> {
        1u64.checked_shl(j as u32)
    }

    fn counts(&self, n: u64, k: u64, binom: &BigInt) -> CountPair {
        let a = Frac::of(&self.alpha(n, k)).floor_times(binom);
        let b = self.beta_frac(n, k).ceil_times(binom);
        (a, b)
    }

    fn is_idle(&self, n: u64) -> bool {
        !self.active(n)
    }

    fn targets_f64(&self, n: u64, k: u64) -> Option<(f64, f64)> {
        let lv = self.level(n);
        let (r1, r2) = self.ramps(n, k);
        let a = to_f64(&self.alpha(n, k));
        let b = a + to_f64(&r1) * lv.s_f + to_f64(&r2) * lv.e_f;
        Some((a, b))
    }

    fn target_value(&self, p: &Rational) -> Option<Rational> {
        Some((p * int(2)).min(Rational::one() - &self.params.eps * int(2)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::binomial;

    #[test]
    fn constants_for_three_over_25() {
        let p = DoublingParams::new(rat(3, 25)).unwrap();
        assert!((to_f64(&p.c1) - 56.9035).abs() < 1e-3);
        assert!((to_f64(&p.c2) - 5072.35).abs() < 0.05);
        assert_eq!(p.n0, 131072);
        assert!(p.beta_max(p.n0 / 2) > Rational::one());
        assert!(p.beta_max(p.n0) <= Rational::one());
    }

    #[test]
    fn eps_range_and_floors() {
        assert!(DoublingParams::new(rat(1, 8)).is_err());
        assert!(DoublingParams::new(rat(0, 1)).is_err());
        let c1 = c1_floor(&rat(1, 10));
        let c2 = c2_floor(&rat(1, 10));
        assert!(DoublingParams::with_constants(rat(1, 10), c1.clone() - rat(1, 1000), c2.clone()).is_err());
        assert!(DoublingParams::with_constants(rat(1, 10), c1 * int(2), c2).is_ok());
    }

    #[test]
    fn counts_match_rational_targets() {
        let s = DoublingSchedule::new(DoublingParams::new(rat(3, 25)).unwrap().with_idle(false));
        for n in [4u64, 16, 64] {
            for k in 0..=n {
                let b = binomial(n, k);
                let (ca, cb) = s.counts(n, k, &b);
                assert_eq!(ca, crate::rational::floor_int(&(s.alpha(n, k) * int(b.clone()))));
                assert_eq!(cb, crate::rational::ceil_int(&(s.beta(n, k) * int(b.clone()))));
                let (af, bf) = s.targets_f64(n, k).unwrap();
                assert!((af - to_f64(&s.alpha(n, k))).abs() < 1e-15);
                assert!((bf - to_f64(&s.beta(n, k))).abs() < 1e-12 * bf.max(1.0));
            }
        }
    }
}
