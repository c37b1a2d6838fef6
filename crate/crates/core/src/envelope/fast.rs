// Floating-point rank path with a certified error bound.
//
// The B\A rank at checkpoint n with i ones is carried as rho = rank / C(n, i) in [0, gap).
// One step to checkpoint m with k ones gives
//   rho' = sum_{i'<i} w(i') gap(n,i') + w(i) (rho + e_s) - (a(m,k) - sum_{i'} w(i') a(n,i'))
// where w is the hypergeometric weight C(n,i')C(m-n,k-i')/C(m,k) and e_s < 1/C(n,i) is the
// suffix contribution. The carried error is multiplied by w(i) <= 1 at each step.
// When rho' is within the error bound of a threshold the caller recomputes exactly.

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use super::{Decision, EngineError, RankContext};
use crate::rational::{binomial, ratio_f64};

/// Checkpoints at or below this size always use exact ranks.
pub(crate) const FAST_MIN_N: u64 = 128;

const U: f64 = f64::EPSILON / 2.0;
const TINY: f64 = 1.0 / 18446744073709551616.0; // 2^-64

#[derive(Clone, Copy, Debug)]
pub(crate) struct LevelValue {
    a: f64,
    b: f64,
    err: f64,
    exact_zero_a: bool,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct FastState {
    rho: f64,
    err: f64,
}

impl FastState {
    pub(crate) fn from_exact(rank: &BigInt, n: u64, i: u64) -> Self {
        let b = binomial(n, i);
        FastState { rho: ratio_f64(rank, &b), err: 4.0 * U }
    }
}

fn ln_gamma(x: f64) -> f64 {
    // Stirling series after shifting x >= 10
    let mut shift = 0.0;
    let mut x = x;
    while x < 10.0 {
        shift -= x.ln();
        x += 1.0;
    }
    let x2 = x * x;
    shift + (x - 0.5) * x.ln() - x + 0.918_938_533_204_672_8 + 1.0 / (12.0 * x) - 1.0 / (360.0 * x * x2)
        + 1.0 / (1260.0 * x2 * x2 * x)
}

/// log2 C(n, k) to about 1e-9 relative accuracy.
pub(crate) fn log2_binom(n: u64, k: u64) -> f64 {
    if k == 0 || k == n {
        return 0.0;
    }
    (ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)) / std::f64::consts::LN_2
}

/// Upper bound on 1 / C(n, k).
fn inv_binom_bound(n: u64, k: u64) -> f64 {
    let l = log2_binom(n, k);
    if l < 60.0 {
        return 1.0 / binomial(n, k).to_f64().unwrap_or(1.0) * (1.0 + 4.0 * U);
    }
    (-(l * (1.0 - 1e-9) - 1.0)).exp2()
}

fn level_value(ctx: &RankContext, n: u64, k: u64) -> LevelValue {
    let sched = ctx.schedule();
    if sched.is_idle(n) {
        return LevelValue { a: 0.0, b: 1.0, err: 0.0, exact_zero_a: true };
    }
    if let Some(v) = ctx.values.lock().get(&(n, k)) {
        return *v;
    }
    let l = log2_binom(n, k);
    let v = if l < 60.0 {
        let b = binomial(n, k);
        let (ca, cb) = sched.counts(n, k, &b);
        let bf = b.to_f64().unwrap_or(f64::INFINITY);
        LevelValue {
            a: ca.to_f64().unwrap_or(0.0) / bf,
            b: cb.to_f64().unwrap_or(0.0) / bf,
            err: 4.0 * U,
            exact_zero_a: ca == BigInt::ZERO,
        }
    } else {
        let (a, b) = sched.targets_f64(n, k).expect("fast path needs float targets");
        LevelValue { a, b, err: 8.0 * U + inv_binom_bound(n, k), exact_zero_a: false }
    };
    let mut cache = ctx.values.lock();
    if cache.len() < 1 << 22 {
        cache.insert((n, k), v);
    }
    v
}

/// Unnormalised log-concave weights around their mode, truncated once negligible.
struct Window {
    lo: u64,
    terms: Vec<f64>,
    sum: f64,
    tail: f64,
}

impl Window {
    /// `ratio(x)` is t(x+1)/t(x) for x in [lo, hi).
    fn build(lo: u64, hi: u64, mode: u64, must: u64, ratio: impl Fn(u64) -> f64) -> Window {
        let mut up = Vec::new();
        let mut t = 1.0;
        let mut x = mode;
        let mut sum = 1.0;
        let mut tail = 0.0;
        while x < hi {
            let r = ratio(x);
            if x >= must && t < TINY * sum && r < 0.5 {
                tail += t * r / (1.0 - r);
                break;
            }
            t *= r;
            x += 1;
            sum += t;
            up.push(t);
        }
        let mut down = Vec::new();
        t = 1.0;
        x = mode;
        while x > lo {
            let r = 1.0 / ratio(x - 1);
            if x <= must && t < TINY * sum && r < 0.5 {
                tail += t * r / (1.0 - r);
                break;
            }
            t *= r;
            x -= 1;
            sum += t;
            down.push(t);
        }
        let wlo = mode - down.len() as u64;
        down.reverse();
        down.push(1.0);
        down.extend(up);
        Window { lo: wlo, terms: down, sum, tail }
    }
}

pub(crate) fn step(
    ctx: &RankContext,
    st: &FastState,
    n: u64,
    i: u64,
    m: u64,
    k: u64,
) -> Result<Option<(Decision, FastState)>, EngineError> {
    let d = m - n;
    let lo = k.saturating_sub(d);
    let hi = k.min(n);
    let mode_f = ((k + 1) as f64 * (n + 1) as f64 / (m + 2) as f64).floor() as u64;
    let mode = mode_f.clamp(lo, hi);
    let ratio = |x: u64| ((n - x) as f64 / (x + 1) as f64) * ((k - x) as f64 / (d + x + 1 - k) as f64);
    let win = Window::build(lo, hi, mode, i, ratio);
    let steps = win.terms.len() as f64;
    let mut big_a = 0.0;
    let mut big_g = 0.0;
    let mut big_l = 0.0;
    let mut wi = 0.0;
    let mut max_err: f64 = 0.0;
    let mut all_zero_a = true;
    for (off, &t) in win.terms.iter().enumerate() {
        let x = win.lo + off as u64;
        let v = level_value(ctx, n, x);
        max_err = max_err.max(v.err);
        all_zero_a &= v.exact_zero_a;
        big_a += t * v.a;
        let g = t * (v.b - v.a);
        big_g += g;
        if x < i {
            big_l += g;
        }
        if x == i {
            wi = t;
        }
    }
    let s = win.sum + win.tail;
    big_a /= s;
    big_g /= s;
    big_l /= s;
    wi /= s;
    let tail_rel = win.tail / s;
    let target = level_value(ctx, m, k);
    let unit = (12.0 * steps + 32.0) * U;
    let e_s = wi * inv_binom_bound(n, i);
    let e = 3.0 * unit + 2.0 * max_err + target.err + 2.0 * tail_rel + e_s + st.rho.abs() * unit;
    let deficit_a = target.a - big_a;
    let gap_new = target.b - target.a;
    if deficit_a < -e || target.b - big_a > big_g + e + target.err {
        return Ok(None);
    }
    let rho = big_l + wi * st.rho - deficit_a;
    let err = wi * st.err + e;
    let idle_prev = ctx.schedule().is_idle(n);
    let lower_exact = idle_prev && all_zero_a && target.exact_zero_a;
    let upper_exact = idle_prev && ctx.schedule().is_idle(m);
    let dec = if upper_exact && lower_exact {
        Decision::Continue
    } else if !lower_exact && rho < -err {
        Decision::OutputOne
    } else if (lower_exact || rho >= err) && (upper_exact || rho < gap_new - err - target.err) {
        Decision::Continue
    } else if !upper_exact && rho >= gap_new + err + target.err {
        Decision::OutputZero
    } else {
        return Ok(None);
    };
    Ok(Some((dec, FastState { rho: rho.max(0.0), err })))
}

/// Float envelope values with a certified absolute error bound.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct EnvelopeBound {
    pub n: u64,
    pub g: f64,
    pub h: f64,
    /// h - g accumulated directly.
    pub gap: f64,
    /// Absolute error bound on each of g, h and gap.
    pub err: f64,
}

pub(crate) fn envelope_bound(schedule: &super::EnvelopeSchedule, p: f64, n: u64) -> EnvelopeBound {
    let ctx = RankContext::new(schedule.clone());
    let q = 1.0 - p;
    let mode = if p <= 0.0 {
        0
    } else if q <= 0.0 {
        n
    } else {
        (((n + 1) as f64) * p).floor().min(n as f64) as u64
    };
    let win = if p <= 0.0 || q <= 0.0 {
        Window { lo: mode, terms: vec![1.0], sum: 1.0, tail: 0.0 }
    } else {
        Window::build(0, n, mode, mode, |x| ((n - x) as f64 / (x + 1) as f64) * (p / q))
    };
    let mut g = 0.0;
    let mut h = 0.0;
    let mut gap = 0.0;
    let mut max_err: f64 = 0.0;
    for (off, &t) in win.terms.iter().enumerate() {
        let v = level_value(&ctx, n, win.lo + off as u64);
        max_err = max_err.max(v.err);
        g += t * v.a;
        h += t * v.b;
        gap += t * (v.b - v.a);
    }
    let s = win.sum + win.tail;
    let unit = (12.0 * win.terms.len() as f64 + 32.0) * U;
    let err = 2.0 * unit + max_err + 2.0 * win.tail / s + 4.0 * U;
    EnvelopeBound { n, g: g / s, h: h / s, gap: gap / s, err }
}
