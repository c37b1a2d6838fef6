// Exact checks of the hypergeometric moment, tail and smoothing inequalities behind the
// doubling construction. Left sides are exact rationals; exponential right sides use a
// dyadic lower bound so that a pass is a proof for the checked cases.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use super::stats::HypergeomSpec;
use crate::rational::{binomial_row, exp_neg_bounds, format_rational, int, rat, Rational};

#[derive(Debug, Clone, serde::Serialize)]
pub struct LemmaCheck {
    pub name: String,
    pub cases: u64,
    pub violations: Vec<String>,
}

impl LemmaCheck {
    fn new(name: &str) -> Self {
        LemmaCheck { name: name.into(), cases: 0, violations: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok && self.violations.len() < 20 {
            self.violations.push(what());
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lower bound on `c exp(-x)`.
fn exp_lo(c: &Rational, x: &Rational) -> Rational {
    c * exp_neg_bounds(x, 64).0
}

/// f(i/n) for i = 0..=n as integers over a common denominator.
fn scaled_values(f: impl Fn(&Rational) -> Rational, n: u64) -> (Vec<BigInt>, BigInt) {
    let vals: Vec<Rational> = (0..=n).map(|i| f(&Rational::new(i.into(), n.into()))).collect();
    let den = vals.iter().fold(BigInt::one(), |acc, v| num_integer::Integer::lcm(&acc, v.denom()));
    let ints = vals.iter().map(|v| (v * int(den.clone())).to_integer()).collect();
    (ints, den)
}

fn capped_double(eps: &Rational) -> impl Fn(&Rational) -> Rational + '_ {
    move |x| (x * int(2)).min(Rational::one() - eps * int(2))
}

/// E f(X/n) from integer weights and scaled values.
fn expectation(w: &[BigInt], total: &BigInt, vals: &(Vec<BigInt>, BigInt)) -> Rational {
    let s: BigInt = w.iter().zip(&vals.0).map(|(a, b)| a * b).sum();
    Rational::new(s, total * &vals.1)
}

fn weights(row: &[BigInt], n: u64, k: u64) -> Vec<BigInt> {
    (0..=n.min(k)).map(|i| if k - i > n { BigInt::zero() } else { &row[i as usize] * &row[(k - i) as usize] }).collect()
}

/// Moment and tail identities of X ~ H(2n, k, n) for n up to `n_max`.
fn hypergeometric_checks(n_max: u64) -> Vec<LemmaCheck> {
    let mut mean = LemmaCheck::new("hypergeometric mean E(X/n) = k/(2n)");
    let mut var = LemmaCheck::new("hypergeometric variance k(2n-k)/(4(2n-1)n^2) <= 1/(2n)");
    let mut tail = LemmaCheck::new("hypergeometric tail P(|X/n - k/2n| > a) <= 2exp(-2a^2 n)");
    for n in 1..=n_max {
        let row = binomial_row(n);
        for k in 0..=2 * n {
            let spec = HypergeomSpec { n, k };
            let w = weights(&row, n, k);
            let total: BigInt = w.iter().sum();
            let centre = Rational::new(k.into(), (2 * n).into());
            let m1 = spec.expect(|x| x.clone());
            mean.check(m1 == centre, || format!("n={n} k={k}: mean {}", format_rational(&m1)));
            let m2 = spec.expect(|x| x * x);
            let v = m2 - &m1 * &m1;
            let formula = Rational::new((k * (2 * n - k)).into(), (4 * (2 * n - 1) * n * n).into());
            let bound = Rational::new(1.into(), (2 * n).into());
            var.check(v == formula && v <= bound, || format!("n={n} k={k}: var {}", format_rational(&v)));
            for a in [rat(1, 8), rat(1, 4)] {
                let mut mass = BigInt::zero();
                for (i, wi) in w.iter().enumerate() {
                    let d = (Rational::new(BigInt::from(i), n.into()) - &centre).abs();
                    if d > a {
                        mass += wi;
                    }
                }
                let lhs = Rational::new(mass, total.clone());
                let rhs = exp_lo(&int(2), &(&a * &a * int(2 * n)));
                tail.check(lhs <= rhs, || {
                    format!("n={n} k={k} a={}: tail {}", format_rational(&a), format_rational(&lhs))
                });
            }
        }
    }
    vec![mean, var, tail]
}

/// Smoothing inequalities |E f(X/n) - f(k/2n)| for n up to `n_max`.
fn smoothing_checks(n_max: u64) -> Vec<LemmaCheck> {
    let mut lip = LemmaCheck::new("Lipschitz smoothing <= C/sqrt(2n)");
    let mut c2 = LemmaCheck::new("C2 smoothing <= C/(4n)");
    let mut lin = LemmaCheck::new("locally linear smoothing <= (2|C|+4)exp(-2a^2 n)");
    let mut capped_sq = LemmaCheck::new("capped doubling smoothing <= sqrt(2/n)");
    let mut capped_exp = LemmaCheck::new("capped doubling smoothing <= 8exp(-2eps^2 n) below 1/2 - 2eps");
    let epsilons = [rat(3, 25), rat(1, 10)];
    let radii = [rat(1, 16), rat(1, 8)];
    let bend = |x: &Rational| x * (Rational::one() - x);
    let cube = |x: &Rational| x * x * x;
    for n in 1..=n_max {
        let row = binomial_row(n);
        let capped: Vec<_> = epsilons.iter().map(|e| scaled_values(capped_double(e), n)).collect();
        let smooth = [
            (scaled_values(bend, n), int(2), &bend as &dyn Fn(&Rational) -> Rational),
            (scaled_values(cube, n), int(6), &cube),
        ];
        let nn = int(n);
        for k in 0..=2 * n {
            let w = weights(&row, n, k);
            let total: BigInt = w.iter().sum();
            let centre = Rational::new(k.into(), (2 * n).into());
            for (eps, vals) in epsilons.iter().zip(&capped) {
                let diff = (expectation(&w, &total, vals) - capped_double(eps)(&centre)).abs();
                let d2 = &diff * &diff;
                lip.check(d2 <= int(4) / (&nn * int(2)), || format!("n={n} k={k} eps={}", format_rational(eps)));
                capped_sq.check(d2 <= int(2) / &nn, || format!("n={n} k={k} eps={}", format_rational(eps)));
                let knee = rat(1, 2) - eps;
                for a in &radii {
                    if &centre + a <= knee {
                        let rhs = exp_lo(&int(8), &(a * a * int(2 * n)));
                        lin.check(diff <= rhs, || {
                            format!("n={n} k={k} a={} diff={}", format_rational(a), format_rational(&diff))
                        });
                    }
                }
                if centre <= rat(1, 2) - eps * int(2) {
                    let rhs = exp_lo(&int(8), &(eps * eps * int(2 * n)));
                    capped_exp.check(diff <= rhs, || {
                        format!("n={n} k={k} eps={} diff={}", format_rational(eps), format_rational(&diff))
                    });
                }
            }
            for (vals, c, f) in &smooth {
                let diff = (expectation(&w, &total, vals) - f(&centre)).abs();
                c2.check(diff <= c / (int(4) * &nn), || format!("n={n} k={k} diff={}", format_rational(&diff)));
            }
        }
    }
    vec![lip, c2, lin, capped_sq, capped_exp]
}

/// All checks: moment and tail identities up to `n_tail`, smoothing bounds up to `n_smooth`.
pub fn lemma_suite(n_tail: u64, n_smooth: u64) -> Vec<LemmaCheck> {
    let mut out = hypergeometric_checks(n_tail);
    out.extend(smoothing_checks(n_smooth));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        for c in lemma_suite(12, 24) {
            assert!(c.passed(), "{}: {:?}", c.name, c.violations);
            assert!(c.cases > 0, "{}", c.name);
        }
    }

    #[test]
    fn violations_are_reported() {
        let mut c = LemmaCheck::new("x");
        c.check(false, || "bad".into());
        assert!(!c.passed());
        assert_eq!(c.cases, 1);
    }
}
