use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::rational::{bernstein_sum, binomial, int, pow_rat, Rational};

/// Population 2n with k marked items, sample of size n without replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HypergeomSpec {
    pub n: u64,
    pub k: u64,
}

impl HypergeomSpec {
    pub fn new(n: u64, k: u64) -> Option<Self> {
        (n >= 1 && k <= 2 * n).then_some(HypergeomSpec { n, k })
    }

    /// Unnormalised weights C(n,i) C(n,k-i) for i in 0..=min(n,k), and their total C(2n,k).
    pub fn weights(&self) -> (Vec<BigInt>, BigInt) {
        let top = self.n.min(self.k);
        let w =
            (0..=top)
                .map(|i| {
                    if self.k - i > self.n {
                        BigInt::zero()
                    } else {
                        binomial(self.n, i) * binomial(self.n, self.k - i)
                    }
                })
                .collect();
        (w, binomial(2 * self.n, self.k))
    }

    /// E g(X/n), exactly.
    pub fn expect(&self, g: impl Fn(&Rational) -> Rational) -> Rational {
        let (w, total) = self.weights();
        let mut acc = Rational::zero();
        for (i, wi) in w.iter().enumerate() {
            if !wi.is_zero() {
                acc += g(&Rational::new(BigInt::from(i), BigInt::from(self.n))) * int(wi.clone());
            }
        }
        acc / int(total)
    }
}

/// P(X = i) for X ~ H(2n, k, n); zero outside the support.
pub fn hypergeom_pmf(spec: HypergeomSpec, i: u64) -> Rational {
    if i > spec.n || i > spec.k || spec.k - i > spec.n {
        return Rational::zero();
    }
    Rational::new(binomial(spec.n, i) * binomial(spec.n, spec.k - i), binomial(2 * spec.n, spec.k))
}

/// `sum_k f(k/n) C(n,k) x^k (1-x)^(n-k)`.
pub fn bernstein_eval(f: impl Fn(&Rational) -> Rational, n: u64, x: &Rational) -> Rational {
    assert!(n >= 1, "Bernstein degree must be positive");
    let vals: Vec<Rational> = (0..=n).map(|k| f(&Rational::new(k.into(), n.into()))).collect();
    let den = vals.iter().fold(BigInt::one(), |acc, v| num_integer::Integer::lcm(&acc, v.denom()));
    let coeffs: Vec<BigInt> =
        vals.iter().enumerate().map(|(k, v)| (v * int(den.clone())).to_integer() * binomial(n, k as u64)).collect();
    bernstein_sum(&coeffs, x) / int(den)
}

/// Outcome of the polynomial-boundedness check on a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    /// Smallest n with `min(f, 1-f) >= min(p, 1-p)^n` at every grid point.
    Valid(u64),
    /// No n up to n_max works; the grid point with the largest shortfall at n_max.
    Failure { p: Rational, value: Rational, bound: Rational, n_max: u64 },
}

pub fn feasibility_check(f: impl Fn(&Rational) -> Rational, grid: &[Rational], n_max: u64) -> Feasibility {
    let pts: Vec<(Rational, Rational, Rational)> = grid
        .iter()
        .map(|p| {
            let v = f(p);
            let lhs = v.clone().min(Rational::one() - &v);
            let base = p.clone().min(Rational::one() - p);
            (p.clone(), lhs, base)
        })
        .collect();
    for n in 1..=n_max {
        if pts.iter().all(|(_, lhs, base)| *lhs >= pow_rat(base, n)) {
            return Feasibility::Valid(n);
        }
    }
    let worst = pts
        .iter()
        .map(|(p, lhs, base)| (p, lhs, pow_rat(base, n_max)))
        .max_by(|a, b| (&a.2 - a.1).cmp(&(&b.2 - b.1)))
        .expect("nonempty grid");
    Feasibility::Failure { p: worst.0.clone(), value: worst.1.clone(), bound: worst.2, n_max }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn pmf_small() {
        let s = HypergeomSpec::new(2, 2).unwrap();
        let v: Vec<Rational> = (0..=2).map(|i| hypergeom_pmf(s, i)).collect();
        assert_eq!(v, [rat(1, 6), rat(2, 3), rat(1, 6)]);
        assert_eq!(hypergeom_pmf(s, 3), rat(0, 1));
    }

    #[test]
    fn pmf_normalised_and_centred() {
        for n in 1..=64u64 {
            for k in 0..=2 * n {
                let s = HypergeomSpec::new(n, k).unwrap();
                let total: Rational = (0..=n).map(|i| hypergeom_pmf(s, i)).sum();
                assert_eq!(total, rat(1, 1));
                assert_eq!(s.expect(|x| x.clone()), Rational::new(k.into(), (2 * n).into()));
            }
        }
    }

    #[test]
    fn bernstein_small() {
        let two_p = |x: &Rational| (x * int(2)).min(Rational::one());
        assert_eq!(bernstein_eval(two_p, 2, &rat(1, 2)), rat(3, 4));
        for n in [1u64, 5, 17] {
            assert_eq!(bernstein_eval(|x| x.clone(), n, &rat(2, 7)), rat(2, 7));
        }
    }

    #[test]
    fn feasibility() {
        let grid: Vec<Rational> = (1..=9).map(|j| rat(j, 20)).collect();
        let capped = |x: &Rational| (x * int(2)).min(rat(4, 5));
        assert_eq!(feasibility_check(capped, &grid, 20), Feasibility::Valid(3));
        assert_eq!(feasibility_check(|_| rat(1, 2), &grid, 20), Feasibility::Valid(1));
        let mut g2 = grid.clone();
        g2.push(rat(49, 100));
        match feasibility_check(|x| x * int(2), &g2, 5) {
            Feasibility::Failure { p, .. } => assert_eq!(p, rat(49, 100)),
            other => panic!("{other:?}"),
        }
    }
}
