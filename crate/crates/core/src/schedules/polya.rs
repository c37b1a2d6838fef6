use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::ScheduleError;
use crate::rational::{int, Rational};

/// Homogeneous polynomial in (x, y) of degree `coeffs.len() - 1`; `coeffs[k]` multiplies
/// x^k y^(m-k).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomogeneousPoly {
    pub coeffs: Vec<Rational>,
}

impl HomogeneousPoly {
    pub fn new(coeffs: Vec<Rational>) -> Self {
        assert!(!coeffs.is_empty(), "empty polynomial");
        HomogeneousPoly { coeffs }
    }

    pub fn degree(&self) -> u64 {
        self.coeffs.len() as u64 - 1
    }

    /// Multiplies by (x + y)^e.
    pub fn times_x_plus_y(&self, e: u64) -> HomogeneousPoly {
        let mut c = self.coeffs.clone();
        for _ in 0..e {
            let mut next = Vec::with_capacity(c.len() + 1);
            next.push(c[0].clone());
            for w in c.windows(2) {
                next.push(&w[0] + &w[1]);
            }
            next.push(c[c.len() - 1].clone());
            c = next;
        }
        HomogeneousPoly { coeffs: c }
    }

    pub fn sub(&self, other: &HomogeneousPoly) -> HomogeneousPoly {
        assert_eq!(self.coeffs.len(), other.coeffs.len(), "degree mismatch");
        HomogeneousPoly { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect() }
    }

    /// Value at (p, 1 - p).
    pub fn eval(&self, p: &Rational) -> Rational {
        let q = Rational::one() - p;
        let m = self.degree();
        let mut acc = Rational::zero();
        for (k, c) in self.coeffs.iter().enumerate() {
            acc += c * num_traits::pow(p.clone(), k) * num_traits::pow(q.clone(), (m - k as u64) as usize);
        }
        acc
    }

    pub fn has_nonneg_coeffs(&self) -> bool {
        self.coeffs.iter().all(|c| !c.is_negative())
    }
}

/// Smallest n <= max_n such that (x + y)^n · poly has only nonnegative coefficients.
pub fn polya_exponent(poly: &HomogeneousPoly, max_n: u64) -> Result<u64, ScheduleError> {
    // clear denominators, then convolve integers with (1, 1)
    let lcm = poly.coeffs.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
    let mut c: Vec<BigInt> = poly.coeffs.iter().map(|r| (r * int(lcm.clone())).to_integer()).collect();
    for n in 0..=max_n {
        if c.iter().all(|v| !v.is_negative()) {
            return Ok(n);
        }
        let mut next = Vec::with_capacity(c.len() + 1);
        next.push(c[0].clone());
        for w in c.windows(2) {
            next.push(&w[0] + &w[1]);
        }
        next.push(c[c.len() - 1].clone());
        c = next;
    }
    Err(ScheduleError::ExponentNotFound { max_n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn poly(c: &[(i64, i64)]) -> HomogeneousPoly {
        HomogeneousPoly::new(c.iter().map(|&(n, d)| rat(n, d)).collect())
    }

    #[test]
    fn known_exponents() {
        // coefficients listed from y^2 to x^2
        assert_eq!(polya_exponent(&poly(&[(1, 1), (-1, 1), (1, 1)]), 100), Ok(1));
        assert_eq!(polya_exponent(&poly(&[(1, 1), (-3, 2), (1, 1)]), 100), Ok(5));
        assert_eq!(polya_exponent(&poly(&[(1, 1), (2, 1), (1, 1)]), 100), Ok(0));
    }

    #[test]
    fn vanishing_poly_has_no_exponent() {
        // (x - y)^2 vanishes at x = y
        assert_eq!(
            polya_exponent(&poly(&[(1, 1), (-2, 1), (1, 1)]), 300),
            Err(ScheduleError::ExponentNotFound { max_n: 300 })
        );
    }

    #[test]
    fn multiplication_preserves_values() {
        let p = poly(&[(1, 1), (-3, 2), (1, 1)]);
        let q = p.times_x_plus_y(5);
        assert!(q.has_nonneg_coeffs());
        for x in [rat(1, 3), rat(1, 2), rat(7, 9)] {
            assert_eq!(p.eval(&x), q.eval(&x));
        }
    }
}
