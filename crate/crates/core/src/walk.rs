//! Approximate doubling by a simple random walk stopped after a fixed number of steps.
//!
//! Heads step +1, tails step -1; the walk outputs 1 at the first time its position is
//! nonnegative and 0 if that never happens within `steps` tosses. Its bias is the Bernstein
//! polynomial of `min(2p, 1)`.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::coin::{BitStream, CoinError, Outcome};
use crate::rational::{bernstein_sum, binomial, exp_neg_bounds, int, rat, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct WalkConfig {
    pub steps: u64,
}

impl WalkConfig {
    pub fn new(steps: u64) -> Self {
        assert!(steps >= 1, "walk needs at least one step");
        WalkConfig { steps }
    }
}

/// Runs the walk on an arbitrary coin; returns the output and the number of coin draws.
pub fn walk_with<E>(steps: u64, mut coin: impl FnMut() -> Result<bool, E>) -> Result<(bool, u64), E> {
    let mut s: i64 = 0;
    for k in 1..=steps {
        s += if coin()? { 1 } else { -1 };
        if s >= 0 {
            return Ok((true, k));
        }
    }
    Ok((false, steps))
}

pub fn approx_double_bit(config: WalkConfig, source: &mut dyn BitStream) -> Result<Outcome, CoinError> {
    let (bit, tosses) = walk_with(config.steps, || source.next_bit())?;
    Ok(Outcome { bit, tosses })
}

/// Number of length-n paths with k up-steps whose partial sums reach 0: `min(2k/n, 1) C(n, k)`.
pub fn reflection_count(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    if 2 * k >= n {
        binomial(n, k)
    } else if k == 0 {
        BigInt::zero()
    } else {
        binomial(n - 1, k - 1) * 2
    }
}

/// Exact output probability of the n-step walk on a p-coin.
pub fn walk_bias_exact(n: u64, p: &Rational) -> Rational {
    let mut c = BigInt::one();
    let mut row = Vec::with_capacity(n as usize + 1);
    for k in 0..=n {
        row.push(if 2 * k >= n {
            c.clone()
        } else if k == 0 {
            BigInt::zero()
        } else {
            &c * (2 * k) / n
        });
        if k < n {
            c = c * (n - k) / (k + 1);
        }
    }
    bernstein_sum(&row, p)
}

/// Dyadic upper bound on `2 exp(-2 n (1/2 - p)^2)`, which dominates `2p - walk_bias_exact(n, p)`
/// for p < 1/2. `None` when p >= 1/2.
pub fn walk_error_bound(n: u64, p: &Rational) -> Option<Rational> {
    let gap = rat(1, 2) - p;
    if gap <= Rational::zero() {
        return None;
    }
    let x = &gap * &gap * int(2 * n);
    Some(exp_neg_bounds(&x, 64).1 * int(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coin::CoinSource;

    fn run(tape: &str, steps: u64) -> Outcome {
        let mut src = CoinSource::tape_from_str(tape).unwrap();
        approx_double_bit(WalkConfig::new(steps), &mut src).unwrap()
    }

    #[test]
    fn walk_rules() {
        assert_eq!(run("1", 5), Outcome { bit: true, tosses: 1 });
        assert_eq!(run("01", 5), Outcome { bit: true, tosses: 2 });
        assert_eq!(run("0000", 4), Outcome { bit: false, tosses: 4 });
    }

    #[test]
    fn reflection_small() {
        assert_eq!(reflection_count(4, 1), BigInt::from(2));
        assert_eq!(reflection_count(4, 2), BigInt::from(6));
        assert_eq!(reflection_count(4, 0), BigInt::zero());
    }

    #[test]
    fn bias_values() {
        assert_eq!(walk_bias_exact(2, &rat(1, 2)), rat(3, 4));
        assert_eq!(walk_bias_exact(1, &rat(1, 4)), rat(1, 4));
        assert!(walk_bias_exact(37, &rat(9, 10)) <= Rational::one());
    }

    #[test]
    fn bound_is_tiny_far_from_half() {
        let b = walk_error_bound(2000, &rat(3, 10)).unwrap();
        // 2 e^-160 < 2^-229
        assert!(b < Rational::new(BigInt::one(), crate::rational::pow2(229)));
        assert!(walk_error_bound(10, &rat(1, 2)).is_none());
    }
}
