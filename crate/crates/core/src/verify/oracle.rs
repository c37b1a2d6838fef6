use num_bigint::BigInt;
use num_traits::Zero;

use super::{Target, VerifyError};
use crate::coin::{BitStream, CoinError};
use crate::rational::Rational;

pub const MAX_ORACLE_DEPTH: u32 = 20;

/// Probability mass of tapes of the given depth that output 1, and that run past the tape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub depth: u32,
    pub accept: Rational,
    pub undecided: Rational,
}

impl OracleResult {
    /// `[accept, accept + undecided]`.
    pub fn bracket(&self) -> (Rational, Rational) {
        (self.accept.clone(), &self.accept + &self.undecided)
    }
}

/// Replays the bits of `index` (first toss is the top bit) and flags running off the end.
struct IndexTape {
    index: u64,
    depth: u32,
    pos: u32,
    ran_out: bool,
}

impl BitStream for IndexTape {
    fn next_bit(&mut self) -> Result<bool, CoinError> {
        if self.pos >= self.depth {
            self.ran_out = true;
            return Err(CoinError::SourceExhausted(self.pos as u64));
        }
        let b = (self.index >> (self.depth - 1 - self.pos)) & 1 == 1;
        self.pos += 1;
        Ok(b)
    }

    fn tosses(&self) -> u64 {
        self.pos as u64
    }
}

/// Runs the target on every tape of length `depth` and sums `p^ones (1-p)^zeros` over the
/// accepting and the undecided ones. A run that stops after t tosses decides the whole block
/// of tapes sharing its prefix, so those are skipped.
pub fn oracle_enumerate(target: &Target, depth: u32, p: &Rational) -> Result<OracleResult, VerifyError> {
    if depth > MAX_ORACLE_DEPTH {
        return Err(VerifyError::DepthTooLarge(depth));
    }
    // Weights are kept over the common denominator den^depth.
    let (num, den) = (p.numer().clone(), p.denom().clone());
    let alt = &den - &num;
    let pw = |b: &BigInt, e: u32| num_traits::pow(b.clone(), e as usize);
    let d = depth as usize;
    let ph: Vec<BigInt> = (0..=d).map(|e| pw(&num, e as u32)).collect();
    let pt: Vec<BigInt> = (0..=d).map(|e| pw(&alt, e as u32)).collect();
    let dp: Vec<BigInt> = (0..=d).map(|e| pw(&den, e as u32)).collect();
    let mut accept = BigInt::zero();
    let mut undecided = BigInt::zero();
    let total = 1u64 << depth;
    let mut index = 0u64;
    while index < total {
        let mut tape = IndexTape { index, depth, pos: 0, ran_out: false };
        let res = target.run(&mut tape);
        let t = tape.pos;
        let ones = if t == 0 { 0 } else { (index >> (depth - t)).count_ones() };
        let zeros = t - ones;
        // mass of the prefix, scaled by den^depth
        let w = &ph[ones as usize] * &pt[zeros as usize] * &dp[(depth - t) as usize];
        match res {
            Ok(o) if !tape.ran_out => {
                if o.bit {
                    accept += w;
                }
            }
            _ if tape.ran_out => undecided += w,
            Err(e) => return Err(e),
            Ok(_) => unreachable!(),
        }
        index += 1u64 << (depth - t);
    }
    let scale = &dp[d];
    Ok(OracleResult {
        depth,
        accept: Rational::new(accept, scale.clone()),
        undecided: Rational::new(undecided, scale.clone()),
    })
}
