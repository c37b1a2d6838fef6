//! Sources of independent p-coin tosses: a seeded exact generator and recorded tapes.

use std::path::Path;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::rational::{format_rational, Rational};

#[derive(Debug, thiserror::Error)]
pub enum CoinError {
    #[error("coin source exhausted after {0} tosses")]
    SourceExhausted(u64),
    #[error("bias {0} is not in [0, 1]")]
    InvalidBias(String),
    #[error("tape i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("tape contains invalid character {0:?}")]
    BadTape(char),
}

/// Output bit of one factory run and the tosses it consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Outcome {
    pub bit: bool,
    pub tosses: u64,
}

/// Anything that yields coin tosses one at a time.
pub trait BitStream {
    fn next_bit(&mut self) -> Result<bool, CoinError>;

    /// Tosses consumed so far.
    fn tosses(&self) -> u64;

    /// Appends `count` tosses to `buf` and returns how many were ones.
    fn fill(&mut self, count: u64, buf: &mut Vec<bool>) -> Result<u64, CoinError> {
        let mut ones = 0;
        buf.reserve(count as usize);
        for _ in 0..count {
            let b = self.next_bit()?;
            ones += b as u64;
            buf.push(b);
        }
        Ok(ones)
    }
}

impl<T: BitStream + ?Sized> BitStream for &mut T {
    fn next_bit(&mut self) -> Result<bool, CoinError> {
        (**self).next_bit()
    }
    fn tosses(&self) -> u64 {
        (**self).tosses()
    }
    fn fill(&mut self, count: u64, buf: &mut Vec<bool>) -> Result<u64, CoinError> {
        (**self).fill(count, buf)
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `stream` derived from `seed`.
pub fn fork_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream ^ 0x6A09_E667_F3BC_C908))
}

/// Binary expansion of p read 64 digits at a time.
#[derive(Clone, Debug)]
struct Threshold {
    first: Option<u64>,
    rem: BigInt,
    den: BigInt,
    always_one: bool,
}

impl Threshold {
    fn new(p: &Rational) -> Self {
        if p.is_one() {
            return Threshold { first: None, rem: BigInt::zero(), den: BigInt::one(), always_one: true };
        }
        let den = p.denom().clone();
        let scaled: BigInt = p.numer() << 64u32;
        let d = &scaled / &den;
        let rem = scaled - &d * &den;
        Threshold { first: d.to_u64(), rem, den, always_one: false }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> bool {
        if self.always_one {
            return true;
        }
        let d = self.first.expect("digit fits");
        let u = rng.next_u64();
        if u != d {
            return u < d;
        }
        let mut rem = self.rem.clone();
        loop {
            let scaled: BigInt = rem << 64u32;
            let d = &scaled / &self.den;
            rem = scaled - &d * &self.den;
            let d = d.to_u64().expect("digit fits");
            let u = rng.next_u64();
            if u != d {
                return u < d;
            }
        }
    }
}

#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
enum Kind {
    Seeded { seed: u64, p: Rational, rng: ChaCha8Rng, threshold: Threshold },
    Tape { bits: Vec<bool>, pos: usize },
}

/// A p-coin: either pseudo-random with an exact bias or a fixed finite tape.
#[derive(Clone, Debug)]
pub struct CoinSource {
    kind: Kind,
    tosses: u64,
    budget: Option<u64>,
}

impl CoinSource {
    pub fn seeded(seed: u64, p: Rational) -> Result<Self, CoinError> {
        if p.is_negative() || p > Rational::one() {
            return Err(CoinError::InvalidBias(format_rational(&p)));
        }
        let threshold = Threshold::new(&p);
        Ok(CoinSource {
            kind: Kind::Seeded { seed, p, rng: ChaCha8Rng::seed_from_u64(seed), threshold },
            tosses: 0,
            budget: None,
        })
    }

    pub fn tape(bits: Vec<bool>) -> Self {
        CoinSource { kind: Kind::Tape { bits, pos: 0 }, tosses: 0, budget: None }
    }

    pub fn tape_from_str(s: &str) -> Result<Self, CoinError> {
        let mut bits = Vec::new();
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                c if c.is_whitespace() => {}
                c => return Err(CoinError::BadTape(c)),
            }
        }
        Ok(Self::tape(bits))
    }

    pub fn load_tape(path: &Path) -> Result<Self, CoinError> {
        Self::tape_from_str(&std::fs::read_to_string(path)?)
    }

    /// Caps the number of tosses; further requests fail with `SourceExhausted`.
    pub fn with_budget(mut self, max_tosses: u64) -> Self {
        self.budget = Some(max_tosses);
        self
    }

    /// Independent replica `stream` of a seeded source (tapes fork to themselves, rewound).
    pub fn fork(&self, stream: u64) -> Self {
        let kind = match &self.kind {
            Kind::Seeded { seed, p, threshold, .. } => {
                let s = fork_seed(*seed, stream);
                Kind::Seeded { seed: s, p: p.clone(), rng: ChaCha8Rng::seed_from_u64(s), threshold: threshold.clone() }
            }
            Kind::Tape { bits, .. } => Kind::Tape { bits: bits.clone(), pos: 0 },
        };
        CoinSource { kind, tosses: 0, budget: self.budget }
    }

    pub fn seed(&self) -> Option<u64> {
        match &self.kind {
            Kind::Seeded { seed, .. } => Some(*seed),
            Kind::Tape { .. } => None,
        }
    }

    pub fn bias(&self) -> Option<&Rational> {
        match &self.kind {
            Kind::Seeded { p, .. } => Some(p),
            Kind::Tape { .. } => None,
        }
    }

    pub fn remaining(&self) -> Option<u64> {
        let tape = match &self.kind {
            Kind::Tape { bits, pos } => Some((bits.len() - pos) as u64),
            Kind::Seeded { .. } => None,
        };
        let budget = self.budget.map(|b| b.saturating_sub(self.tosses));
        match (tape, budget) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

impl BitStream for CoinSource {
    fn next_bit(&mut self) -> Result<bool, CoinError> {
        if let Some(b) = self.budget {
            if self.tosses >= b {
                return Err(CoinError::SourceExhausted(self.tosses));
            }
        }
        let bit = match &mut self.kind {
            Kind::Seeded { rng, threshold, .. } => threshold.sample(rng),
            Kind::Tape { bits, pos } => {
                let Some(&b) = bits.get(*pos) else {
                    return Err(CoinError::SourceExhausted(self.tosses));
                };
                *pos += 1;
                b
            }
        };
        self.tosses += 1;
        Ok(bit)
    }

    fn tosses(&self) -> u64 {
        self.tosses
    }

    fn fill(&mut self, count: u64, buf: &mut Vec<bool>) -> Result<u64, CoinError> {
        if let Some(rem) = self.remaining() {
            if rem < count {
                // consume what is left so the toss count reflects the attempt
                for _ in 0..rem {
                    buf.push(self.next_bit()?);
                }
                return Err(CoinError::SourceExhausted(self.tosses));
            }
        }
        let mut ones = 0;
        buf.reserve(count as usize);
        match &mut self.kind {
            Kind::Seeded { rng, threshold, .. } => {
                for _ in 0..count {
                    let b = threshold.sample(rng);
                    ones += b as u64;
                    buf.push(b);
                }
            }
            Kind::Tape { bits, pos } => {
                for &b in &bits[*pos..*pos + count as usize] {
                    ones += b as u64;
                    buf.push(b);
                }
                *pos += count as usize;
            }
        }
        self.tosses += count;
        Ok(ones)
    }
}

pub fn write_tape(path: &Path, bits: &[bool]) -> Result<(), CoinError> {
    let mut s: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

/// Counts tosses taken from an inner stream without changing them.
pub struct Counted<S> {
    pub inner: S,
    pub count: u64,
}

impl<S: BitStream> BitStream for Counted<S> {
    fn next_bit(&mut self) -> Result<bool, CoinError> {
        let b = self.inner.next_bit()?;
        self.count += 1;
        Ok(b)
    }
    fn tosses(&self) -> u64 {
        self.count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn same_seed_same_stream() {
        let mut a = CoinSource::seeded(42, rat(3, 10)).unwrap();
        let mut b = CoinSource::seeded(42, rat(3, 10)).unwrap();
        let xa: Vec<bool> = (0..1000).map(|_| a.next_bit().unwrap()).collect();
        let xb: Vec<bool> = (0..1000).map(|_| b.next_bit().unwrap()).collect();
        assert_eq!(xa, xb);
        assert_eq!(a.tosses(), 1000);
    }

    #[test]
    fn forks_differ() {
        let s = CoinSource::seeded(7, rat(1, 2)).unwrap();
        let mut f0 = s.fork(0);
        let mut f1 = s.fork(1);
        let x0: Vec<bool> = (0..256).map(|_| f0.next_bit().unwrap()).collect();
        let x1: Vec<bool> = (0..256).map(|_| f1.next_bit().unwrap()).collect();
        assert_ne!(x0, x1);
        assert_ne!(fork_seed(7, 0), fork_seed(7, 1));
    }

    #[test]
    fn bias_is_close() {
        let mut s = CoinSource::seeded(1, rat(3, 10)).unwrap();
        let mut buf = Vec::new();
        let ones = s.fill(200_000, &mut buf).unwrap();
        let freq = ones as f64 / 200_000.0;
        assert!((freq - 0.3).abs() < 4.0 * (0.21f64 / 200_000.0).sqrt());
    }

    #[test]
    fn degenerate_biases() {
        let mut zero = CoinSource::seeded(3, rat(0, 1)).unwrap();
        let mut one = CoinSource::seeded(3, rat(1, 1)).unwrap();
        for _ in 0..100 {
            assert!(!zero.next_bit().unwrap());
            assert!(one.next_bit().unwrap());
        }
        assert!(CoinSource::seeded(3, rat(3, 2)).is_err());
    }

    #[test]
    fn tape_exhaustion() {
        let mut t = CoinSource::tape_from_str("101\n").unwrap();
        assert!(t.next_bit().unwrap());
        assert!(!t.next_bit().unwrap());
        assert!(t.next_bit().unwrap());
        assert!(matches!(t.next_bit(), Err(CoinError::SourceExhausted(3))));
        assert!(CoinSource::tape_from_str("10x").is_err());
    }

    #[test]
    fn budget_limits_seeded() {
        let mut s = CoinSource::seeded(9, rat(1, 2)).unwrap().with_budget(5);
        let mut buf = Vec::new();
        assert!(s.fill(4, &mut buf).is_ok());
        assert!(s.fill(4, &mut buf).is_err());
        assert_eq!(s.tosses(), 5);
    }

    #[test]
    fn tape_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        write_tape(&path, &[true, false, false, true]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "1001\n");
        let mut t = CoinSource::load_tape(&path).unwrap();
        let mut buf = Vec::new();
        assert_eq!(t.fill(4, &mut buf).unwrap(), 2);
    }
}
