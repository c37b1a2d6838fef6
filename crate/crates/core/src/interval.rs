//! Closed intervals with exact rational endpoints.

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::rational::{format_rational, round_down_abs, round_up_abs, Rational};

/// Fractional bits kept when endpoints are rounded outward.
pub const ROUND_BITS: u32 = 128;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lo: Rational,
    pub hi: Rational,
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", format_rational(&self.lo), format_rational(&self.hi))
    }
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        assert!(lo <= hi, "interval endpoints out of order");
        Interval { lo, hi }
    }

    pub fn point(x: Rational) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn unit() -> Self {
        Interval { lo: Rational::zero(), hi: Rational::one() }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = (&self.lo).max(&other.lo).clone();
        let hi = (&self.hi).min(&other.hi).clone();
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval { lo: (&self.lo).min(&other.lo).clone(), hi: (&self.hi).max(&other.hi).clone() }
    }

    pub fn add(&self, o: &Interval) -> Interval {
        Interval { lo: &self.lo + &o.lo, hi: &self.hi + &o.hi }
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        Interval { lo: &self.lo - &o.hi, hi: &self.hi - &o.lo }
    }

    pub fn neg(&self) -> Interval {
        Interval { lo: -&self.hi, hi: -&self.lo }
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        let c = [&self.lo * &o.lo, &self.lo * &o.hi, &self.hi * &o.lo, &self.hi * &o.hi];
        let lo = c.iter().min().expect("nonempty").clone();
        let hi = c.iter().max().expect("nonempty").clone();
        Interval { lo, hi }
    }

    pub fn scale(&self, a: &Rational) -> Interval {
        if a.is_negative() {
            Interval { lo: a * &self.hi, hi: a * &self.lo }
        } else {
            Interval { lo: a * &self.lo, hi: a * &self.hi }
        }
    }

    /// `None` when the divisor contains zero.
    pub fn div(&self, o: &Interval) -> Option<Interval> {
        if o.contains(&Rational::zero()) {
            return None;
        }
        let inv = Interval { lo: o.hi.recip(), hi: o.lo.recip() };
        Some(self.mul(&inv))
    }

    pub fn powi(&self, e: u32) -> Interval {
        if e == 0 {
            return Interval::point(Rational::one());
        }
        let a = num_traits::pow(self.lo.clone(), e as usize);
        let b = num_traits::pow(self.hi.clone(), e as usize);
        if e % 2 == 1 || !self.lo.is_negative() {
            Interval { lo: a.clone().min(b.clone()), hi: a.max(b) }
        } else if !self.hi.is_positive() {
            Interval { lo: b, hi: a }
        } else {
            Interval { lo: Rational::zero(), hi: a.max(b) }
        }
    }

    /// 1 - x.
    pub fn complement(&self) -> Interval {
        Interval { lo: Rational::one() - &self.hi, hi: Rational::one() - &self.lo }
    }

    /// Outward rounding to multiples of 2^-ROUND_BITS.
    pub fn round_out(&self) -> Interval {
        Interval { lo: round_down_abs(&self.lo, ROUND_BITS), hi: round_up_abs(&self.hi, ROUND_BITS) }
    }

    pub fn clamp_unit(&self) -> Interval {
        let z = Rational::zero();
        let o = Rational::one();
        Interval { lo: self.lo.clone().max(z.clone()).min(o.clone()), hi: self.hi.clone().min(o).max(z) }
    }

    /// Splits into `pieces` equal subintervals.
    pub fn split(&self, pieces: u32) -> Vec<Interval> {
        let w = self.width() / Rational::from_integer(pieces.into());
        (0..pieces)
            .map(|i| {
                let a = &self.lo + &w * Rational::from_integer(i.into());
                let b = if i + 1 == pieces { self.hi.clone() } else { &a + &w };
                Interval { lo: a, hi: b }
            })
            .collect()
    }

    pub fn to_strings(&self) -> [String; 2] {
        [format_rational(&self.lo), format_rational(&self.hi)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn arithmetic() {
        let a = Interval::new(rat(1, 10), rat(2, 5));
        let b = a.add(&Interval::point(rat(1, 5)));
        assert_eq!(b, Interval::new(rat(3, 10), rat(3, 5)));
        assert_eq!(a.div(&b).unwrap(), Interval::new(rat(1, 6), rat(4, 3)));
        assert!(a.div(&Interval::new(rat(-1, 2), rat(1, 2))).is_none());
        assert_eq!(Interval::new(rat(-1, 2), rat(1, 3)).powi(2), Interval::new(rat(0, 1), rat(1, 4)));
        assert_eq!(a.split(3).len(), 3);
        assert_eq!(a.split(3)[2].hi, rat(2, 5));
    }
}
