//! Exact rationals, binomials and directed-rounding dyadic bounds.

use std::fmt;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse {input:?} as a rational")]
pub struct ParseRationalError {
    pub input: String,
}

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: impl Into<BigInt>) -> Rational {
    Rational::from_integer(n.into())
}

/// Accepts `a/b`, integers and plain decimals such as `0.575`.
pub fn parse_rational(s: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError { input: s.to_string() };
    let t = s.trim();
    if t.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| err())?;
        let d: BigInt = d.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (ip, fp) = body.split_once('.').unwrap_or((body, ""));
    if ip.is_empty() && fp.is_empty() {
        return Err(err());
    }
    if !ip.chars().all(|c| c.is_ascii_digit()) || !fp.chars().all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{ip}{fp}");
    let n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| err())? };
    let d = num_traits::pow(BigInt::from(10u32), fp.len());
    let r = Rational::new(n, d);
    Ok(if neg { -r } else { r })
}

pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Serde adapter storing a rational as a `num/den` string.
pub mod serde_str {
    use super::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// Display adapter printing `num/den`.
pub struct Fmt<'a>(pub &'a Rational);

impl fmt::Display for Fmt<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(self.0))
    }
}

pub fn floor_int(r: &Rational) -> BigInt {
    r.numer().div_floor(r.denom())
}

pub fn ceil_int(r: &Rational) -> BigInt {
    -((-r.numer()).div_floor(r.denom()))
}

pub fn pow2(e: u64) -> BigInt {
    BigInt::one() << e
}

pub fn dyadic(m: BigInt, e: i64) -> Rational {
    if e >= 0 {
        Rational::new(m, pow2(e as u64))
    } else {
        int(m << (-e) as u64)
    }
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

pub fn binomial_row(n: u64) -> Vec<BigInt> {
    let mut row = Vec::with_capacity(n as usize + 1);
    let mut c = BigInt::one();
    row.push(c.clone());
    for k in 0..n {
        c = c * (n - k) / (k + 1);
        row.push(c.clone());
    }
    row
}

/// `sum_k c_k p^k (1-p)^(n-k)` with n = coeffs.len() - 1, in integer arithmetic.
pub fn bernstein_sum(coeffs: &[BigInt], p: &Rational) -> Rational {
    let n = coeffs.len().saturating_sub(1);
    let d = p.denom().clone();
    let a = p.numer().clone();
    let b = &d - &a;
    // Horner in a with running powers of b
    let mut acc = BigInt::zero();
    let mut bpow = BigInt::one();
    for c in coeffs.iter().rev() {
        acc = acc * &a + c * &bpow;
        bpow *= &b;
    }
    Rational::new(acc, num_traits::pow(d, n))
}

pub fn pow_rat(r: &Rational, e: u64) -> Rational {
    num_traits::pow(r.clone(), e as usize)
}

/// Approximate floor(log2 |x|) for x != 0, exact up to one unit.
fn log2_approx(x: &Rational) -> i64 {
    x.numer().bits() as i64 - x.denom().bits() as i64
}

/// Largest dyadic with `bits` significant bits that is <= x.
pub fn round_down_rel(x: &Rational, bits: u32) -> Rational {
    if x.is_zero() {
        return x.clone();
    }
    let shift = bits as i64 - log2_approx(x);
    scale_round(x, shift, false)
}

/// Smallest dyadic with `bits` significant bits that is >= x.
pub fn round_up_rel(x: &Rational, bits: u32) -> Rational {
    if x.is_zero() {
        return x.clone();
    }
    let shift = bits as i64 - log2_approx(x);
    scale_round(x, shift, true)
}

/// Rounds to a multiple of 2^-frac_bits.
pub fn round_down_abs(x: &Rational, frac_bits: u32) -> Rational {
    scale_round(x, frac_bits as i64, false)
}

pub fn round_up_abs(x: &Rational, frac_bits: u32) -> Rational {
    scale_round(x, frac_bits as i64, true)
}

fn scale_round(x: &Rational, shift: i64, up: bool) -> Rational {
    let scaled = if shift >= 0 { x * int(pow2(shift as u64)) } else { x / int(pow2((-shift) as u64)) };
    let m = if up { ceil_int(&scaled) } else { floor_int(&scaled) };
    dyadic(m, shift)
}

/// Dyadic bounds `(lo, hi)` on sqrt(x), x >= 0, with `frac_bits` fractional bits.
pub fn sqrt_bounds(x: &Rational, frac_bits: u32) -> (Rational, Rational) {
    assert!(!x.is_negative(), "sqrt of negative");
    let scaled = x * int(pow2(2 * frac_bits as u64));
    let fl = floor_int(&scaled);
    let s = fl.sqrt();
    let exact = &s * &s == fl && scaled.is_integer();
    let lo = dyadic(s.clone(), frac_bits as i64);
    let hi = if exact { lo.clone() } else { dyadic(s + 1, frac_bits as i64) };
    (lo, hi)
}

/// Dyadic bounds on exp(-x) for x >= 0, each with `bits` significant bits.
pub fn exp_neg_bounds(x: &Rational, bits: u32) -> (Rational, Rational) {
    assert!(!x.is_negative(), "exp_neg_bounds needs x >= 0");
    if x.is_zero() {
        return (Rational::one(), Rational::one());
    }
    let s = (log2_approx(x) + 2).max(0) as u64;
    let y = x / int(pow2(s));
    let prec = bits + s as u32 + 24;
    let tol = Rational::new(BigInt::one(), pow2(prec as u64 + 8));
    // alternating series with decreasing terms; consecutive partial sums bracket the value
    let mut term = Rational::one();
    let mut sum = Rational::one();
    let mut k = 0u64;
    let (mut lo, mut hi);
    loop {
        k += 1;
        term = -(&term * &y) / int(k);
        let next = &sum + &term;
        if term.abs() < tol {
            if term.is_negative() {
                lo = next;
                hi = sum;
            } else {
                lo = sum;
                hi = next;
            }
            break;
        }
        sum = next;
    }
    lo = round_down_rel(&lo, prec);
    hi = round_up_rel(&hi, prec);
    for _ in 0..s {
        lo = round_down_rel(&(&lo * &lo), prec);
        hi = round_up_rel(&(&hi * &hi), prec);
    }
    (round_down_rel(&lo, bits), round_up_rel(&hi, bits))
}

/// sin(x) rounded to the nearest multiple of 2^-bits (error at most 2^-bits).
pub fn sin_dyadic(x: &Rational, bits: u32) -> Rational {
    let tol = Rational::new(BigInt::one(), pow2(bits as u64 + 8));
    let x2 = x * x;
    let mut term = x.clone();
    let mut sum = x.clone();
    let mut k = 1u64;
    while term.abs() >= tol {
        term = -(&term * &x2) / int((k + 1) * (k + 2));
        k += 2;
        sum += &term;
    }
    let half = Rational::new(BigInt::one(), pow2(bits as u64 + 1));
    round_down_abs(&(sum + half), bits)
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Outward f64 enclosure of x.
pub fn to_f64_bounds(x: &Rational) -> (f64, f64) {
    let v = to_f64(x);
    let mut lo = v.next_down();
    let hi = v.next_up();
    if !x.is_negative() && lo < 0.0 {
        lo = 0.0;
    }
    (lo, hi)
}

pub fn from_f64(v: f64) -> Rational {
    Rational::from_float(v).expect("finite float")
}

/// Exact value of `num / den` as f64-friendly fraction in [0, 1] with 64 bits.
pub fn ratio_f64(num: &BigInt, den: &BigInt) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = 64i64 + den.bits() as i64 - num.bits() as i64;
    let q: BigInt = if shift >= 0 { (num << shift as u64) / den } else { (num >> (-shift) as u64) / den };
    let qf = q.to_f64().unwrap_or(f64::INFINITY);
    qf * 2f64.powi(-(shift as i32))
}

pub fn is_positive_int(b: &BigInt) -> bool {
    b.sign() == Sign::Plus
}
